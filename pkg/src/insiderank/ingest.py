"""Activity-log and directory ingestion.

Reads the CSV layout used by the CMU CERT insider-threat releases (r4.2
column order):

    logon.csv   id,date,user,pc,activity          activity in {Logon, Logoff}
    device.csv  id,date,user,pc,activity          activity in {Connect, Disconnect}
    email.csv   id,date,user,pc,to,cc,bcc,from,size,attachments,content
    file.csv    id,date,user,pc,filename,content

Headers are matched by name, case-insensitively; column order does not
matter and extra columns are ignored.  Timestamps are ``MM/DD/YYYY HH:MM:SS``.
Malformed rows never abort a parse: they are recorded in a
:class:`RejectReport` with their file, line number and reason.

LDAP-style directory snapshots (one CSV per month) are merged into an
:class:`OrgDirectory`; later snapshots win for users present in several.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

__all__ = [
    "EVENT_KINDS",
    "FILE_KINDS",
    "EmailPayload",
    "FilePayload",
    "LogEvent",
    "OrgDirectory",
    "RejectReport",
    "SchemaError",
    "UserRecord",
    "load_directory_csv",
    "load_ldap_snapshots",
    "parse_log_file",
    "read_log_csv",
    "write_directory_csv",
    "write_log_file",
]

TIMESTAMP_FORMAT = "%m/%d/%Y %H:%M:%S"

# Event kinds carried by LogEvent.kind.
EVENT_KINDS = (
    "logon",
    "logoff",
    "device_connect",
    "device_disconnect",
    "email",
    "file_copy",
)

# File kinds accepted by parse_log_file, with their required columns and the
# mapping from the CSV "activity" value to an event kind where relevant.
_SCHEMAS: Mapping[str, tuple[str, ...]] = {
    "logon": ("id", "date", "user", "pc", "activity"),
    "device": ("id", "date", "user", "pc", "activity"),
    "email": ("id", "date", "user", "pc", "to", "cc", "bcc", "from", "size", "attachments"),
    "file": ("id", "date", "user", "pc", "filename"),
}
FILE_KINDS = tuple(_SCHEMAS)

_ACTIVITY_KINDS = {
    "logon": {"logon": "logon", "logoff": "logoff"},
    "device": {"connect": "device_connect", "disconnect": "device_disconnect"},
}


class SchemaError(ValueError):
    """Raised when a CSV header does not provide the expected columns."""


@dataclass(frozen=True)
class EmailPayload:
    sender: str
    to: tuple[str, ...]
    cc: tuple[str, ...]
    bcc: tuple[str, ...]
    size: int
    attachments: int

    def recipients(self) -> tuple[str, ...]:
        return self.to + self.cc + self.bcc


@dataclass(frozen=True)
class FilePayload:
    filename: str


@dataclass(frozen=True)
class LogEvent:
    event_id: str
    timestamp: datetime
    user: str
    pc: str
    kind: str
    payload: EmailPayload | FilePayload | None = None


@dataclass
class RejectReport:
    """Rows that failed to parse, with enough context to find them again."""

    rows: list[tuple[str, int, str]] = field(default_factory=list)

    def add(self, source: str, line: int, reason: str) -> None:
        self.rows.append((source, line, reason))

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["file", "line", "reason"])
            writer.writerows(self.rows)


def _normalize_header(
    raw_header: Sequence[str],
    kind: str,
    column_map: Mapping[str, str] | None,
) -> dict[str, int]:
    """Map required column names to their positions in the file header.

    ``column_map`` renames columns before matching (expected name -> actual
    header name); it is the escape hatch for corpora with divergent headers.
    """
    positions = {name.strip().lower(): i for i, name in enumerate(raw_header)}
    required = _SCHEMAS[kind]
    remap = {k.lower(): v.lower() for k, v in (column_map or {}).items()}
    mapping: dict[str, int] = {}
    missing: list[str] = []
    for name in required:
        actual = remap.get(name, name)
        if actual in positions:
            mapping[name] = positions[actual]
        else:
            missing.append(name)
    if missing:
        raise SchemaError(
            f"{kind} header is missing column(s) {missing}; expected {list(required)}, "
            f"got {list(raw_header)}"
        )
    return mapping


def _split_addresses(value: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in value.split(";") if part.strip())


def parse_log_file(
    lines: Iterable[str],
    kind: str,
    *,
    source: str = "<stream>",
    rejects: RejectReport | None = None,
    column_map: Mapping[str, str] | None = None,
) -> list[LogEvent]:
    """Parse one activity CSV into LogEvents.

    ``kind`` is one of ``logon``, ``device``, ``email``, ``file``.  Rows that
    cannot be parsed are appended to ``rejects`` and skipped; a header that
    does not carry the expected columns raises :class:`SchemaError`.
    """
    if kind not in _SCHEMAS:
        raise ValueError(f"unknown log kind {kind!r}; expected one of {list(_SCHEMAS)}")
    if rejects is None:
        rejects = RejectReport()

    reader = csv.reader(lines)
    try:
        raw_header = next(reader)
    except StopIteration:
        raise SchemaError(f"{source}: empty file, expected a {kind} header")
    columns = _normalize_header(raw_header, kind, column_map)
    width = max(columns.values()) + 1

    events: list[LogEvent] = []
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) < width:
            rejects.add(source, line, f"expected at least {width} fields, got {len(row)}")
            continue
        get = lambda name: row[columns[name]].strip()
        try:
            timestamp = datetime.strptime(get("date"), TIMESTAMP_FORMAT)
        except ValueError:
            rejects.add(source, line, f"bad timestamp {get('date')!r}")
            continue
        user = get("user")
        if not user:
            rejects.add(source, line, "empty user")
            continue
        event_id = get("id")
        pc = get("pc")

        if kind in _ACTIVITY_KINDS:
            activity = get("activity").lower()
            event_kind = _ACTIVITY_KINDS[kind].get(activity)
            if event_kind is None:
                rejects.add(source, line, f"unknown activity {get('activity')!r}")
                continue
            events.append(LogEvent(event_id, timestamp, user, pc, event_kind))
        elif kind == "email":
            try:
                size = int(get("size"))
                attachments = int(get("attachments"))
            except ValueError:
                rejects.add(source, line, "non-integer size or attachments")
                continue
            payload = EmailPayload(
                sender=get("from"),
                to=_split_addresses(get("to")),
                cc=_split_addresses(get("cc")),
                bcc=_split_addresses(get("bcc")),
                size=size,
                attachments=attachments,
            )
            events.append(LogEvent(event_id, timestamp, user, pc, "email", payload))
        else:  # file
            filename = get("filename")
            if not filename:
                rejects.add(source, line, "empty filename")
                continue
            events.append(
                LogEvent(event_id, timestamp, user, pc, "file_copy", FilePayload(filename))
            )
    return events


def read_log_csv(
    path: str | Path,
    kind: str,
    *,
    rejects: RejectReport | None = None,
    column_map: Mapping[str, str] | None = None,
) -> list[LogEvent]:
    path = Path(path)
    with open(path, newline="") as fh:
        return parse_log_file(
            fh, kind, source=path.name, rejects=rejects, column_map=column_map
        )


_KIND_ACTIVITY = {
    "logon": "Logon",
    "logoff": "Logoff",
    "device_connect": "Connect",
    "device_disconnect": "Disconnect",
}


def write_log_file(path: str | Path, events: Sequence[LogEvent], kind: str) -> None:
    """Serialize events back to the canonical CSV layout for ``kind``.

    Inverse of :func:`parse_log_file` for valid rows; the free-text content
    column (never parsed) is written empty.
    """
    if kind not in _SCHEMAS:
        raise ValueError(f"unknown log kind {kind!r}; expected one of {list(_SCHEMAS)}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if kind in ("logon", "device"):
            writer.writerow(["id", "date", "user", "pc", "activity"])
            for e in events:
                stamp = e.timestamp.strftime(TIMESTAMP_FORMAT)
                writer.writerow([e.event_id, stamp, e.user, e.pc, _KIND_ACTIVITY[e.kind]])
        elif kind == "email":
            writer.writerow(
                ["id", "date", "user", "pc", "to", "cc", "bcc", "from",
                 "size", "attachments", "content"]
            )
            for e in events:
                p = e.payload
                assert isinstance(p, EmailPayload)
                stamp = e.timestamp.strftime(TIMESTAMP_FORMAT)
                writer.writerow(
                    [e.event_id, stamp, e.user, e.pc, ";".join(p.to), ";".join(p.cc),
                     ";".join(p.bcc), p.sender, p.size, p.attachments, ""]
                )
        else:  # file
            writer.writerow(["id", "date", "user", "pc", "filename", "content"])
            for e in events:
                p = e.payload
                assert isinstance(p, FilePayload)
                stamp = e.timestamp.strftime(TIMESTAMP_FORMAT)
                writer.writerow([e.event_id, stamp, e.user, e.pc, p.filename, ""])


@dataclass(frozen=True)
class UserRecord:
    user_id: str
    employee_name: str
    email: str
    role: str
    functional_unit: str
    department: str
    team: str
    supervisor: str | None = None  # user id, resolved; None at the top of the tree


_LDAP_COLUMNS = (
    "employee_name",
    "user_id",
    "email",
    "role",
    "functional_unit",
    "department",
    "team",
    "supervisor",
)


@dataclass
class OrgDirectory:
    """Merged directory state: one record per user, supervisors resolved."""

    users: dict[str, UserRecord]

    def __len__(self) -> int:
        return len(self.users)

    def __contains__(self, user_id: str) -> bool:
        return user_id in self.users

    def __iter__(self) -> Iterator[str]:
        return iter(self.users)

    def sorted_user_ids(self) -> list[str]:
        return sorted(self.users)

    def email_to_user(self) -> dict[str, str]:
        mapping: dict[str, str] = {}
        for record in self.users.values():
            address = record.email.lower()
            if not address:
                continue
            existing = mapping.get(address)
            if existing is not None and existing != record.user_id:
                raise ValueError(
                    f"email address {record.email!r} is claimed by both "
                    f"{existing!r} and {record.user_id!r}"
                )
            mapping[address] = record.user_id
        return mapping


def _read_ldap_rows(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            raw_header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: empty directory snapshot")
        positions = {name.strip().lower(): i for i, name in enumerate(raw_header)}
        missing = [c for c in _LDAP_COLUMNS if c not in positions]
        if missing:
            raise SchemaError(
                f"{path.name}: directory snapshot is missing column(s) {missing}; "
                f"expected {list(_LDAP_COLUMNS)}"
            )
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) <= max(positions[c] for c in _LDAP_COLUMNS):
                raise ValueError(f"{path.name}: truncated row at line {reader.line_num}")
            rows.append({c: row[positions[c]].strip() for c in _LDAP_COLUMNS})
        return rows


def load_ldap_snapshots(directory: str | Path) -> OrgDirectory:
    """Merge every ``*.csv`` snapshot under ``directory`` into one OrgDirectory.

    Snapshots are processed in ascending filename order, which orders them by
    date for the usual ``YYYY-MM.csv`` naming; for a user present in several
    snapshots the latest row wins.  Supervisor values may be either user ids
    or employee names and are resolved to user ids; an unresolvable non-empty
    supervisor is an error.
    """
    directory = Path(directory)
    paths = sorted(p for p in directory.glob("*.csv"))
    if not paths:
        raise FileNotFoundError(f"no directory snapshots (*.csv) under {directory}")

    merged: dict[str, dict[str, str]] = {}
    name_to_ids: dict[str, set[str]] = {}
    for path in paths:
        seen_in_file: set[str] = set()
        for row in _read_ldap_rows(path):
            uid = row["user_id"]
            if not uid:
                raise ValueError(f"{path.name}: row with empty user_id")
            if uid in seen_in_file:
                raise ValueError(f"{path.name}: duplicate user_id {uid!r}")
            seen_in_file.add(uid)
            merged[uid] = row
            name_to_ids.setdefault(row["employee_name"], set()).add(uid)

    users: dict[str, UserRecord] = {}
    for uid, row in merged.items():
        raw_sup = row["supervisor"]
        supervisor: str | None
        if not raw_sup:
            supervisor = None
        elif raw_sup in merged:
            supervisor = raw_sup
        else:
            ids = name_to_ids.get(raw_sup, set())
            if len(ids) == 1:
                supervisor = next(iter(ids))
            elif not ids:
                raise ValueError(f"user {uid!r}: unresolvable supervisor {raw_sup!r}")
            else:
                raise ValueError(
                    f"user {uid!r}: supervisor name {raw_sup!r} is ambiguous ({sorted(ids)})"
                )
        users[uid] = UserRecord(
            user_id=uid,
            employee_name=row["employee_name"],
            email=row["email"],
            role=row["role"],
            functional_unit=row["functional_unit"],
            department=row["department"],
            team=row["team"],
            supervisor=supervisor,
        )
    return OrgDirectory(users=users)


def write_directory_csv(path: str | Path, directory: OrgDirectory) -> None:
    """Write the merged directory as a single snapshot (stable row order)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_LDAP_COLUMNS)
        for uid in directory.sorted_user_ids():
            r = directory.users[uid]
            writer.writerow(
                [r.employee_name, r.user_id, r.email, r.role, r.functional_unit,
                 r.department, r.team, r.supervisor or ""]
            )


def load_directory_csv(path: str | Path) -> OrgDirectory:
    """Load a directory previously written by :func:`write_directory_csv`."""
    rows = _read_ldap_rows(Path(path))
    users: dict[str, UserRecord] = {}
    known = {row["user_id"] for row in rows}
    for row in rows:
        uid = row["user_id"]
        if uid in users:
            raise ValueError(f"duplicate user_id {uid!r}")
        sup = row["supervisor"] or None
        if sup is not None and sup not in known:
            raise ValueError(f"user {uid!r}: unknown supervisor id {sup!r}")
        users[uid] = UserRecord(
            user_id=uid,
            employee_name=row["employee_name"],
            email=row["email"],
            role=row["role"],
            functional_unit=row["functional_unit"],
            department=row["department"],
            team=row["team"],
            supervisor=sup,
        )
    return OrgDirectory(users=users)
