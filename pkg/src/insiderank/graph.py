"""User-relationship graph with per-vertex attribute rows.

Vertices are the directory users (sorted by user id, one vertex each,
active or not).  The graph is undirected, unweighted and simple.  Edges come
from two sources:

* organisational hierarchy: each user is linked to their supervisor;
* email: every email links its sender to each internal recipient in
  TO, CC and BCC, with senders and recipients resolved to users by address.

Recipients outside the enterprise domain never create vertices or edges
(they only feed the external-contact attribute).  An internal-domain address
that does not resolve to a directory user rejects the whole email for edge
purposes and is recorded in the reject report.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .features import read_nodes_csv
from .ingest import EmailPayload, LogEvent, OrgDirectory, RejectReport

__all__ = [
    "AttributedGraph",
    "build_graph",
    "degree_profile",
    "load_graph",
    "read_edges_csv",
    "write_edges_csv",
]


def _is_internal(address: str, internal_domain: str) -> bool:
    address = address.lower()
    if "@" not in address:
        return False
    domain = address.rsplit("@", 1)[1]
    suffix = internal_domain.lower()
    return domain == suffix or domain.endswith("." + suffix)


class AttributedGraph:
    """Immutable undirected simple graph plus an aligned attribute matrix."""

    def __init__(
        self,
        user_ids: Sequence[str],
        edges: Iterable[tuple[int, int]],
        attributes: np.ndarray,
        attribute_names: Sequence[str],
    ) -> None:
        self.user_ids: tuple[str, ...] = tuple(user_ids)
        if len(set(self.user_ids)) != len(self.user_ids):
            raise ValueError("duplicate user ids")
        n = len(self.user_ids)
        self.attributes = np.asarray(attributes, dtype=np.float64)
        self.attribute_names: tuple[str, ...] = tuple(attribute_names)
        if self.attributes.shape != (n, len(self.attribute_names)):
            raise ValueError(
                f"attribute matrix shape {self.attributes.shape} does not match "
                f"{n} vertices x {len(self.attribute_names)} attributes"
            )
        self.index: dict[str, int] = {u: i for i, u in enumerate(self.user_ids)}

        edge_set: set[tuple[int, int]] = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for {n} vertices")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            edge_set.add((u, v) if u < v else (v, u))
        self.edges: tuple[tuple[int, int], ...] = tuple(sorted(edge_set))

        adjacency: list[set[int]] = [set() for _ in range(n)]
        for u, v in self.edges:
            adjacency[u].add(v)
            adjacency[v].add(u)
        self.adjacency: tuple[frozenset[int], ...] = tuple(frozenset(a) for a in adjacency)
        self._matrix: np.ndarray | None = None

    @property
    def n_vertices(self) -> int:
        return len(self.user_ids)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, v: int) -> frozenset[int]:
        return self.adjacency[v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self.adjacency[u]

    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def adjacency_matrix(self) -> np.ndarray:
        """Dense boolean adjacency; cached after the first call."""
        if self._matrix is None:
            m = np.zeros((self.n_vertices, self.n_vertices), dtype=bool)
            for u, v in self.edges:
                m[u, v] = m[v, u] = True
            self._matrix = m
        return self._matrix


def build_graph(
    directory: OrgDirectory,
    email_events: Iterable[LogEvent],
    attributes: np.ndarray,
    attribute_names: Sequence[str],
    *,
    internal_domain: str = "dtaa.com",
    rejects: RejectReport | None = None,
) -> AttributedGraph:
    """Assemble the graph from the directory and the email stream.

    ``attributes`` must be aligned with the directory users in sorted user-id
    order (the order produced by feature extraction).
    """
    if rejects is None:
        rejects = RejectReport()
    user_ids = directory.sorted_user_ids()
    index = {u: i for i, u in enumerate(user_ids)}
    address_book = directory.email_to_user()

    edges: set[tuple[int, int]] = set()
    for uid in user_ids:
        sup = directory.users[uid].supervisor
        if sup is None:
            continue
        if sup not in index:
            raise ValueError(f"user {uid!r} has supervisor {sup!r} outside the directory")
        a, b = index[uid], index[sup]
        if a != b:
            edges.add((a, b) if a < b else (b, a))

    for position, event in enumerate(email_events, start=1):
        if event.kind != "email":
            continue
        payload = event.payload
        assert isinstance(payload, EmailPayload)
        addresses = (payload.sender,) + payload.recipients()
        resolved: dict[str, str | None] = {}
        bad: str | None = None
        for addr in addresses:
            if not _is_internal(addr, internal_domain):
                resolved[addr] = None  # external: attribute material only
                continue
            uid = address_book.get(addr.lower())
            if uid is None:
                bad = addr
                break
            resolved[addr] = uid
        if bad is not None:
            rejects.add(
                "<email-events>",
                position,
                f"event {event.event_id!r}: internal address {bad!r} does not "
                f"resolve to a directory user",
            )
            continue
        sender_uid = resolved.get(payload.sender)
        if sender_uid is None:
            continue  # external sender: no anchor vertex, no edges
        s = index[sender_uid]
        for addr in payload.recipients():
            uid = resolved[addr]
            if uid is None:
                continue
            r = index[uid]
            if r != s:
                edges.add((s, r) if s < r else (r, s))

    return AttributedGraph(user_ids, edges, attributes, attribute_names)


def degree_profile(graph: AttributedGraph) -> dict[str, float]:
    """Headline counts for manifests and logs."""
    degrees = graph.degrees()
    profile: dict[str, float] = {
        "n_vertices": int(graph.n_vertices),
        "n_edges": int(graph.n_edges),
    }
    if graph.n_vertices:
        profile.update(
            degree_min=int(degrees.min()),
            degree_max=int(degrees.max()),
            degree_mean=float(degrees.mean()),
        )
    return profile


def write_edges_csv(path: str | Path, graph: AttributedGraph) -> None:
    """Write undirected edges as ``src,dst`` user-id pairs, src < dst."""
    rows = sorted(
        tuple(sorted((graph.user_ids[u], graph.user_ids[v]))) for u, v in graph.edges
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["src", "dst"])
        writer.writerows(rows)


def read_edges_csv(path: str | Path, index: Mapping[str, int]) -> list[tuple[int, int]]:
    edges: list[tuple[int, int]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["src", "dst"]:
            raise ValueError(f"{path}: expected an edge table with header src,dst")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"{path}: bad edge row {row!r}")
            src, dst = row
            if src not in index or dst not in index:
                raise ValueError(f"{path}: edge references unknown user {row!r}")
            edges.append((index[src], index[dst]))
    return edges


def load_graph(nodes_csv: str | Path, edges_csv: str | Path) -> AttributedGraph:
    """Rebuild a graph from the nodes table and edge list artifacts."""
    users, matrix, names = read_nodes_csv(nodes_csv)
    index = {u: i for i, u in enumerate(users)}
    edges = read_edges_csv(edges_csv, index)
    return AttributedGraph(users, edges, matrix, names)
