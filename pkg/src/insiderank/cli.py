"""Pipeline driver: run each stage individually or chained end to end.

Stages communicate through files in the output directory, so every stage can
be rerun from its persisted inputs:

    ingest    logs + LDAP snapshots -> directory.csv, rejects.csv
    features  logs + directory.csv  -> nodes.csv, nodes.norm.csv
    graph     emails + features     -> edges.csv, graph_rejects.csv
    cluster   nodes/edges           -> clusters.jsonl
    rank      graph + clusters      -> centrality.csv, scores.csv, ranking.<k>.csv
    eval      scores + ground truth -> roc.<k>.csv, distribution.<k>.csv, auc_summary.csv
    synth     nothing               -> a synthetic log corpus with ground truth
    pipeline  all of the above, optionally over a parameter grid

Configuration is a single flat JSON object; command-line flags override
config keys, and the INSIDERANK_OUT environment variable overrides the
output directory.  Every run writes out/manifest.json with the effective
config, input file hashes, seed and timings.  Artifact files are
deterministic byte for byte given equal config, inputs and seed; only the
manifest (timings) varies between reruns.
"""

from __future__ import annotations

import argparse
import hashlib
import itertools
import json
import os
import sys
import time
from dataclasses import fields as dataclass_fields
from datetime import time as dtime
from pathlib import Path

from .centrality import NonConvergenceError, compute_centralities, write_centrality_csv
from .clustering import (
    ClusterParams,
    OracleBoundExceeded,
    enumerate_clusters_exact,
    grasp_cluster,
    read_clusters_jsonl,
    write_clusters_jsonl,
)
from .evaluation import (
    load_ground_truth,
    roc_auc,
    score_distribution,
    write_auc_summary_csv,
    write_distribution_csv,
    write_roc_csv,
)
from .features import (
    CalendarConfig,
    attribute_matrix,
    extract_attributes,
    group_by_user,
    normalize_matrix,
    read_nodes_csv,
    write_nodes_csv,
)
from .graph import build_graph, degree_profile, load_graph, write_edges_csv
from .ingest import (
    LogEvent,
    RejectReport,
    SchemaError,
    load_directory_csv,
    load_ldap_snapshots,
    read_log_csv,
    write_directory_csv,
)
from .ranking import (
    N_VARIANTS,
    compute_scores,
    read_scores_csv,
    write_ranking_csv,
    write_scores_csv,
)
from .synth import SynthSpec, generate_logs

__all__ = ["DEFAULTS", "STAGES", "main"]

STAGES = ("ingest", "features", "graph", "cluster", "rank", "eval", "synth", "pipeline")
OUT_ENV_VAR = "INSIDERANK_OUT"

_LOG_FILES = (("logon", "logon.csv"), ("device", "device.csv"),
              ("email", "email.csv"), ("file", "file.csv"))

# Flat config keys with their defaults; anything else in a config file is an
# error.  Path keys left null fall back to locations under the output dir.
DEFAULTS: dict[str, object] = {
    # paths
    "log_dir": None,
    "ldap_dir": None,
    "out_dir": "out",
    "ground_truth": None,
    # calendar
    "bh_start": "08:00",
    "bh_end": "17:00",
    "business_days": [0, 1, 2, 3, 4],
    # email domain treated as internal
    "internal_domain": "dtaa.com",
    # cluster search parameters
    "n_min": 3,
    "s_min": 2,
    "gamma_min": 0.5,
    "w": 0.1,
    "a_exp": 1.0,
    "b_exp": 1.0,
    "c_exp": 1.0,
    "r_obj": 0.1,
    "r_dim": 0.1,
    "rng_seed": 0,
    "grasp_iterations": 2000,
    "rcl_alpha": 0.3,
    "use_exact": False,
    "oracle_bound": 14,
    # centrality
    "eigen_tol": 1e-10,
    "eigen_max_iter": 10000,
    # scoring
    "score_variants": [1, 2, 3, 4, 5, 6],
    "centrality_outside_sum": False,
    # concurrency
    "threads": 1,
    # synthetic corpus generation
    "synth_n_users": 40,
    "synth_k_clusters": 3,
    "synth_size_lo": 4,
    "synth_size_hi": 6,
    "synth_subspace_lo": 8,
    "synth_subspace_hi": 10,
    "synth_p_in": 0.9,
    "synth_p_out": 0.05,
    "synth_n_attributes": 40,
    "synth_width": 0.05,
    "synth_n_outliers": 3,
    "synth_n_days": 20,
}


class StageError(RuntimeError):
    """A user-facing failure: bad config, missing inputs, bad arguments."""


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _load_config(path: str | None, overrides: dict[str, object]) -> dict[str, object]:
    cfg = dict(DEFAULTS)
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise StageError(f"invalid config: no such file: {path}")
        except json.JSONDecodeError as exc:
            raise StageError(f"invalid config: {path} is not valid JSON ({exc})")
        if not isinstance(raw, dict):
            raise StageError("invalid config: top level must be a JSON object")
        unknown = sorted(set(raw) - set(DEFAULTS))
        if unknown:
            raise StageError(f"invalid config: unknown key(s) {unknown}")
        cfg.update(raw)
    cfg.update(overrides)
    env_out = os.environ.get(OUT_ENV_VAR)
    if env_out:
        cfg["out_dir"] = env_out

    variants = cfg["score_variants"]
    if not (isinstance(variants, list) and variants
            and all(isinstance(v, int) and 1 <= v <= N_VARIANTS for v in variants)):
        raise StageError(f"invalid config: score_variants must be a list drawn from 1..{N_VARIANTS}")
    if not (isinstance(cfg["threads"], int) and cfg["threads"] >= 1):
        raise StageError("invalid config: threads must be a positive integer")
    return cfg


def _out_dir(cfg) -> Path:
    out = Path(str(cfg["out_dir"]))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _log_dir(cfg) -> Path:
    return Path(str(cfg["log_dir"])) if cfg["log_dir"] else _out_dir(cfg) / "corpus"


def _ldap_dir(cfg) -> Path:
    return Path(str(cfg["ldap_dir"])) if cfg["ldap_dir"] else _log_dir(cfg) / "ldap"


def _ground_truth_path(cfg) -> Path | None:
    if cfg["ground_truth"]:
        return Path(str(cfg["ground_truth"]))
    fallback = _log_dir(cfg) / "ground_truth.txt"
    return fallback if fallback.exists() else None


def _calendar(cfg) -> CalendarConfig:
    try:
        return CalendarConfig(
            bh_start=dtime.fromisoformat(str(cfg["bh_start"])),
            bh_end=dtime.fromisoformat(str(cfg["bh_end"])),
            business_days=frozenset(int(d) for d in cfg["business_days"]),
        )
    except (TypeError, ValueError) as exc:
        raise StageError(f"invalid config: calendar: {exc}")


def _cluster_params(cfg, overrides: dict[str, object] | None = None) -> ClusterParams:
    values = {
        "n_min": int(cfg["n_min"]),
        "s_min": int(cfg["s_min"]),
        "gamma_min": float(cfg["gamma_min"]),
        "w": float(cfg["w"]),
        "a_exp": float(cfg["a_exp"]),
        "b_exp": float(cfg["b_exp"]),
        "c_exp": float(cfg["c_exp"]),
        "r_obj": float(cfg["r_obj"]),
        "r_dim": float(cfg["r_dim"]),
        "rng_seed": int(cfg["rng_seed"]),
        "grasp_iterations": int(cfg["grasp_iterations"]),
        "rcl_alpha": float(cfg["rcl_alpha"]),
    }
    if overrides:
        values.update(overrides)
    try:
        return ClusterParams(**values)
    except (TypeError, ValueError) as exc:
        raise StageError(f"invalid config: cluster parameters: {exc}")


def _synth_spec(cfg) -> SynthSpec:
    try:
        return SynthSpec(
            n_users=int(cfg["synth_n_users"]),
            k_clusters=int(cfg["synth_k_clusters"]),
            size_range=(int(cfg["synth_size_lo"]), int(cfg["synth_size_hi"])),
            subspace_range=(int(cfg["synth_subspace_lo"]), int(cfg["synth_subspace_hi"])),
            p_in=float(cfg["synth_p_in"]),
            p_out=float(cfg["synth_p_out"]),
            n_attributes=int(cfg["synth_n_attributes"]),
            width=float(cfg["synth_width"]),
            n_outliers=int(cfg["synth_n_outliers"]),
            rng_seed=int(cfg["rng_seed"]),
        )
    except (TypeError, ValueError) as exc:
        raise StageError(f"invalid config: synth parameters: {exc}")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class Manifest:
    def __init__(self, stage: str, cfg: dict[str, object]) -> None:
        self.data: dict[str, object] = {
            "stage": stage,
            "config": {k: cfg[k] for k in sorted(cfg)},
            "seed": cfg["rng_seed"],
            "inputs": {},
            "outputs": [],
            "timings": {},
            "stats": {},
        }

    def add_input(self, path: Path) -> None:
        self.data["inputs"][str(path)] = _sha256(path)

    def add_output(self, path: Path) -> None:
        self.data["outputs"].append(str(path))

    def write(self, out: Path) -> None:
        path = out / "manifest.json"
        with open(path, "w") as fh:
            json.dump(self.data, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise StageError(f"missing {what}: {path}")
    return path


def _load_events(
    cfg,
    manifest: Manifest,
    *,
    kinds: set[str] | None = None,
    rejects: RejectReport | None = None,
    required: bool = True,
) -> list[LogEvent]:
    log_dir = _require(_log_dir(cfg), "log directory")
    known = {name for _, name in _LOG_FILES}
    for stray in sorted(p.name for p in log_dir.glob("*.csv") if p.name not in known):
        _warn(f"skipping unsupported log file: {stray}")
    events: list[LogEvent] = []
    found = False
    for kind, name in _LOG_FILES:
        if kinds is not None and kind not in kinds:
            continue
        path = log_dir / name
        if not path.exists():
            continue
        manifest.add_input(path)
        events.extend(read_log_csv(path, kind, rejects=rejects))
        found = True
    if required and not found:
        wanted = sorted(name for kind, name in _LOG_FILES if kinds is None or kind in kinds)
        raise StageError(f"missing log files: none of {wanted} under {log_dir}")
    return events


def _load_directory(cfg, manifest: Manifest):
    path = _require(_out_dir(cfg) / "directory.csv", "directory artifact (run ingest first)")
    manifest.add_input(path)
    return load_directory_csv(path)


def _load_graph_artifacts(cfg, manifest: Manifest):
    out = _out_dir(cfg)
    nodes, edges = out / "nodes.norm.csv", out / "edges.csv"
    if not (nodes.exists() and edges.exists()):
        raise StageError(
            f"missing graph artifacts: expected {nodes} and {edges}; "
            "run the features and graph stages first"
        )
    manifest.add_input(nodes)
    manifest.add_input(edges)
    return load_graph(nodes, edges)


def stage_ingest(cfg, manifest: Manifest) -> None:
    out = _out_dir(cfg)
    ldap_dir = _require(_ldap_dir(cfg), "LDAP directory")
    snapshots = sorted(ldap_dir.glob("*.csv"))
    if not snapshots:
        raise StageError(f"missing LDAP snapshots: no CSV files under {ldap_dir}")
    for snap in snapshots:
        manifest.add_input(snap)
    directory = load_ldap_snapshots(ldap_dir)

    rejects = RejectReport()
    events = _load_events(cfg, manifest, rejects=rejects)
    write_directory_csv(out / "directory.csv", directory)
    manifest.add_output(out / "directory.csv")
    rejects.write_csv(out / "rejects.csv")
    manifest.add_output(out / "rejects.csv")

    counts: dict[str, int] = {}
    for e in events:
        counts[e.kind] = counts.get(e.kind, 0) + 1
    manifest.data["stats"] = {"users": len(directory), "events": counts, "rejected": len(rejects)}
    print(f"ingest: {len(directory)} users, {len(events)} events, {len(rejects)} rejected rows")


def stage_features(cfg, manifest: Manifest) -> None:
    out = _out_dir(cfg)
    directory = _load_directory(cfg, manifest)
    rejects = RejectReport()
    events = _load_events(cfg, manifest, rejects=rejects)
    vectors = extract_attributes(
        group_by_user(events), directory, _calendar(cfg),
        internal_domain=str(cfg["internal_domain"]),
    )
    users, matrix = attribute_matrix(vectors)
    write_nodes_csv(out / "nodes.csv", users, matrix)
    write_nodes_csv(out / "nodes.norm.csv", users, normalize_matrix(matrix))
    manifest.add_output(out / "nodes.csv")
    manifest.add_output(out / "nodes.norm.csv")
    manifest.data["stats"] = {"users": len(users), "attributes": matrix.shape[1],
                              "rejected": len(rejects)}
    print(f"features: {len(users)} users x {matrix.shape[1]} attributes")


def stage_graph(cfg, manifest: Manifest) -> None:
    out = _out_dir(cfg)
    directory = _load_directory(cfg, manifest)
    nodes_path = _require(out / "nodes.norm.csv", "feature artifacts (run features first)")
    manifest.add_input(nodes_path)
    users, matrix, names = read_nodes_csv(nodes_path)
    if users != directory.sorted_user_ids():
        raise StageError("graph: nodes.norm.csv users do not match directory.csv")
    rejects = RejectReport()
    emails = _load_events(cfg, manifest, kinds={"email"}, rejects=rejects, required=False)
    graph = build_graph(
        directory, emails, matrix, names,
        internal_domain=str(cfg["internal_domain"]), rejects=rejects,
    )
    write_edges_csv(out / "edges.csv", graph)
    manifest.add_output(out / "edges.csv")
    rejects.write_csv(out / "graph_rejects.csv")
    manifest.add_output(out / "graph_rejects.csv")
    manifest.data["stats"] = degree_profile(graph)
    print(f"graph: {len(graph.user_ids)} vertices, {len(graph.edges)} edges")


def stage_cluster(cfg, manifest: Manifest, params: ClusterParams | None = None,
                  case_dir: Path | None = None) -> None:
    out = case_dir or _out_dir(cfg)
    graph = _load_graph_artifacts(cfg, manifest)
    params = params or _cluster_params(cfg)
    if cfg["use_exact"]:
        result = enumerate_clusters_exact(graph, params, oracle_bound=int(cfg["oracle_bound"]))
    else:
        result = grasp_cluster(graph, params, threads=int(cfg["threads"]))
    write_clusters_jsonl(out / "clusters.jsonl", result, graph)
    manifest.add_output(out / "clusters.jsonl")
    manifest.data.setdefault("stats", {})[f"clusters:{out.name}"] = len(result.clusters)
    print(f"cluster: {len(result.clusters)} clusters "
          f"(c_max={result.c_max}, s_max={result.s_max})")


def stage_rank(cfg, manifest: Manifest, params: ClusterParams | None = None,
               case_dir: Path | None = None) -> None:
    out = case_dir or _out_dir(cfg)
    graph = _load_graph_artifacts(cfg, manifest)
    clusters_path = _require(out / "clusters.jsonl", "cluster artifact (run cluster first)")
    manifest.add_input(clusters_path)
    result = read_clusters_jsonl(clusters_path, graph)
    centralities = compute_centralities(
        graph, tol=float(cfg["eigen_tol"]), max_iter=int(cfg["eigen_max_iter"]),
        threads=int(cfg["threads"]),
    )
    write_centrality_csv(out / "centrality.csv", graph, centralities)
    manifest.add_output(out / "centrality.csv")
    table = compute_scores(result, centralities, graph,
                           centrality_outside_sum=bool(cfg["centrality_outside_sum"]))
    write_scores_csv(out / "scores.csv", table)
    manifest.add_output(out / "scores.csv")
    for variant in cfg["score_variants"]:
        write_ranking_csv(out / f"ranking.{variant}.csv", table, variant)
        manifest.add_output(out / f"ranking.{variant}.csv")
    print(f"rank: scored {len(table.user_ids)} users, "
          f"{int((table.memberships > 0).sum())} appear in clusters")


def stage_eval(cfg, manifest: Manifest, params: ClusterParams | None = None,
               case_dir: Path | None = None, case_label: str = "A"):
    out = case_dir or _out_dir(cfg)
    scores_path = _require(out / "scores.csv", "score artifact (run rank first)")
    manifest.add_input(scores_path)
    truth_path = _ground_truth_path(cfg)
    if truth_path is None:
        raise StageError("missing ground truth: set the ground_truth config key")
    manifest.add_input(_require(truth_path, "ground truth file"))
    truth = load_ground_truth(truth_path)
    table = read_scores_csv(scores_path)
    missing = sorted(truth.missing_from(table.user_ids))
    if missing:
        _warn(f"{len(missing)} ground-truth user(s) have no score: {missing}")

    aucs = []
    for variant in range(1, N_VARIANTS + 1):
        column = table.score(variant)
        curve = roc_auc(dict(zip(table.user_ids, column)), truth)
        aucs.append(curve.auc)
        if variant in cfg["score_variants"]:
            write_roc_csv(out / f"roc.{variant}.csv", curve)
            manifest.add_output(out / f"roc.{variant}.csv")
            write_distribution_csv(out / f"distribution.{variant}.csv",
                                   score_distribution(table, variant))
            manifest.add_output(out / f"distribution.{variant}.csv")
    params = params or _cluster_params(cfg)
    row = (case_label, params.n_min, params.s_min, aucs)
    write_auc_summary_csv(out / "auc_summary.csv", [row])
    manifest.add_output(out / "auc_summary.csv")
    shown = ", ".join(f"score_{k + 1}={a:.4f}" for k, a in enumerate(aucs))
    print(f"eval[{case_label}]: {shown}")
    return row


def stage_synth(cfg, manifest: Manifest) -> None:
    spec = _synth_spec(cfg)
    log_dir = _log_dir(cfg)
    try:
        directory = generate_logs(spec, _calendar(cfg), log_dir,
                                  n_days=int(cfg["synth_n_days"]))
    except ValueError as exc:
        raise StageError(f"invalid config: synth: {exc}")
    for name in ("logon.csv", "device.csv", "email.csv", "file.csv",
                 "ldap/2009-12.csv", "ground_truth.txt"):
        manifest.add_output(log_dir / name)
    manifest.data["stats"] = {"users": len(directory), "days": int(cfg["synth_n_days"])}
    print(f"synth: wrote {len(directory)}-user corpus under {log_dir}")


_GRID_KEYS = {f.name for f in dataclass_fields(ClusterParams)}


def _parse_grid(text: str) -> list[tuple[str, list]]:
    axes: list[tuple[str, list]] = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, eq, values_text = part.partition("=")
        key = key.strip()
        if not eq or key not in _GRID_KEYS:
            raise StageError(
                f"invalid grid: expected '<param>=<values>' with param in "
                f"{sorted(_GRID_KEYS)}, got {part!r}"
            )
        values_text = values_text.strip()
        try:
            if ".." in values_text:
                lo_text, _, hi_text = values_text.partition("..")
                lo, hi = int(lo_text), int(hi_text)
                if hi < lo:
                    raise ValueError(f"empty range {values_text!r}")
                values: list = list(range(lo, hi + 1))
            else:
                tokens = [t.strip() for t in values_text.split(",") if t.strip()]
                if not tokens:
                    raise ValueError("no values")
                values = [float(t) if "." in t else int(t) for t in tokens]
        except ValueError as exc:
            raise StageError(f"invalid grid: {part!r}: {exc}")
        axes.append((key, values))
    if not axes:
        raise StageError("invalid grid: no parameters given")
    return axes


def _case_label(i: int) -> str:
    label = ""
    i += 1
    while i:
        i, r = divmod(i - 1, 26)
        label = chr(ord("A") + r) + label
    return label


def _grid_cases(grid: str | None) -> list[tuple[str, dict[str, object]]]:
    if grid is None:
        return [("A", {})]
    axes = _parse_grid(grid)
    keys = [k for k, _ in axes]
    cases = []
    for i, combo in enumerate(itertools.product(*(vals for _, vals in axes))):
        cases.append((_case_label(i), dict(zip(keys, combo))))
    return cases


def stage_pipeline(cfg, manifest: Manifest, grid: str | None = None) -> None:
    out = _out_dir(cfg)
    timings = manifest.data["timings"]

    def timed(name, fn, *args, **kwargs):
        start = time.perf_counter()
        value = fn(*args, **kwargs)
        timings[name] = time.perf_counter() - start
        return value

    timed("ingest", stage_ingest, cfg, manifest)
    timed("features", stage_features, cfg, manifest)
    timed("graph", stage_graph, cfg, manifest)

    cases = _grid_cases(grid)
    have_truth = _ground_truth_path(cfg) is not None
    if not have_truth:
        print("pipeline: no ground truth configured, skipping eval")
    rows = []
    for label, overrides in cases:
        params = _cluster_params(cfg, overrides)
        if len(cases) == 1:
            case_dir = out
        else:
            case_dir = out / "cases" / label
            case_dir.mkdir(parents=True, exist_ok=True)
        timed(f"cluster:{label}", stage_cluster, cfg, manifest, params, case_dir)
        timed(f"rank:{label}", stage_rank, cfg, manifest, params, case_dir)
        if have_truth:
            rows.append(timed(f"eval:{label}", stage_eval, cfg, manifest, params,
                              case_dir, label))
    if rows:
        write_auc_summary_csv(out / "auc_summary.csv", rows)
        manifest.add_output(out / "auc_summary.csv")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="insiderank",
        description="Rank users for insider-threat review from activity logs.",
    )
    parser.add_argument("stage", choices=STAGES, help="pipeline stage to run")
    parser.add_argument("--config", metavar="PATH", help="flat JSON config file")
    parser.add_argument("--seed", type=int, metavar="N",
                        help="override the rng_seed config key")
    parser.add_argument("--threads", type=int, metavar="N",
                        help="worker thread cap (does not affect results)")
    parser.add_argument("--grid", metavar="SPEC",
                        help='parameter sweep for pipeline, e.g. "n_min=3,4,5;s_min=2..10"')
    args = parser.parse_args(argv)

    try:
        overrides: dict[str, object] = {}
        if args.seed is not None:
            if args.seed < 0:
                raise StageError("invalid arguments: --seed must be non-negative")
            overrides["rng_seed"] = args.seed
        if args.threads is not None:
            if args.threads < 1:
                raise StageError("invalid arguments: --threads must be positive")
            overrides["threads"] = args.threads
        if args.grid is not None and args.stage != "pipeline":
            raise StageError("invalid arguments: --grid applies to the pipeline stage only")
        cfg = _load_config(args.config, overrides)

        out = _out_dir(cfg)
        manifest = Manifest(args.stage, cfg)
        start = time.perf_counter()
        if args.stage == "pipeline":
            stage_pipeline(cfg, manifest, args.grid)
        else:
            runner = {
                "ingest": stage_ingest,
                "features": stage_features,
                "graph": stage_graph,
                "cluster": stage_cluster,
                "rank": stage_rank,
                "eval": stage_eval,
                "synth": stage_synth,
            }[args.stage]
            runner(cfg, manifest)
        manifest.data["timings"]["total"] = time.perf_counter() - start
        manifest.write(out)
        return 0
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OracleBoundExceeded as exc:
        print(f"error: oracle bound exceeded: {exc}", file=sys.stderr)
        return 1
    except NonConvergenceError as exc:
        print(f"error: eigenvector centrality did not converge: {exc}", file=sys.stderr)
        return 1
    except (SchemaError, ValueError) as exc:
        print(f"error: invalid inputs: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
