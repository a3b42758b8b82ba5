"""Twofold clusters: dense vertex groups that also agree on attributes.

A cluster is a pair (C, S): a set of vertices C and a set of attribute
columns S.  C must induce a connected quasi-clique (every member adjacent to
at least ``ceil(gamma_min * (|C|-1))`` other members) and every attribute in
S must vary by at most ``w`` across C (values are assumed min-max
normalized).  S is always the maximal such subspace for C.  Cluster quality
is ``|C|**a * |S|**b * gamma**c`` with ``gamma`` the minimum in-cluster
degree ratio ``deg_C(v) / (|C|-1)``.

Two search paths produce the same result type:

* :func:`enumerate_clusters_exact` tries every vertex subset and is only
  allowed on small graphs (the oracle bound);
* :func:`grasp_cluster` runs randomized greedy rounds (seed edge biased
  toward attribute-similar endpoints, growth through a restricted candidate
  list on quality) followed by a single-vertex add/remove/swap hill climb.

Both funnel their candidates through :func:`prune_redundant`, which admits
clusters in quality order and drops any candidate that overlaps an admitted
cluster by at least ``r_obj`` of its members and ``r_dim`` of its subspace.
"""

from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graph import AttributedGraph

__all__ = [
    "ClusterParams",
    "ClusteringResult",
    "OracleBoundExceeded",
    "TwofoldCluster",
    "enumerate_clusters_exact",
    "grasp_cluster",
    "max_subspace",
    "prune_redundant",
    "quality",
    "quasi_clique_gamma",
    "read_clusters_jsonl",
    "write_clusters_jsonl",
]


class OracleBoundExceeded(ValueError):
    """Exact enumeration was asked for a graph beyond its size bound."""


@dataclass(frozen=True)
class ClusterParams:
    n_min: int = 3
    s_min: int = 2
    gamma_min: float = 0.5
    w: float = 0.1
    a_exp: float = 1.0
    b_exp: float = 1.0
    c_exp: float = 1.0
    r_obj: float = 0.1
    r_dim: float = 0.1
    rng_seed: int = 0
    grasp_iterations: int = 2000
    rcl_alpha: float = 0.3

    def __post_init__(self) -> None:
        if self.n_min < 2:
            raise ValueError("n_min must be at least 2")
        if self.s_min < 1:
            raise ValueError("s_min must be at least 1")
        if not 0.0 < self.gamma_min <= 1.0:
            raise ValueError("gamma_min must be in (0, 1]")
        if self.w < 0.0:
            raise ValueError("w must be non-negative")
        if min(self.a_exp, self.b_exp, self.c_exp) < 0.0:
            raise ValueError("quality exponents must be non-negative")
        for name in ("r_obj", "r_dim", "rcl_alpha"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.grasp_iterations < 0:
            raise ValueError("grasp_iterations must be non-negative")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")


@dataclass(frozen=True)
class TwofoldCluster:
    members: tuple[int, ...]  # sorted vertex indices
    subspace: tuple[int, ...]  # sorted attribute indices, maximal for members
    gamma: float
    quality: float


@dataclass
class ClusteringResult:
    clusters: list[TwofoldCluster]
    params: ClusterParams

    @property
    def c_max(self) -> int:
        return max((len(c.members) for c in self.clusters), default=0)

    @property
    def s_max(self) -> int:
        return max((len(c.subspace) for c in self.clusters), default=0)

    def memberships(self, n_vertices: int) -> list[list[int]]:
        """Cluster indices containing each vertex."""
        out: list[list[int]] = [[] for _ in range(n_vertices)]
        for ci, cluster in enumerate(self.clusters):
            for v in cluster.members:
                out[v].append(ci)
        return out


def required_degree(size: int, gamma_min: float) -> int:
    return math.ceil(gamma_min * (size - 1))


def quasi_clique_gamma(graph: AttributedGraph, members: Iterable[int]) -> float:
    members = set(members)
    if len(members) < 2:
        raise ValueError("gamma needs at least two vertices")
    denom = len(members) - 1
    return min(len(graph.adjacency[v] & members) for v in members) / denom


def max_subspace(members: Sequence[int], attrs: np.ndarray, w: float) -> tuple[int, ...]:
    """All attribute columns whose value range over ``members`` is at most ``w``."""
    rows = attrs[list(members)]
    widths = rows.max(axis=0) - rows.min(axis=0)
    return tuple(int(j) for j in np.flatnonzero(widths <= w))


def quality(members, subspace, gamma: float, params: ClusterParams) -> float:
    """``|C|**a_exp * |S|**b_exp * gamma**c_exp``.

    ``members`` and ``subspace`` may be the sets themselves or bare sizes.
    """
    n = members if isinstance(members, int) else len(members)
    s = subspace if isinstance(subspace, int) else len(subspace)
    return (n ** params.a_exp) * (s ** params.b_exp) * (gamma ** params.c_exp)


def _connected(members: set[int], graph: AttributedGraph) -> bool:
    start = next(iter(members))
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for v in frontier:
            for u in graph.adjacency[v] & members:
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    return len(seen) == len(members)


def _evaluate(graph: AttributedGraph, members: set[int], params: ClusterParams) -> TwofoldCluster | None:
    """Full constraint check; returns the cluster or None if any constraint fails."""
    size = len(members)
    if size < params.n_min:
        return None
    min_deg = min(len(graph.adjacency[v] & members) for v in members)
    if min_deg < required_degree(size, params.gamma_min):
        return None
    if not _connected(members, graph):
        return None
    subspace = max_subspace(sorted(members), graph.attributes, params.w)
    if len(subspace) < params.s_min:
        return None
    gamma = min_deg / (size - 1)
    return TwofoldCluster(
        members=tuple(sorted(members)),
        subspace=subspace,
        gamma=gamma,
        quality=quality(size, len(subspace), gamma, params),
    )


def prune_redundant(
    candidates: Sequence[TwofoldCluster],
    r_obj: float = 0.1,
    r_dim: float = 0.1,
) -> list[TwofoldCluster]:
    """Greedy admission in quality order; drop candidates that overlap an
    admitted cluster in at least r_obj of their members and r_dim of their
    subspace."""
    ordered = sorted(
        candidates,
        key=lambda c: (-c.quality, -len(c.members), -len(c.subspace), c.members),
    )
    admitted: list[TwofoldCluster] = []
    kept_members: list[set[int]] = []
    kept_dims: list[set[int]] = []
    for cand in ordered:
        members = set(cand.members)
        dims = set(cand.subspace)
        redundant = False
        for other_members, other_dims in zip(kept_members, kept_dims):
            obj_overlap = len(members & other_members) / len(members)
            dim_overlap = len(dims & other_dims) / len(dims)
            if obj_overlap >= r_obj and dim_overlap >= r_dim:
                redundant = True
                break
        if not redundant:
            admitted.append(cand)
            kept_members.append(members)
            kept_dims.append(dims)
    return admitted


def enumerate_clusters_exact(
    graph: AttributedGraph,
    params: ClusterParams,
    oracle_bound: int = 14,
) -> ClusteringResult:
    """Try every vertex subset of size >= n_min.  Exponential by design and
    therefore refused above ``oracle_bound`` vertices."""
    n = graph.n_vertices
    if n > oracle_bound:
        raise OracleBoundExceeded(
            f"exact enumeration over {n} vertices exceeds the bound of {oracle_bound}; "
            f"use grasp_cluster or raise oracle_bound explicitly"
        )
    candidates: list[TwofoldCluster] = []
    for size in range(params.n_min, n + 1):
        for combo in itertools.combinations(range(n), size):
            cluster = _evaluate(graph, set(combo), params)
            if cluster is not None:
                candidates.append(cluster)
    return ClusteringResult(prune_redundant(candidates, params.r_obj, params.r_dim), params)


class _GraspContext:
    """Shared read-only state for GRASP rounds."""

    def __init__(self, graph: AttributedGraph, params: ClusterParams) -> None:
        self.graph = graph
        self.params = params
        self.attrs = graph.attributes
        self.n = graph.n_vertices
        self.adj_matrix = graph.adjacency_matrix()
        self.neighbor_arrays = [
            np.fromiter(sorted(a), dtype=np.int64) if a else np.empty(0, dtype=np.int64)
            for a in graph.adjacency
        ]
        # Seed pool: edges whose endpoint pair is itself coherent in at least
        # s_min attributes.  Any cluster containing both endpoints has a
        # subspace no larger than the pair's, so other edges cannot seed a
        # valid cluster.  Weights bias sampling toward attribute-similar pairs.
        edges = graph.edges
        if edges:
            e = np.asarray(edges, dtype=np.int64)
            diffs = np.abs(self.attrs[e[:, 0]] - self.attrs[e[:, 1]])
            sizes = (diffs <= params.w).sum(axis=1).astype(np.float64)
        else:
            sizes = np.empty(0)
        keep = sizes >= params.s_min
        self.seed_edges = [e for e, k in zip(edges, keep) if k]
        if self.seed_edges:
            weights = sizes[keep]
            self.seed_probs = weights / weights.sum()
        else:
            self.seed_probs = np.empty(0)


def _grow(ctx: _GraspContext, rng: np.random.Generator) -> set[int] | None:
    """Randomized greedy construction; returns the best valid vertex set
    seen along the growth path, or None if no grown set was valid."""
    p = ctx.params
    attrs, adj = ctx.attrs, ctx.adj_matrix

    seed_idx = int(rng.choice(len(ctx.seed_edges), p=ctx.seed_probs))
    u, v = ctx.seed_edges[seed_idx]

    members: list[int] = [u, v]
    in_members = np.zeros(ctx.n, dtype=bool)
    in_members[u] = in_members[v] = True
    cur_min = np.minimum(attrs[u], attrs[v])
    cur_max = np.maximum(attrs[u], attrs[v])
    deg_in = adj[u].astype(np.int64) + adj[v]
    discarded = np.zeros(ctx.n, dtype=bool)
    candidates = set(ctx.graph.adjacency[u] | ctx.graph.adjacency[v]) - {u, v}

    best_members: set[int] | None = None
    best_quality = -math.inf

    def snapshot_if_valid() -> None:
        nonlocal best_members, best_quality
        size = len(members)
        if size < p.n_min:
            return
        min_deg = int(deg_in[members].min())
        if min_deg < required_degree(size, p.gamma_min):
            return
        s_size = int(((cur_max - cur_min) <= p.w).sum())
        if s_size < p.s_min:
            return
        q = quality(size, s_size, min_deg / (size - 1), p)
        if q > best_quality:
            best_quality = q
            best_members = set(members)

    snapshot_if_valid()
    while candidates:
        cand = np.fromiter(sorted(candidates), dtype=np.int64)
        rows = attrs[cand]
        new_min = np.minimum(cur_min, rows)
        new_max = np.maximum(cur_max, rows)
        s_sizes = ((new_max - new_min) <= p.w).sum(axis=1)
        feasible = s_sizes >= p.s_min
        if not feasible.any():
            break
        dropped = cand[~feasible]
        discarded[dropped] = True
        candidates.difference_update(int(x) for x in dropped)
        cand = cand[feasible]
        s_sizes = s_sizes[feasible]

        size = len(members)
        member_degs = deg_in[members]
        min_member_deg = (member_degs[:, None] + adj[np.ix_(members, cand)]).min(axis=0)
        min_deg = np.minimum(min_member_deg, deg_in[cand])
        gammas = min_deg / size  # new size minus one equals current size
        quals = ((size + 1) ** p.a_exp) * (s_sizes.astype(np.float64) ** p.b_exp) * (gammas ** p.c_exp)

        best = quals.max()
        worst = quals.min()
        threshold = best - p.rcl_alpha * (best - worst)
        rcl = cand[quals >= threshold]
        chosen = int(rcl[rng.integers(len(rcl))])

        members.append(chosen)
        in_members[chosen] = True
        cur_min = np.minimum(cur_min, attrs[chosen])
        cur_max = np.maximum(cur_max, attrs[chosen])
        neigh = ctx.neighbor_arrays[chosen]
        deg_in[neigh] += 1
        candidates.discard(chosen)
        for x in neigh:
            xi = int(x)
            if not in_members[xi] and not discarded[xi]:
                candidates.add(xi)
        snapshot_if_valid()

    return best_members


def _local_search(ctx: _GraspContext, members: set[int]) -> TwofoldCluster:
    """First-improvement hill climb with add, remove and swap moves.

    Moves are scanned in a fixed order (ascending vertex index; swaps by
    removed-then-added index) and taken only when the resulting set is a
    valid cluster of strictly higher quality, so the climb is deterministic
    and terminates.  Candidate moves are pre-filtered with vectorized
    quality bounds; full validation runs only on improving candidates.
    """
    p = ctx.params
    graph, attrs, adj = ctx.graph, ctx.attrs, ctx.adj_matrix
    current = _evaluate(graph, set(members), p)
    assert current is not None

    def batch_improvers(
        base: np.ndarray, cand: np.ndarray, deg_base: np.ndarray, cur_q: float
    ) -> np.ndarray:
        """Candidates x where base+{x} passes size/degree/width bounds and
        beats cur_q; connectivity is left to the caller."""
        k = base.size + 1  # size after adding x
        rows_b = attrs[base]
        b_min = rows_b.min(axis=0)
        b_max = rows_b.max(axis=0)
        rows_c = attrs[cand]
        s_sizes = ((np.maximum(b_max, rows_c) - np.minimum(b_min, rows_c)) <= p.w).sum(axis=1)
        mdeg = deg_base[base]
        min_member = (mdeg[:, None] + adj[np.ix_(base, cand)]).min(axis=0)
        min_deg = np.minimum(min_member, deg_base[cand])
        gammas = min_deg / (k - 1)
        quals = (k ** p.a_exp) * (s_sizes.astype(np.float64) ** p.b_exp) * (gammas ** p.c_exp)
        ok = (
            (s_sizes >= p.s_min)
            & (min_deg >= required_degree(k, p.gamma_min))
            & (quals > cur_q)
        )
        if k < p.n_min:
            ok &= False
        return cand[ok]

    improved = True
    while improved:
        improved = False
        mem = np.fromiter(current.members, dtype=np.int64)
        in_cur = np.zeros(ctx.n, dtype=bool)
        in_cur[mem] = True
        deg_in = adj[mem].sum(axis=0)
        cur_q = current.quality

        # Adds: current is connected and candidates are its neighbors, so
        # the grown set stays connected and the batch filter is exact.
        cand = np.flatnonzero(adj[mem].any(axis=0) & ~in_cur)
        if cand.size:
            for x in batch_improvers(mem, cand, deg_in, cur_q):
                c = _evaluate(graph, set(current.members) | {int(x)}, p)
                if c is not None and c.quality > cur_q:
                    current = c
                    improved = True
                    break
        if improved:
            continue

        for y in current.members:
            rest = set(current.members) - {y}
            if len(rest) < 2:
                continue
            c = _evaluate(graph, rest, p)
            if c is not None and c.quality > cur_q:
                current = c
                improved = True
                break
        if improved:
            continue

        for y in current.members:
            base = mem[mem != y]
            deg_base = deg_in - adj[y]
            nb = adj[base].any(axis=0)
            nb[mem] = False
            cand = np.flatnonzero(nb)
            if not cand.size:
                continue
            for x in batch_improvers(base, cand, deg_base, cur_q):
                c = _evaluate(graph, set(int(b) for b in base) | {int(x)}, p)
                if c is not None and c.quality > cur_q:
                    current = c
                    improved = True
                    break
            if improved:
                break
    return current


def _grasp_round(ctx: _GraspContext, iteration: int) -> TwofoldCluster | None:
    rng = np.random.default_rng((ctx.params.rng_seed, iteration))
    grown = _grow(ctx, rng)
    if grown is None:
        return None
    return _local_search(ctx, grown)


def grasp_cluster(
    graph: AttributedGraph,
    params: ClusterParams,
    threads: int = 1,
) -> ClusteringResult:
    """Randomized multi-start search for twofold clusters.

    Each round draws its random stream from ``(rng_seed, round_index)`` and
    rounds are merged in index order, so the result is identical for any
    worker count.
    """
    ctx = _GraspContext(graph, params)
    if not ctx.seed_edges or params.grasp_iterations == 0:
        return ClusteringResult([], params)

    rounds = range(params.grasp_iterations)
    if threads <= 1:
        found = [_grasp_round(ctx, it) for it in rounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunk = max(1, params.grasp_iterations // (8 * threads))
            found = list(pool.map(lambda it: _grasp_round(ctx, it), rounds, chunksize=chunk))

    seen: set[tuple[int, ...]] = set()
    ordered: list[TwofoldCluster] = []
    for cluster in found:
        if cluster is None or cluster.members in seen:
            continue
        seen.add(cluster.members)
        ordered.append(cluster)
    return ClusteringResult(prune_redundant(ordered, params.r_obj, params.r_dim), params)


def write_clusters_jsonl(path: str | Path, result: ClusteringResult, graph: AttributedGraph) -> None:
    """JSON lines: a parameter header, then one cluster per line."""
    header = {
        "params": asdict(result.params),
        "n_clusters": len(result.clusters),
        "c_max": result.c_max,
        "s_max": result.s_max,
    }
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for c in result.clusters:
            fh.write(
                json.dumps(
                    {
                        "members": [graph.user_ids[v] for v in c.members],
                        "subspace": [graph.attribute_names[j] for j in c.subspace],
                        "gamma": c.gamma,
                        "quality": c.quality,
                    }
                )
                + "\n"
            )


def read_clusters_jsonl(path: str | Path, graph: AttributedGraph) -> ClusteringResult:
    name_index = {name: j for j, name in enumerate(graph.attribute_names)}
    with open(path) as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"{path}: missing cluster header line")
    header, rows = lines[0], lines[1:]
    params = ClusterParams(**header["params"])
    clusters = []
    for row in rows:
        clusters.append(
            TwofoldCluster(
                members=tuple(sorted(graph.index[u] for u in row["members"])),
                subspace=tuple(sorted(name_index[s] for s in row["subspace"])),
                gamma=float(row["gamma"]),
                quality=float(row["quality"]),
            )
        )
    return ClusteringResult(clusters, params)
