"""Outlier scores from cluster membership and centralities, low = suspicious.

Each vertex gets six scores.  Every score sums a bracketed term over the
clusters containing the vertex and multiplies by a leading fraction:

* score_1 = (1/3) sum[ |C|/c_max + |S|/s_max + deg/deg_max ]
* score_2 = (1/3) sum[ |C|/c_max + |S|/s_max + ec/ec_max ]
* score_3 = (1/3) sum[ |C|/c_max + |S|/s_max + bc/bc_max ]
* score_4 = (1/4) sum[ A + ec/ec_max ]
* score_5 = (1/4) sum[ A + bc/bc_max ]
* score_6 = (1/5) sum[ A + ec/ec_max + bc/bc_max ]

with A = |C|/c_max + |S|/s_max + deg/deg_max.  The centrality terms sit
inside the summation, so a vertex in m clusters counts its centrality m
times.  ``centrality_outside_sum=True`` switches to the alternative reading
where each centrality term is added once after the cluster sum (vertices in
no cluster still score 0).  Vertices outside every cluster have an empty
sum, hence score 0: well-clustered users score high and isolates of the
cluster structure float to the top of the suspicion ranking.

Degenerate maxima (for example bc_max = 0 on a complete graph) make the
affected normalized term 0 rather than dividing by zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .centrality import CentralityTable
from .clustering import ClusteringResult
from .graph import AttributedGraph

__all__ = [
    "NormalizationContext",
    "OutlierScoreTable",
    "compute_scores",
    "rank_users",
    "read_scores_csv",
    "write_ranking_csv",
    "write_scores_csv",
]

N_VARIANTS = 6


@dataclass(frozen=True)
class NormalizationContext:
    c_max: int
    s_max: int
    deg_max: int
    ec_max: float
    bc_max: float

    @classmethod
    def from_results(cls, result: ClusteringResult, centralities: CentralityTable) -> "NormalizationContext":
        return cls(
            c_max=result.c_max,
            s_max=result.s_max,
            deg_max=centralities.deg_max,
            ec_max=centralities.ec_max,
            bc_max=centralities.bc_max,
        )


@dataclass
class OutlierScoreTable:
    user_ids: tuple[str, ...]
    scores: np.ndarray  # shape (n, 6)
    memberships: np.ndarray  # shape (n,), clusters containing each user

    def __post_init__(self) -> None:
        n = len(self.user_ids)
        if self.scores.shape != (n, N_VARIANTS):
            raise ValueError(f"scores must have shape ({n}, {N_VARIANTS})")
        if self.memberships.shape != (n,):
            raise ValueError(f"memberships must have shape ({n},)")

    def score(self, variant: int) -> np.ndarray:
        if not 1 <= variant <= N_VARIANTS:
            raise ValueError(f"variant must be in 1..{N_VARIANTS}, got {variant}")
        return self.scores[:, variant - 1]

    def ranks(self, variant: int) -> np.ndarray:
        """1-based rank per user for a variant; rank 1 = most suspicious."""
        order = _ranked_indices(self, variant)
        out = np.empty(len(self.user_ids), dtype=np.int64)
        for pos, i in enumerate(order, start=1):
            out[i] = pos
        return out


def _normalized(values: np.ndarray, maximum) -> np.ndarray:
    if maximum > 0:
        return values.astype(np.float64) / maximum
    return np.zeros(len(values))


def compute_scores(
    result: ClusteringResult,
    centralities: CentralityTable,
    graph: AttributedGraph,
    *,
    centrality_outside_sum: bool = False,
) -> OutlierScoreTable:
    n = graph.n_vertices
    for arr in (centralities.degree, centralities.eigenvector, centralities.betweenness):
        if len(arr) != n:
            raise ValueError(
                f"centrality table covers {len(arr)} vertices but the graph has {n}"
            )
    for c in result.clusters:
        if c.members and not (0 <= c.members[0] and c.members[-1] < n):
            raise ValueError(f"cluster members {c.members} out of range for {n} vertices")

    ctx = NormalizationContext.from_results(result, centralities)
    cluster_sum = np.zeros(n)
    memberships = np.zeros(n, dtype=np.int64)
    for c in result.clusters:
        term = 0.0
        if ctx.c_max > 0:
            term += len(c.members) / ctx.c_max
        if ctx.s_max > 0:
            term += len(c.subspace) / ctx.s_max
        idx = list(c.members)
        cluster_sum[idx] += term
        memberships[idx] += 1

    ndeg = _normalized(centralities.degree, ctx.deg_max)
    nec = _normalized(centralities.eigenvector, ctx.ec_max)
    nbc = _normalized(centralities.betweenness, ctx.bc_max)

    # the centrality term appears once per containing cluster when inside
    # the sum, once overall when outside (and not at all for unclustered
    # vertices, keeping score = 0 exactly for them)
    count = (memberships > 0).astype(np.float64) if centrality_outside_sum else memberships

    scores = np.column_stack(
        [
            (cluster_sum + count * ndeg) / 3.0,
            (cluster_sum + count * nec) / 3.0,
            (cluster_sum + count * nbc) / 3.0,
            (cluster_sum + count * ndeg + count * nec) / 4.0,
            (cluster_sum + count * ndeg + count * nbc) / 4.0,
            (cluster_sum + count * ndeg + count * nec + count * nbc) / 5.0,
        ]
    )
    return OutlierScoreTable(tuple(graph.user_ids), scores, memberships)


def _ranked_indices(table: OutlierScoreTable, variant: int) -> list[int]:
    col = table.score(variant)
    return sorted(
        range(len(table.user_ids)),
        key=lambda i: (col[i], int(table.memberships[i]), table.user_ids[i]),
    )


def rank_users(table: OutlierScoreTable, variant: int) -> list[str]:
    """Users ascending by score; ties fall to fewer cluster memberships,
    then lexicographic user id."""
    return [table.user_ids[i] for i in _ranked_indices(table, variant)]


def write_scores_csv(path: str | Path, table: OutlierScoreTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["user_id"] + [f"score_{k}" for k in range(1, N_VARIANTS + 1)] + ["memberships"]
        )
        for i, user in enumerate(table.user_ids):
            writer.writerow(
                [user]
                + [repr(float(x)) for x in table.scores[i]]
                + [int(table.memberships[i])]
            )


def read_scores_csv(path: str | Path) -> OutlierScoreTable:
    expected = ["user_id"] + [f"score_{k}" for k in range(1, N_VARIANTS + 1)] + ["memberships"]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected:
            raise ValueError(f"{path}: expected header {expected}, got {header}")
        users: list[str] = []
        rows: list[list[float]] = []
        counts: list[int] = []
        for row in reader:
            if len(row) != len(expected):
                raise ValueError(f"{path}: malformed row {row}")
            users.append(row[0])
            rows.append([float(x) for x in row[1:-1]])
            counts.append(int(row[-1]))
    return OutlierScoreTable(
        tuple(users),
        np.array(rows, dtype=np.float64).reshape(len(users), N_VARIANTS),
        np.array(counts, dtype=np.int64),
    )


def write_ranking_csv(path: str | Path, table: OutlierScoreTable, variant: int) -> None:
    col = table.score(variant)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "user_id", "score"])
        for pos, i in enumerate(_ranked_indices(table, variant), start=1):
            writer.writerow([pos, table.user_ids[i], repr(float(col[i]))])
