"""Degree, eigenvector and betweenness centrality for the user graph.

All three are classical definitions on an undirected simple graph:

* degree: incident edge count;
* eigenvector: dominant eigenvector of the adjacency matrix, max-normalized
  so the largest entry is exactly 1; isolated vertices are set to 0;
* betweenness: for every unordered vertex pair, the fraction of shortest
  paths running through a vertex (endpoints excluded), un-normalized.

Betweenness uses the single-source dependency-accumulation scheme (one BFS
plus a reverse sweep per source).  The arithmetic domain is selectable:
floats for production scale, exact rationals (``exact=True``) when results
must match an independent path-enumeration oracle bit for bit after the
final float conversion.  Per-source passes may run on a thread pool; the
reduction always happens in ascending source order, so the output does not
depend on the worker count.
"""

from __future__ import annotations

import csv
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .graph import AttributedGraph

__all__ = [
    "CentralityTable",
    "NonConvergenceError",
    "betweenness_centrality",
    "compute_centralities",
    "degree_centrality",
    "eigenvector_centrality",
    "write_centrality_csv",
]


class NonConvergenceError(RuntimeError):
    """Power iteration failed to reach the tolerance within max_iter."""

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(message)
        self.residual = residual


@dataclass
class CentralityTable:
    degree: np.ndarray
    eigenvector: np.ndarray
    betweenness: np.ndarray

    @property
    def deg_max(self) -> int:
        return int(self.degree.max()) if self.degree.size else 0

    @property
    def ec_max(self) -> float:
        return float(self.eigenvector.max()) if self.eigenvector.size else 0.0

    @property
    def bc_max(self) -> float:
        return float(self.betweenness.max()) if self.betweenness.size else 0.0


def degree_centrality(graph: AttributedGraph) -> np.ndarray:
    return graph.degrees()


def eigenvector_centrality(
    graph: AttributedGraph,
    tol: float = 1e-10,
    max_iter: int = 10000,
) -> np.ndarray:
    """Power iteration from a uniform positive start, max-normalized.

    The iteration runs on A + I, which has the same dominant eigenvector as
    the adjacency A but cannot two-cycle on bipartite graphs.  Convergence
    requires both a successive-iterate change below tol and the residual
    ``max|A x - lambda x| <= tol * lambda`` for the Rayleigh-quotient lambda
    of A.  On disconnected graphs the iteration runs on the whole adjacency,
    so the most dominant component wins and the rest decay toward zero;
    isolated vertices are set to exactly 0.
    """
    n = graph.n_vertices
    if n == 0:
        raise ValueError("eigenvector centrality needs a non-empty graph")
    if graph.n_edges == 0:
        return np.zeros(n)

    A = graph.adjacency_matrix().astype(np.float64)
    x = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        y = A @ x + x
        y /= y.max()
        diff = float(np.abs(y - x).max())
        x = y
        if diff < tol:
            Ax = A @ x
            lam = float(x @ Ax) / float(x @ x)
            residual = float(np.abs(Ax - lam * x).max())
            if residual <= tol * lam:
                x = x.copy()
                x[graph.degrees() == 0] = 0.0
                return x
    raise NonConvergenceError(
        f"power iteration did not converge in {max_iter} iterations "
        f"(residual {residual:.3e})",
        residual=float(residual),
    )


def _source_dependencies(graph: AttributedGraph, s: int, one):
    """BFS from s plus the reverse dependency sweep.

    ``one`` selects the arithmetic domain for the dependencies: 1.0 for
    floats, Fraction(1) for exact rationals.  Path counts are Python ints
    either way, so they are exact in both domains.
    """
    n = graph.n_vertices
    sigma = [0] * n
    sigma[s] = 1
    dist = [-1] * n
    dist[s] = 0
    preds: list[list[int]] = [[] for _ in range(n)]
    order: list[int] = []
    queue = deque([s])
    while queue:
        v = queue.popleft()
        order.append(v)
        dv = dist[v]
        for w in sorted(graph.adjacency[v]):
            if dist[w] < 0:
                dist[w] = dv + 1
                queue.append(w)
            if dist[w] == dv + 1:
                sigma[w] += sigma[v]
                preds[w].append(v)

    zero = one * 0
    delta = [zero] * n
    for w in reversed(order):
        coeff = (one + delta[w]) / sigma[w]
        for v in preds[w]:
            delta[v] = delta[v] + sigma[v] * coeff
    return delta


def betweenness_centrality(
    graph: AttributedGraph,
    *,
    threads: int = 1,
    exact: bool = False,
) -> np.ndarray:
    """Shortest-path betweenness over unordered pairs, endpoints excluded.

    With ``exact=True`` the dependency sums are computed in rational
    arithmetic and converted to float once at the end, which makes the
    result independent of evaluation order and identical to a brute-force
    path enumeration.  The float path is the production default.
    """
    n = graph.n_vertices
    one = Fraction(1) if exact else 1.0
    sources = range(n)
    if threads <= 1:
        deltas = [_source_dependencies(graph, s, one) for s in sources]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            deltas = list(pool.map(lambda s: _source_dependencies(graph, s, one), sources))

    # reduce in ascending source order so results are thread-count invariant
    totals = [one * 0] * n
    for s in sources:
        delta = deltas[s]
        for v in range(n):
            if v != s:
                totals[v] = totals[v] + delta[v]
    # each unordered pair was counted from both endpoints
    return np.array([float(t / 2) for t in totals], dtype=np.float64)


def compute_centralities(
    graph: AttributedGraph,
    *,
    tol: float = 1e-10,
    max_iter: int = 10000,
    threads: int = 1,
) -> CentralityTable:
    return CentralityTable(
        degree=degree_centrality(graph),
        eigenvector=eigenvector_centrality(graph, tol=tol, max_iter=max_iter),
        betweenness=betweenness_centrality(graph, threads=threads),
    )


def write_centrality_csv(path: str | Path, graph: AttributedGraph, table: CentralityTable) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["user_id", "degree", "eigenvector", "betweenness"])
        for i, user in enumerate(graph.user_ids):
            writer.writerow(
                [user, int(table.degree[i]), repr(float(table.eigenvector[i])), repr(float(table.betweenness[i]))]
            )
