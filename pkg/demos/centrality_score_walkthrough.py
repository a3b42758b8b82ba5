"""Worked example: from centralities and cluster memberships to six scores.

Builds a five-vertex graph by hand, computes the three centralities, places
one user in two clusters, and reproduces score 1 for that user with plain
arithmetic so the formula is visible.
"""

import numpy as np

from insiderank import (
    AttributedGraph,
    ClusterParams,
    ClusteringResult,
    TwofoldCluster,
    compute_centralities,
    compute_scores,
)

# a path 4-0-1-2 with a triangle 1-2-3: vertex 1 sits on most shortest paths
graph = AttributedGraph(
    user_ids=[f"U{i:04d}" for i in range(5)],
    edges=[(4, 0), (0, 1), (1, 2), (1, 3), (2, 3)],
    attributes=np.zeros((5, 3)),
    attribute_names=["a0", "a1", "a2"],
)
cents = compute_centralities(graph)
print("vertex  degree  eigenvector  betweenness")
for i, user in enumerate(graph.user_ids):
    print(f"{user}  {int(cents.degree[i]):6d}  {cents.eigenvector[i]:11.4f}  "
          f"{cents.betweenness[i]:11.2f}")

clusters = (
    TwofoldCluster(members=(0, 1, 2, 3), subspace=(0, 1, 2), gamma=1.0, quality=12.0),
    TwofoldCluster(members=(0, 2, 3), subspace=(0, 1, 2), gamma=1.0, quality=9.0),
)
result = ClusteringResult(clusters=clusters, params=ClusterParams())
table = compute_scores(result, cents, graph)

print("\nuser    " + "  ".join(f"score_{k}" for k in range(1, 7)) + "  clusters")
for i, user in enumerate(graph.user_ids):
    row = "  ".join(f"{table.scores[i, k]:7.3f}" for k in range(6))
    print(f"{user} {row}  {int(table.memberships[i]):8d}")

# score 1 for U0000 by hand: per containing cluster, average
# |C|/c_max + |S|/s_max + deg/deg_max, then divide by 3
c_max, s_max, deg_max = 4, 3, cents.deg_max
term_a = 4 / c_max + 3 / s_max + cents.degree[0] / deg_max
term_b = 3 / c_max + 3 / s_max + cents.degree[0] / deg_max
by_hand = (term_a + term_b) / 3
print(f"\nscore_1(U0000) by hand: ({term_a:.4f} + {term_b:.4f}) / 3 = {by_hand:.4f}")
print(f"score_1(U0000) from the library:               {table.score(1)[0]:.4f}")
print("\nU0004 joins no cluster, so every score is 0 and it ranks first:")
print(f"  score_1(U0004) = {table.score(1)[4]}")
