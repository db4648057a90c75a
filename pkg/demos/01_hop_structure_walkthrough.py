"""Walk through the structural pipeline on a graph small enough to print.

hop matrices -> gain-ratio scores -> top-t / occurrence filter -> MSI layer
"""

import numpy as np

from msignn import MsiConfig, build_msi_layer, from_edges
from msignn.structure import compute_hop_adjacency, rank_columns, select_columns

np.set_printoptions(precision=3, suppress=True)

# A 7-node graph: a path 0-1-2-3 plus a triangle 4-5-6 hanging off node 3.
edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (4, 6)]
labels = np.array([0, 1, 0, 1, 0, 1, 1])
features = np.eye(7)[:, :3]
g = from_edges(7, edges, features, labels, 2)

hops = compute_hop_adjacency(g, 2)
for h in hops:
    print(f"A_{h.hop}: entry (v, u) is 1 iff dist(v, u) == {h.hop}")
    print(h.matrix.toarray().astype(int))

# Pretend only nodes 0..4 are labeled (the training split). With so few
# labels most hop-2 columns touch at most one of them, and n=1 removes those.
train = np.arange(5)
ranking = rank_columns(hops[0], labels, train)
print("\nhop-1 columns by gain ratio (node, score, labeled occurrences):")
for row in ranking.rows():
    print(f"  {row.column_node}  {row.score:.3f}  {row.occurrence}")

# Keep the best 4 columns, then drop any touching at most one labeled node.
sel = [select_columns(h, labels, train, t=4, n=1) for h in hops]
for s in sel:
    print(f"hop {s.hop}: kept columns {s.column_nodes.tolist()}")

cfg = MsiConfig(t=4, n=1, lam=0.5, c_x=1, c_a=(2, 1))
layer = build_msi_layer(features, sel, cfg)
print(f"\nMSI layer [X | A1 | A1 | 0.5*A2], shape {layer.shape}:")
print(layer)
