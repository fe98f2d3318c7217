"""
Many communities by repeated bisection
======================================

Each community is split again, using the modularity of the subgraph
relative to the whole graph, until no split gains anything. A pass of
single-vertex moves then cleans up the boundaries.
"""

import numpy as np

import nlmod
from nlmod.partition import MethodSpec, default_starts

# four planted groups of 30 with sparse links between them
rng = np.random.default_rng(7)
labels = np.repeat(np.arange(4), 30)
same = labels[:, None] == labels[None, :]
P_edge = np.where(same, 0.3, 0.01)
iu = np.triu_indices(120, 1)
keep = rng.random(iu[0].size) < P_edge[iu]
G = nlmod.WeightedGraph.from_edges(120, list(zip(iu[0][keep], iu[1][keep])))
print(G)

spec = MethodSpec("nonlinear_q", default_starts(3, 3))
H = nlmod.successive_bipartition(G, spec)
print("communities:", H.partition.k, "q =", round(H.q, 4))

###############################################################################
# The dendrogram records every attempted split and why a branch stopped.

for nd in H.nodes:
    gain = "" if nd.gain is None else f" gain={nd.gain:.2f}"
    print("  " * nd.depth + f"node {nd.id}: {nd.members.size} vertices, {nd.status}{gain}")

###############################################################################
# Single-vertex moves never lower modularity.

H_kl = nlmod.successive_bipartition(G, spec, kl=True)
print("with moves: q =", round(H_kl.q, 4))
print("NMI to planted groups:", round(nlmod.nmi(H_kl.partition, labels), 3))
