"""
Two triangles joined by an edge
===============================

The smallest graph with obvious community structure: vertices 0-2 and 3-5
form triangles, and the edge 2-3 ties them together.
"""

import numpy as np

import nlmod

G = nlmod.WeightedGraph.from_edges(6, [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)])
print(G)

# modularity of one triangle, and the two normalized scores of the split
A = [0, 1, 2]
print("Q(A)    =", nlmod.set_modularity(G, A))
print("q(A)    =", nlmod.q_of(G, A), "(5/14 =", 5 / 14, ")")
print("q_mu(A) =", nlmod.q_mu_of(G, A))

###############################################################################
# On a +1/-1 indicator the nonlinear quotient reproduces the set score
# exactly. The linear quotient <x, Mx> / |x|^2 does not.

v = np.where(np.isin(np.arange(6), A), 1.0, -1.0)
print("r*(v) / mu(V) =", nlmod.rayleigh_r_star(G, v) / G.volume)

eig = nlmod.leading_eigenpair(G)
print("leading eigenvalue of M:", eig.lam)

###############################################################################
# Every relaxation recovers the same split here.

for relaxation in ("linear", "nonlinear_q", "nonlinear_qmu"):
    P, rep = nlmod.leading_module(G, nlmod.MethodSpec(relaxation))
    print(f"{relaxation:14s} labels={P.labels.tolist()} value={rep.value:.6f}")

###############################################################################
# A single edge has nothing to split: the modularity matrix has no
# positive eigenvalue and the report says so.

K2 = nlmod.WeightedGraph.from_edges(2, [(0, 1)])
P, rep = nlmod.leading_module(K2)
print("K2 indivisible:", rep.indivisible, "labels:", P.labels.tolist())
