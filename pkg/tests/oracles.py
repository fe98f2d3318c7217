"""Independent slow reference implementations used only by the tests."""

import itertools

import numpy as np

from nlmod import WeightedGraph


def random_graph(rng, n, p=0.5, weighted=True, connected=True):
    """Erdos-Renyi graph with optional random weights; retries until connected if asked."""
    for _ in range(1000):
        W = np.triu(rng.random((n, n)) < p, 1).astype(float)
        if weighted:
            W *= rng.choice([0.5, 1.0, 2.0, 3.7], size=(n, n))
        W = W + W.T
        if not connected or _connected(W):
            return WeightedGraph.from_dense(W)
    raise RuntimeError("could not sample a connected graph")


def _connected(W):
    n = W.shape[0]
    seen, stack = {0}, [0]
    while stack:
        i = stack.pop()
        for j in np.nonzero(W[i])[0]:
            if j not in seen:
                seen.add(int(j))
                stack.append(int(j))
    return len(seen) == n


def subsets(n):
    for r in range(n + 1):
        for A in itertools.combinations(range(n), r):
            yield list(A)


def brute_Q(W, A, d=None, vol=None):
    """``sum_{i,j in A} W_ij - vol(A)^2 / vol`` by explicit double sum."""
    d = W.sum(axis=1) if d is None else d
    vol = W.sum() if vol is None else vol
    total = 0.0
    for i in A:
        for j in A:
            total += W[i, j] - d[i] * d[j] / vol
    return total


def brute_ctx_Q(W_parent, active, S):
    """Split gain ``sum_{i in S, j in active \\ S} (d_i d_j / vol - W_ij)`` on the parent graph."""
    d = W_parent.sum(axis=1)
    vol = W_parent.sum()
    rest = [j for j in active if j not in set(S)]
    return sum(d[i] * d[j] / vol - W_parent[i, j] for i in S for j in rest)


def lovasz_oracle(F, x):
    """Sorted-threshold Lovasz extension of the set function ``F``."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x, kind="stable")
    n = x.size
    val = F(list(order)) * x[order[0]]
    for i in range(n - 1):
        val += F(list(order[i + 1:])) * (x[order[i + 1]] - x[order[i]])
    return val


def coarea_oracle(F, x):
    """``sum_i (x_(i+1) - x_(i)) F({x > x_(i)})`` plus the ``F(V) x_min`` term."""
    xs = np.sort(np.unique(x))
    val = F(list(range(len(x)))) * xs[0]
    for a, b in zip(xs[:-1], xs[1:]):
        val += (b - a) * F(list(np.nonzero(x > a)[0]))
    return val


def tv_null_oracle(d, vol, x):
    return sum(d[i] * d[j] / vol * abs(x[i] - x[j]) for i in range(len(x)) for j in range(len(x)))


def delta0_oracle(d, vol, mu, x):
    n = len(x)
    return np.array([sum(d[i] * d[j] / vol * np.sign(x[i] - x[j]) for j in range(n)) / mu[i]
                     for i in range(n)])


def dense_M(W, mu=None, active=None):
    """Zero-row-sum (subgraph) modularity matrix from the parent adjacency."""
    n = W.shape[0]
    active = list(range(n)) if active is None else list(active)
    d = W.sum(axis=1)
    vol = W.sum()
    mu = d if mu is None else mu
    k = len(active)
    M = np.zeros((k, k))
    for a, i in enumerate(active):
        for b, j in enumerate(active):
            M[a, b] = W[i, j] - d[i] * d[j] / vol
        M[a, a] -= sum(W[i, j] - d[i] * d[j] / vol for j in active)
    return M / np.asarray(mu)[active][:, None]


def brute_best(ctx_W, criterion="q", mu=None):
    """Max of ``q`` (or ``q_mu``) over all proper nonempty subsets of a root graph."""
    n = ctx_W.shape[0]
    d = ctx_W.sum(axis=1)
    mu = d if mu is None else mu
    best = -np.inf if criterion == "q_mu" else 0.0
    for A in subsets(n):
        if not A or len(A) == n:
            continue
        Q = brute_Q(ctx_W, A)
        muA = mu[A].sum()
        v = 2 * Q / mu.sum() if criterion == "q" else mu.sum() * Q / (muA * (mu.sum() - muA))
        best = max(best, v)
    return best
