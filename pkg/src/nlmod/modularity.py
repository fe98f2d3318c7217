"""Modularity set functions, the implicit modularity matrix and its leading eigenpair.

Edge sums follow the both-orders convention ``w(E(A, B)) = sum_{i in A, j in B} W_ij``
so that ``Q(V) = 0`` and ``<v_A, M v_A>_mu = 4 Q(A)`` hold exactly.

A :class:`ModularityContext` wraps either a whole graph or an induced
subgraph ``G(A)``.  On a subgraph the null-model weights keep the parent
degrees and volume, and the modularity matrix is the zero-row-sum matrix
``B_ij - delta_ij sum_{k in A} B_ik`` (with ``B_ij = w_ij - d_i d_j / vol``)
left-scaled by ``1/mu_i``.  The matching set function is the split gain

    Q_A(S) = sum_{i in S, j in A \\ S} (d_i d_j / vol - w_ij),

which equals the usual ``Q(S)`` on the root context; splitting ``A`` into
``S`` and ``A \\ S`` changes the total modularity by ``2 Q_A(S)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .graph import WeightedGraph, subgraph, wbincount

__all__ = [
    "ModularityContext",
    "EigenResult",
    "ConvergenceError",
    "as_context",
    "as_mask",
    "set_modularity",
    "q_of",
    "q_mu_of",
    "partition_modularity",
    "community_modularities",
    "mod_matvec",
    "modularity_matrix",
    "leading_eigenpair",
]


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, msg, residual=None, iterations=None):
        super().__init__(msg)
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class ModularityContext:
    """Modularity data for a (sub)graph.

    ``graph`` is the local graph with vertices ``0..n-1``; ``active`` maps
    them to ids of the root graph.  ``null_degrees``, ``volume`` and ``mu``
    come from the root graph (restricted to ``active``).
    """

    graph: WeightedGraph
    null_degrees: np.ndarray
    volume: float
    mu: np.ndarray
    active: np.ndarray
    root_graph: WeightedGraph

    def __post_init__(self):
        if not self.volume > 0:
            raise ValueError("graph volume must be positive")
        if self.active.size == 0:
            raise ValueError("context needs a nonempty vertex set")
        if np.any(self.mu <= 0):
            raise ValueError(
                "vertex measure must be positive (isolated vertices under the degree measure?)"
            )
        # sum_{k in A} B_ik: zero on the root context
        object.__setattr__(
            self,
            "row_shift",
            self.graph.degrees - self.null_degrees * (self.null_total / self.volume),
        )

    @classmethod
    def root(cls, G: WeightedGraph) -> "ModularityContext":
        return cls(G, G.degrees, G.volume, G.measure, np.arange(G.n), G)

    @classmethod
    def for_subset(cls, G: WeightedGraph, A) -> "ModularityContext":
        """Context of the induced subgraph ``G(A)``; ``A`` holds ids of ``G``."""
        H, imap = subgraph(G, A)
        A = imap.to_parent
        return cls(H, G.degrees[A], G.volume, G.measure[A], A, G)

    def restrict(self, local) -> "ModularityContext":
        """Sub-context on a subset given in this context's local ids."""
        local = np.unique(np.asarray(local, dtype=np.int64))
        if local.size and (local[0] < 0 or local[-1] >= self.n):
            raise ValueError("vertex id out of range")
        return ModularityContext.for_subset(self.root_graph, self.active[local])

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def is_root(self) -> bool:
        return self.active.size == self.root_graph.n

    @property
    def null_total(self) -> float:
        return float(self.null_degrees.sum())

    @property
    def mu_total(self) -> float:
        return float(self.mu.sum())


def as_context(obj) -> ModularityContext:
    if isinstance(obj, ModularityContext):
        return obj
    if isinstance(obj, WeightedGraph):
        return ModularityContext.root(obj)
    raise TypeError(f"expected WeightedGraph or ModularityContext, got {type(obj).__name__}")


def as_mask(A, n) -> np.ndarray:
    """Vertex set (index list or boolean mask) -> boolean mask of length ``n``."""
    A = np.asarray(A)
    if A.dtype == bool:
        if A.shape != (n,):
            raise ValueError(f"mask must have length {n}")
        return A.copy()
    idx = A.astype(np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError("vertex set is not contained in the active vertices")
    mask = np.zeros(n, dtype=bool)
    mask[idx] = True
    return mask


def _internal_weight(G: WeightedGraph, mask) -> float:
    """w(E(S)) under the both-orders convention."""
    inside = mask[G.src] & mask[G.dst]
    return 2.0 * float(G.weight[inside].sum())


def set_modularity(ctx, A) -> float:
    """Q(A) on the root context, the split gain Q_A(S) on a subgraph context."""
    ctx = as_context(ctx)
    S = as_mask(A, ctx.n)
    D_S = float(ctx.null_degrees[S].sum())
    cut_null = D_S * (ctx.null_total - D_S) / ctx.volume
    cut = float(ctx.graph.degrees[S].sum()) - _internal_weight(ctx.graph, S)
    return cut_null - cut


def q_of(ctx, A) -> float:
    """Bipartition modularity ``q(A) = 2 Q(A) / mu(V)``."""
    ctx = as_context(ctx)
    return 2.0 * set_modularity(ctx, A) / ctx.mu_total


def q_mu_of(ctx, A) -> float:
    """Normalized bipartition modularity ``mu(V) Q(A) / (mu(A) mu(V \\ A))``."""
    ctx = as_context(ctx)
    S = as_mask(A, ctx.n)
    mu_S = float(ctx.mu[S].sum())
    mu_rest = float(ctx.mu[~S].sum())
    if not S.any() or S.all():
        raise ZeroDivisionError("q_mu is undefined for the empty set and the full set")
    return ctx.mu_total * set_modularity(ctx, S) / (mu_S * mu_rest)


def _labels_from(P, n) -> np.ndarray:
    labels = getattr(P, "labels", None)
    if labels is not None:
        labels = np.asarray(labels)
    elif isinstance(P, np.ndarray) and P.ndim == 1 and P.dtype != object:
        labels = P
    elif isinstance(P, (list, tuple)) and all(isinstance(c, (int, np.integer)) for c in P):
        labels = np.asarray(P, dtype=np.int64)
    else:
        labels = np.full(n, -1, dtype=np.int64)
        for c, members in enumerate(P):
            idx = np.asarray(list(members) if isinstance(members, (set, frozenset)) else members,
                             dtype=np.int64)
            if np.any(labels[idx] >= 0):
                raise ValueError("communities overlap")
            labels[idx] = c
    if labels.shape != (n,):
        raise ValueError(f"partition must label all {n} vertices")
    if np.any(labels < 0):
        raise ValueError("partition does not cover every vertex")
    return labels.astype(np.int64)


def community_modularities(ctx, P) -> np.ndarray:
    """Per-community ``Q_A(C)`` for a partition of the active vertices."""
    ctx = as_context(ctx)
    labels = _labels_from(P, ctx.n)
    _, labels = np.unique(labels, return_inverse=True)
    k = int(labels.max()) + 1 if labels.size else 0
    G = ctx.graph
    same = labels[G.src] == labels[G.dst]
    w_in = 2.0 * wbincount(labels[G.src[same]], G.weight[same], k)
    dloc = wbincount(labels, G.degrees, k)
    D = wbincount(labels, ctx.null_degrees, k)
    return D * (ctx.null_total - D) / ctx.volume - (dloc - w_in)


def partition_modularity(ctx, P) -> float:
    """``(1/mu(V)) sum_i Q(A_i)`` for a partition given as labels or vertex sets."""
    ctx = as_context(ctx)
    return float(community_modularities(ctx, P).sum()) / ctx.mu_total


def mod_matvec(ctx, x) -> np.ndarray:
    """Apply the (subgraph) modularity matrix without forming it; O(|E| + n)."""
    ctx = as_context(ctx)
    x = np.asarray(x, dtype=float)
    if x.shape != (ctx.n,):
        raise ValueError(f"vector length {x.shape} does not match {ctx.n} active vertices")
    G = ctx.graph
    # sum_j w_ij (x_j - x_i), exactly zero on constants
    diff = G.weight * (x[G.dst] - x[G.src])
    out = wbincount(G.src, diff, ctx.n)
    out -= wbincount(G.dst, diff, ctx.n)
    d = ctx.null_degrees
    out -= d * ((d @ x) - ctx.null_total * x) / ctx.volume
    return out / ctx.mu


def modularity_matrix(ctx) -> np.ndarray:
    """Dense modularity matrix; for small graphs and tests."""
    ctx = as_context(ctx)
    d = ctx.null_degrees
    B = ctx.graph.dense() - np.outer(d, d) / ctx.volume
    B -= np.diag(B.sum(axis=1))
    return B / ctx.mu[:, None]


@dataclass
class EigenResult:
    lam: float
    vector: np.ndarray
    iterations: int
    residual: float


def _shift_bound(ctx) -> float:
    """Gershgorin-type upper bound on the spectral radius of D^1/2 M D^-1/2."""
    G = ctx.graph
    s = np.sqrt(ctx.mu)
    t = G.weight / (s[G.src] * s[G.dst])
    radius = wbincount(G.src, t, ctx.n) + wbincount(
        G.dst, t, ctx.n
    )
    d = ctx.null_degrees
    radius += (d / s) * float(np.sum(d / s)) / ctx.volume
    radius += np.abs(ctx.row_shift) / ctx.mu
    return float(radius.max())


def leading_eigenpair(ctx, tol=1e-8, max_iter=200_000, method="power", v0=None) -> EigenResult:
    """Algebraically largest eigenpair of the modularity matrix.

    Works on the symmetric operator ``S = D_mu^1/2 M D_mu^-1/2``.  ``method``
    is ``"power"`` (power iteration on ``S + sigma I`` with a Gershgorin
    shift) or ``"lanczos"`` (ARPACK).  The returned vector is mu-unit with
    its largest-magnitude entry positive; ``residual`` is
    ``|M x - lam x|_{2,mu}``.
    """
    ctx = as_context(ctx)
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = ctx.n
    s = np.sqrt(ctx.mu)

    def S(y):
        return s * mod_matvec(ctx, y / s)

    if n == 1:
        lam = float(S(np.ones(1))[0])
        return EigenResult(lam, np.ones(1) / s, 0, 0.0)

    if v0 is None:
        y = np.random.default_rng(12345).standard_normal(n)
    else:
        y = np.asarray(v0, dtype=float) * s
    y /= np.linalg.norm(y)

    if method == "lanczos":
        op = spla.LinearOperator((n, n), matvec=S, dtype=float)
        if n <= 3:
            dense = np.column_stack([S(e) for e in np.eye(n)])
            vals, vecs = np.linalg.eigh((dense + dense.T) / 2)
            lam, y, it = float(vals[-1]), vecs[:, -1], n
        else:
            try:
                vals, vecs = spla.eigsh(op, k=1, which="LA", tol=tol / 10, v0=y,
                                        maxiter=max_iter)
            except spla.ArpackNoConvergence as exc:
                raise ConvergenceError("Lanczos did not converge") from exc
            lam, y, it = float(vals[0]), vecs[:, 0], -1
        Sy = S(y)
        residual = float(np.linalg.norm(Sy - lam * y))
        if residual > tol:
            raise ConvergenceError("Lanczos residual above tolerance", residual, it)
    elif method == "power":
        sigma = _shift_bound(ctx)
        Sy = S(y)
        residual = np.inf
        for it in range(1, max_iter + 1):
            lam = float(y @ Sy)
            residual = float(np.linalg.norm(Sy - lam * y))
            if residual <= tol:
                break
            y = Sy + sigma * y
            y /= np.linalg.norm(y)
            Sy = S(y)
        else:
            raise ConvergenceError(
                f"power iteration did not converge in {max_iter} steps (residual {residual:.3g})",
                residual,
                max_iter,
            )
    else:
        raise ValueError(f"unknown method {method!r}")

    x = y / s
    if x[np.argmax(np.abs(x))] < 0:
        x = -x
    return EigenResult(lam, x, it, residual)
