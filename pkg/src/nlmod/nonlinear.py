"""Total variations, the Lovasz extension of modularity, Rayleigh quotients, subgradients.

Conventions (both-orders sums throughout)::

    tv_graph(x) = sum_{i,j} w_ij |x_i - x_j|
    tv_null(x)  = sum_{i,j} (d_i d_j / vol) |x_i - x_j|
    f_Q(x)      = (tv_null(x) - tv_graph(x)) / 2

so ``f_Q(1_A) = Q(A)``.  ``delta0_select`` returns ``y`` with
``<x, y>_mu = tv_null(x) / 2``: ``D_mu y`` is a Euclidean subgradient of
``tv_null / 2``.  On a subgraph context ``w`` is the induced weight, while
``d`` and ``vol`` are the parent degrees and volume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import wbincount
from .modularity import as_context

__all__ = [
    "TVPair",
    "SubgradientChoice",
    "tv_graph",
    "tv_null",
    "tv_pair",
    "lovasz_modularity",
    "rayleigh_r",
    "rayleigh_r_star",
    "rayleigh_r_centered",
    "phi_select",
    "psi_select",
    "delta0_select",
    "tv_graph_subgradient",
    "project_center",
]


@dataclass(frozen=True)
class TVPair:
    tv_graph: float
    tv_null: float


@dataclass(frozen=True, eq=False)
class SubgradientChoice:
    vector: np.ndarray
    kind: str
    degenerate: bool = False


def _vec(ctx, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (ctx.n,):
        raise ValueError(f"vector length {x.shape} does not match {ctx.n} vertices")
    return x


def tv_graph(ctx, x) -> float:
    ctx = as_context(ctx)
    x = _vec(ctx, x)
    G = ctx.graph
    return 2.0 * float(G.weight @ np.abs(x[G.src] - x[G.dst]))


def tv_null(ctx, x) -> float:
    """Null-model total variation in O(n log n) via sorted prefix sums."""
    ctx = as_context(ctx)
    x = _vec(ctx, x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    ds = ctx.null_degrees[order]
    pre_d = np.cumsum(ds) - ds
    pre_dx = np.cumsum(ds * xs) - ds * xs
    return 2.0 * float(ds @ (xs * pre_d - pre_dx)) / ctx.volume


def tv_pair(ctx, x) -> TVPair:
    return TVPair(tv_graph(ctx, x), tv_null(ctx, x))


def lovasz_modularity(ctx, x) -> float:
    """``f_Q(x) = <x, M(x)>_mu``, the Lovasz extension of the modularity set function."""
    tv = tv_pair(ctx, x)
    return 0.5 * (tv.tv_null - tv.tv_graph)


def _nonzero(x):
    if not np.any(x):
        raise ValueError("quotient undefined at x = 0")


def rayleigh_r(ctx, x) -> float:
    """``f_Q(x) / |x|_{1,mu}``."""
    ctx = as_context(ctx)
    x = _vec(ctx, x)
    _nonzero(x)
    return lovasz_modularity(ctx, x) / float(ctx.mu @ np.abs(x))


def rayleigh_r_star(ctx, x) -> float:
    """``f_Q(x) / |x|_inf``."""
    ctx = as_context(ctx)
    x = _vec(ctx, x)
    _nonzero(x)
    return lovasz_modularity(ctx, x) / float(np.abs(x).max())


def rayleigh_r_centered(ctx, x) -> float:
    """``f_Q(x) / |P x|_{1,mu}``; equals ``rayleigh_r(P x)``."""
    ctx = as_context(ctx)
    px = project_center(ctx, x)
    _nonzero(px)
    return lovasz_modularity(ctx, x) / float(ctx.mu @ np.abs(px))


def phi_select(x) -> SubgradientChoice:
    """Element of the 1-norm subdifferential; 0 on zero entries."""
    return SubgradientChoice(np.sign(np.asarray(x, dtype=float)), "phi")


def psi_select(x) -> SubgradientChoice:
    """Element of the inf-norm subdifferential: ``sign(x_m) e_m``, lowest peak index ``m``."""
    x = np.asarray(x, dtype=float)
    _nonzero(x)
    m = int(np.argmax(np.abs(x)))
    y = np.zeros_like(x)
    y[m] = np.sign(x[m])
    return SubgradientChoice(y, "psi")


def delta0_select(ctx, x) -> SubgradientChoice:
    """``y_i = (1/mu_i) sum_j (d_i d_j / vol) sign(x_i - x_j)``, mu-orthogonal to constants."""
    ctx = as_context(ctx)
    x = _vec(ctx, x)
    d = ctx.null_degrees
    if x.size == 0 or np.all(x == x[0]):
        return SubgradientChoice(np.zeros_like(x), "delta0", degenerate=True)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    cum = np.concatenate(([0.0], np.cumsum(d[order])))
    below = cum[np.searchsorted(xs, x, side="left")]
    above = cum[-1] - cum[np.searchsorted(xs, x, side="right")]
    return SubgradientChoice(d * (below - above) / (ctx.mu * ctx.volume), "delta0")


def tv_graph_subgradient(ctx, x) -> np.ndarray:
    """Euclidean subgradient of ``tv_graph / 2``: ``sum_j w_ij sign(x_i - x_j)``."""
    ctx = as_context(ctx)
    x = _vec(ctx, x)
    G = ctx.graph
    s = G.weight * np.sign(x[G.src] - x[G.dst])
    return wbincount(G.src, s, ctx.n) - wbincount(
        G.dst, s, ctx.n
    )


def project_center(ctx, x) -> np.ndarray:
    """mu-orthogonal projection onto ``{x : <x, 1>_mu = 0}``."""
    ctx = as_context(ctx)
    x = _vec(ctx, x)
    return x - (ctx.mu @ x) / ctx.mu_total
