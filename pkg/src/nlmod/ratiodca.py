"""Generalized RatioDCA and its two modularity instantiations.

``ratio_dca`` minimizes ``r = (f1 - f2) / (g1 - g2)`` for convex, positively
one-homogeneous ``f1, f2, g1, g2`` with ``g1 - g2 >= 0``.  Each step solves a
convex problem over the Euclidean unit ball; both branches reduce to

    minimize_{|xi|_2 <= 1}   f1(xi) + beta * b(xi) - <xi, c>          (*)

with ``(b, beta, c) = (g2, lam, F2 + lam G1)`` when ``lam >= 0`` and
``(g1, -lam, F2 - lam G2)`` when ``lam < 0``; the latter is the original
subproblem multiplied by ``|lam|``, which leaves the minimizer and the sign
of the optimal value unchanged.  The previous iterate always has value 0, so
any point with a negative value strictly decreases ``r``.

For modularity, ``f1 = tv_graph / 2`` and ``f2 = tv_null / 2``; ``b`` is
zero, the inf-norm or the centred weighted 1-norm, and (*) is solved with
PDHG (:func:`solve_inner_pdhg`).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .graph import wbincount
from .modularity import as_context
from .nonlinear import (
    delta0_select,
    lovasz_modularity,
    phi_select,
    project_center,
    psi_select,
    tv_graph,
    tv_graph_subgradient,
)

__all__ = [
    "OneHomogeneous",
    "RatioProblem",
    "NonlinearState",
    "DCATrace",
    "InnerProblem",
    "InnerResult",
    "InnerSolverError",
    "DCAOptions",
    "ratio_dca",
    "solve_inner_pdhg",
    "solve_inner_subgradient",
    "modularity_r_star_problem",
    "modularity_r_perp_problem",
    "maximize_r_star",
    "maximize_r_perp",
]


class InnerSolverError(RuntimeError):
    def __init__(self, msg, trace=None):
        super().__init__(msg)
        self.trace = trace


@dataclass(frozen=True)
class OneHomogeneous:
    """Convex one-homogeneous functional: value and a Euclidean subgradient selection."""

    value: Callable[[np.ndarray], float]
    subgradient: Callable[[np.ndarray], np.ndarray]


ZERO = OneHomogeneous(lambda x: 0.0, lambda x: np.zeros_like(x))


@dataclass
class RatioProblem:
    """``(f1 - f2) / (g1 - g2)`` together with a solver for the subproblem (*).

    ``inner(branch, beta, c, x_k, tol)`` returns ``(xi, value)``; when it is
    omitted, projected subgradient descent is used (fine for small ``n``).
    ``post`` maps each new point before normalization (e.g. centring).
    """

    n: int
    f1: OneHomogeneous
    f2: OneHomogeneous
    g1: OneHomogeneous
    g2: OneHomogeneous = ZERO
    inner: Optional[Callable] = None
    post: Optional[Callable] = None
    check_homogeneity: bool = True

    def __post_init__(self):
        if self.check_homogeneity:
            rng = np.random.default_rng(0)
            for _ in range(3):
                x = rng.standard_normal(self.n)
                c = float(rng.uniform(0.5, 3.0))
                for name in ("f1", "f2", "g1", "g2"):
                    f = getattr(self, name)
                    a, b = f.value(c * x), c * f.value(x)
                    if not np.isclose(a, b, rtol=1e-8, atol=1e-10):
                        raise ValueError(f"{name} is not positively one-homogeneous")

    def numerator(self, x) -> float:
        return self.f1.value(x) - self.f2.value(x)

    def denominator(self, x) -> float:
        return self.g1.value(x) - self.g2.value(x)

    def ratio(self, x) -> float:
        den = self.denominator(x)
        if den <= 0:
            raise ValueError("denominator g1 - g2 vanishes at this point")
        return self.numerator(x) / den


@dataclass
class NonlinearState:
    x: np.ndarray
    lam: float
    iteration: int
    inner_value: float = 0.0
    inner_converged: bool = True


@dataclass
class DCATrace:
    lambdas: list = field(default_factory=list)
    inner_values: list = field(default_factory=list)
    inner_iterations: list = field(default_factory=list)
    status: str = "running"

    @property
    def iterations(self) -> int:
        return len(self.lambdas) - 1

    def negated(self) -> "DCATrace":
        return DCATrace([-v for v in self.lambdas], list(self.inner_values),
                        list(self.inner_iterations), self.status)


def ratio_dca(problem: RatioProblem, x0, rel_tol=1e-6, max_outer=100, inner_tol=None,
              callback=None):
    """Minimize ``problem.ratio`` from ``x0``; returns ``(lam, x, trace)``.

    The sequence of values is strictly decreasing until the loop stops.  It
    stops when the subproblem finds no descent (a nonlinear eigenpair), when
    the relative change drops below ``rel_tol``, or after ``max_outer`` steps.
    ``inner_tol`` maps the current value to the subproblem tolerance;
    ``callback`` receives a :class:`NonlinearState` after every accepted step.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    x = np.asarray(x0, dtype=float)
    if problem.post is not None:
        x = problem.post(x)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("starting point must be nonzero")
    x = x / nrm
    lam = problem.ratio(x)
    trace = DCATrace([lam])
    inner = problem.inner or _default_inner(problem)
    tol_of = inner_tol or (lambda lam: max(1e-8, 0.1 * abs(lam) * rel_tol))

    for _ in range(max_outer):
        F2 = problem.f2.subgradient(x)
        if lam >= 0:
            branch, beta = "nonneg", lam
            c = F2 + lam * problem.g1.subgradient(x)
        else:
            branch, beta = "neg", -lam
            c = F2 + beta * problem.g2.subgradient(x)
        try:
            out = inner(branch, beta, c, x, tol_of(lam))
        except Exception as exc:  # noqa: BLE001 - reraised with the partial trace
            trace.status = "failed"
            raise InnerSolverError(f"inner solver failed: {exc}", trace) from exc
        xi, value = out[0], float(out[1])
        iters = out[2] if len(out) > 2 else None
        if not (np.all(np.isfinite(xi)) and np.isfinite(value)):
            trace.status = "failed"
            raise InnerSolverError("inner solver returned non-finite values", trace)
        if value >= 0:
            trace.status = "stationary"
            break
        y = problem.post(xi) if problem.post is not None else xi
        nrm = np.linalg.norm(y)
        if nrm == 0 or problem.denominator(y) <= 0:
            trace.status = "stationary"
            break
        x_new = y / nrm
        lam_new = problem.ratio(x_new)
        if not lam_new < lam:
            # descent certified by the subproblem but lost to rounding
            trace.status = "stalled"
            break
        done = abs(lam_new - lam) < rel_tol * abs(lam) if lam != 0 else abs(lam_new) < rel_tol
        x, lam = x_new, lam_new
        trace.lambdas.append(lam)
        trace.inner_values.append(value)
        trace.inner_iterations.append(iters)
        if callback is not None:
            callback(NonlinearState(x, lam, trace.iterations, value, True))
        if done:
            trace.status = "converged"
            break
    else:
        trace.status = "max_outer"
    return lam, x, trace


# ---------------------------------------------------------------------------
# generic inner solver


def _project_ball(x):
    nrm = np.linalg.norm(x)
    return x / nrm if nrm > 1.0 else x


def solve_inner_subgradient(objective, subgradient, x0, max_iter=10_000, step0=0.5):
    """Projected subgradient descent on the unit ball with step ``step0 / sqrt(k)``.

    Returns the best point seen and its objective value.
    """
    x = _project_ball(np.asarray(x0, dtype=float))
    best_x, best = x.copy(), objective(x)
    for k in range(1, max_iter + 1):
        g = subgradient(x)
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        x = _project_ball(x - (step0 / np.sqrt(k)) * g / gn)
        val = objective(x)
        if val < best:
            best, best_x = val, x.copy()
    return best_x, best


def _default_inner(problem: RatioProblem):
    def inner(branch, beta, c, x, tol):
        b = problem.g2 if branch == "nonneg" else problem.g1

        def obj(xi):
            return problem.f1.value(xi) + beta * b.value(xi) - float(c @ xi)

        def sub(xi):
            return problem.f1.subgradient(xi) + beta * b.subgradient(xi) - c

        return solve_inner_subgradient(obj, sub, x, max_iter=2000)

    return inner


# ---------------------------------------------------------------------------
# PDHG for the modularity subproblem


@dataclass
class InnerProblem:
    """Subproblem (*) with ``f1 = sum_e w_e |xi_i - xi_j|`` (= tv_graph / 2).

    ``balance`` selects ``b``: ``None`` (b = 0), ``"inf"`` (``|xi|_inf``) or
    ``"centered_l1"`` (``|P xi|_{1,mu}``).
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    c: np.ndarray
    beta: float = 0.0
    balance: Optional[str] = None
    mu: Optional[np.ndarray] = None
    branch: str = "nonneg"

    def __post_init__(self):
        if self.balance not in (None, "inf", "centered_l1"):
            raise ValueError(f"unknown balance term {self.balance!r}")
        if self.balance == "centered_l1" and self.mu is None:
            raise ValueError("centered_l1 balance needs the vertex measure")
        if self.beta < 0:
            raise ValueError("balance coefficient must be nonnegative")

    @classmethod
    def from_context(cls, ctx, c, beta=0.0, balance=None, branch="nonneg"):
        G = ctx.graph
        return cls(ctx.n, G.src, G.dst, G.weight, np.asarray(c, dtype=float), float(beta),
                   balance, ctx.mu, branch)

    def center(self, x):
        return x - (self.mu @ x) / self.mu.sum()

    def balance_value(self, x) -> float:
        if self.balance is None or self.beta == 0:
            return 0.0
        if self.balance == "inf":
            return float(np.abs(x).max())
        return float(self.mu @ np.abs(self.center(x)))

    def objective(self, x) -> float:
        tv = float(self.weight @ np.abs(x[self.src] - x[self.dst]))
        return tv + self.beta * self.balance_value(x) - float(self.c @ x)


@dataclass
class InnerResult:
    xi: np.ndarray
    objective: float
    gap: float
    iterations: int
    converged: bool
    dual: Optional[np.ndarray] = None

    def __iter__(self):
        yield self.xi
        yield self.objective


def _project_l1_ball(v, radius):
    """Euclidean projection onto ``{u : |u|_1 <= radius}``."""
    if radius <= 0:
        return np.zeros_like(v)
    a = np.abs(v)
    if a.sum() <= radius:
        return v
    s = np.sort(a)[::-1]
    css = np.cumsum(s)
    k = np.arange(1, s.size + 1)
    rho = np.nonzero(s * k > css - radius)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def solve_inner_pdhg(problem: InnerProblem, warm_start=None, tol=1e-8, max_iter=5000,
                     dual=None, rel_gap=None, check_every=10, gamma=None) -> InnerResult:
    """Primal-dual hybrid gradient for (*).

    The total variation is dualized edgewise (``K_e xi = sqrt(w_e)(xi_i - xi_j)``
    with ``|alpha_e| <= sqrt(w_e)``), the balance term over vertices (an
    l1-ball of radius ``beta`` for the inf-norm, the box
    ``[-beta mu_i, beta mu_i]`` composed with ``P`` for the centred 1-norm).
    The primal prox is the projection onto the unit ball.  Steps are
    ``tau = 0.95 / (gamma L)`` and ``sigma = 0.95 gamma / L`` with
    ``L^2 >= |K|^2`` and ``theta = 1``.  ``gamma = 1`` gives equal steps; the
    default ``max(1, (|c| + beta |K_b|) / L)`` matches the step sizes to the
    scale of the dual solution, which is large when ``beta`` or ``c`` is.

    Stops when the duality gap falls below ``tol``, or, if ``rel_gap`` is
    given, once the best value is negative and the gap is below
    ``rel_gap * |best|``.  Returns the best primal point seen, which is
    never worse than ``warm_start``.
    """
    n = problem.n
    c = problem.c
    s = np.sqrt(problem.weight)
    m = s.size
    x = _project_ball(np.zeros(n) if warm_start is None else np.asarray(warm_start, float).copy())
    best_x, best = x.copy(), problem.objective(x)

    has_bal = problem.balance is not None and problem.beta > 0
    if m == 0 and not has_bal:
        cn = np.linalg.norm(c)
        xi = c / cn if cn > 0 else x
        val = problem.objective(xi)
        if val < best:
            best_x, best = xi, val
        return InnerResult(best_x, best, 0.0, 0, True, dual)

    rows = np.arange(m)
    K = sp.csr_matrix(
        (np.concatenate([s, -s]), (np.concatenate([rows, rows]),
                                   np.concatenate([problem.src, problem.dst]))),
        shape=(m, n),
    )
    KT = K.T.tocsr()
    deg = wbincount(problem.src, problem.weight, n) + wbincount(
        problem.dst, problem.weight, n
    )
    L2 = 2.0 * float(deg.max()) if m else 0.0
    kb2 = 0.0
    if has_bal:
        if problem.balance == "inf":
            kb2 = 1.0
        else:
            mu = problem.mu
            mu_tot = float(mu.sum())
            kb2 = n * float(mu @ mu) / mu_tot**2
    L2 += kb2
    L = np.sqrt(L2)
    if gamma is None:
        gamma = max(1.0, (float(np.linalg.norm(c)) + problem.beta * np.sqrt(kb2)) / L)
    tau, sigma = 0.95 / (gamma * L), 0.95 * gamma / L

    alpha = np.zeros(m) if dual is None or dual.shape != (m,) else np.clip(dual, -s, s)
    u = np.zeros(n)
    xbar = x.copy()
    best_dual = -np.inf
    gap = np.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        alpha = np.clip(alpha + sigma * (K @ xbar), -s, s)
        KTy = KT @ alpha
        if has_bal:
            if problem.balance == "inf":
                u = _project_l1_ball(u + sigma * xbar, problem.beta)
                KTy = KTy + u
            else:
                bound = problem.beta * mu
                u = np.clip(u + sigma * (xbar - (mu @ xbar) / mu_tot), -bound, bound)
                KTy = KTy + u - mu * (u.sum() / mu_tot)
        g = KTy - c
        best_dual = max(best_dual, -float(np.linalg.norm(g)))
        x_new = _project_ball(x - tau * g)
        xbar = 2.0 * x_new - x
        x = x_new
        if it % check_every == 0 or it == max_iter:
            val = problem.objective(x)
            if val < best:
                best, best_x = val, x.copy()
            gap = best - best_dual
            if not np.isfinite(gap):
                raise FloatingPointError("PDHG produced non-finite values")
            if gap <= tol or (rel_gap is not None and best < 0 and gap <= rel_gap * -best):
                converged = gap <= tol
                break
    return InnerResult(best_x, best, gap, it, converged, alpha)


# ---------------------------------------------------------------------------
# modularity instantiations


@dataclass
class DCAOptions:
    rel_tol: float = 1e-6
    max_outer: int = 200
    inner_max_iter: int = 1000
    inner_rel_gap: Optional[float] = 0.5
    inner_tol: Optional[Callable] = None


def _tv_terms(ctx):
    f1 = OneHomogeneous(lambda x: 0.5 * tv_graph(ctx, x),
                        lambda x: tv_graph_subgradient(ctx, x))
    f2 = OneHomogeneous(lambda x: lovasz_modularity(ctx, x) + 0.5 * tv_graph(ctx, x),
                        lambda x: ctx.mu * delta0_select(ctx, x).vector)
    return f1, f2


def _pdhg_inner(ctx, balance, opts: DCAOptions):
    state = {"alpha": None}

    def inner(branch, beta, c, x, tol):
        bal = balance if branch == "neg" else None
        prob = InnerProblem.from_context(ctx, c, beta if bal else 0.0, bal, branch)
        res = solve_inner_pdhg(prob, x, tol, opts.inner_max_iter, state["alpha"],
                               opts.inner_rel_gap)
        state["alpha"] = res.dual
        return res.xi, res.objective, res.iterations

    return inner


def modularity_r_star_problem(ctx, opts: DCAOptions = None) -> RatioProblem:
    """``-r*`` as a ratio: ``f1 = tv_graph/2``, ``f2 = tv_null/2``, ``g1 = |x|_inf``, ``g2 = 0``."""
    ctx = as_context(ctx)
    opts = opts or DCAOptions()
    f1, f2 = _tv_terms(ctx)
    g1 = OneHomogeneous(lambda x: float(np.abs(x).max()), lambda x: psi_select(x).vector)
    return RatioProblem(ctx.n, f1, f2, g1, ZERO, inner=_pdhg_inner(ctx, "inf", opts),
                        check_homogeneity=False)


def modularity_r_perp_problem(ctx, opts: DCAOptions = None) -> RatioProblem:
    """``-r~`` as a ratio with ``g1 = |P x|_{1,mu}``; iterates are re-centred."""
    ctx = as_context(ctx)
    opts = opts or DCAOptions()
    f1, f2 = _tv_terms(ctx)

    def g1_sub(x):
        return ctx.mu * project_center(ctx, phi_select(project_center(ctx, x)).vector)

    g1 = OneHomogeneous(lambda x: float(ctx.mu @ np.abs(project_center(ctx, x))), g1_sub)
    return RatioProblem(ctx.n, f1, f2, g1, ZERO, inner=_pdhg_inner(ctx, "centered_l1", opts),
                        post=lambda x: project_center(ctx, x), check_homogeneity=False)


def _maximize(problem, x0, opts, callback):
    tol = opts.inner_tol or (lambda lam: max(1e-8, 0.1 * abs(lam) * opts.rel_tol))
    cb = None
    if callback is not None:
        def cb(state):
            callback(NonlinearState(state.x, -state.lam, state.iteration, state.inner_value))
    lam, x, trace = ratio_dca(problem, x0, opts.rel_tol, opts.max_outer, tol, cb)
    return -lam, x, trace.negated()


def maximize_r_star(ctx, x0, opts: DCAOptions = None, callback=None):
    """Ascend ``r*(x) = f_Q(x) / |x|_inf`` from ``x0``; returns ``(lam, x, trace)``."""
    ctx = as_context(ctx)
    opts = opts or DCAOptions()
    x0 = np.asarray(x0, dtype=float)
    if not np.any(x0):
        raise ValueError("starting point must be nonzero")
    return _maximize(modularity_r_star_problem(ctx, opts), x0, opts, callback)


def maximize_r_perp(ctx, x0, opts: DCAOptions = None, callback=None):
    """Ascend ``r(P x) = f_Q(x) / |P x|_{1,mu}`` over centred vectors from ``x0``."""
    ctx = as_context(ctx)
    opts = opts or DCAOptions()
    x0 = np.asarray(x0, dtype=float)
    if not np.any(np.abs(project_center(ctx, x0)) > 1e-14 * max(1.0, np.abs(x0).max())):
        raise ValueError("starting point is constant; its centred part vanishes")
    return _maximize(modularity_r_perp_problem(ctx, opts), project_center(ctx, x0), opts,
                     callback)
