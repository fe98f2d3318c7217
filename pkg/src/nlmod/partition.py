"""From relaxed vectors to communities.

Optimal thresholding of a vector, the leading-module procedure (linear or
nonlinear relaxation, multi-start), successive bipartition on subgraph
contexts, Kernighan-Lin style refinement and diffusion starting points.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .graph import WeightedGraph, subgraph, wbincount
from .modularity import (
    ModularityContext,
    _labels_from,
    _shift_bound,
    as_context,
    as_mask,
    community_modularities,
    leading_eigenpair,
    set_modularity,
)
from .nonlinear import project_center
from .ratiodca import DCAOptions, maximize_r_perp, maximize_r_star

__all__ = [
    "Partition",
    "Start",
    "MethodSpec",
    "ThresholdCut",
    "StartRecord",
    "LeadingModuleReport",
    "DendrogramNode",
    "default_starts",
    "optimal_threshold",
    "leading_module",
    "successive_bipartition",
    "kl_refine",
    "diffusion_start",
]

RELAXATIONS = ("linear", "nonlinear_q", "nonlinear_qmu")
CRITERIA = ("q", "q_mu")


@dataclass(frozen=True, eq=False)
class Partition:
    """Community id per vertex, ids ``0..k-1`` numbered by first appearance."""

    labels: np.ndarray
    q_values: Optional[np.ndarray] = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        rank = np.empty(first.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(first.size)
        object.__setattr__(self, "labels", rank[inv.ravel()])

    @classmethod
    def from_labels(cls, labels, ctx=None) -> "Partition":
        P = cls(labels)
        return P.with_values(ctx) if ctx is not None else P

    @classmethod
    def from_sets(cls, sets, n, ctx=None) -> "Partition":
        return cls.from_labels(_labels_from(list(sets), n), ctx)

    @classmethod
    def bipartition(cls, A, n, ctx=None) -> "Partition":
        mask = as_mask(A, n)
        return cls.from_labels(np.where(mask, 0, 1) if mask[0] else np.where(mask, 1, 0), ctx)

    def with_values(self, ctx) -> "Partition":
        return Partition(self.labels, community_modularities(ctx, self.labels))

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def k(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def communities(self) -> List[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        return np.split(order, np.cumsum(self.sizes)[:-1])

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self.labels, other.labels)

    def __repr__(self):
        return f"Partition(n={self.n}, k={self.k}, sizes={self.sizes.tolist()})"


@dataclass(frozen=True)
class Start:
    kind: str  # "eigenvector" | "random" | "diffusion"
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("eigenvector", "random", "diffusion"):
            raise ValueError(f"unknown start kind {self.kind!r}")
        if self.kind != "eigenvector" and self.seed is None:
            raise ValueError(f"{self.kind} start needs a seed")

    def label(self) -> str:
        return self.kind if self.seed is None else f"{self.kind}({self.seed})"


def default_starts(n_random=30, n_diffusion=30, eigenvector=True, seed=0) -> List[Start]:
    """Eigenvector first, then random and diffusion starts with seeds drawn from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(n_random + n_diffusion, dtype=np.uint32)
    starts = [Start("eigenvector")] if eigenvector else []
    starts += [Start("random", int(s)) for s in seeds[:n_random]]
    starts += [Start("diffusion", int(s)) for s in seeds[n_random:]]
    return starts


@dataclass
class MethodSpec:
    relaxation: str = "nonlinear_q"
    starts: List[Start] = field(default_factory=default_starts)
    criterion: Optional[str] = None
    dca: DCAOptions = field(default_factory=DCAOptions)
    eig_tol: float = 1e-8
    eigensolver: str = "power"
    threads: int = 1

    def __post_init__(self):
        if self.relaxation not in RELAXATIONS:
            raise ValueError(f"relaxation must be one of {RELAXATIONS}")
        if self.criterion is None:
            self.criterion = "q_mu" if self.relaxation == "nonlinear_qmu" else "q"
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if not self.starts:
            raise ValueError("at least one start is required")
        if self.eig_tol <= 0 or self.dca.rel_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


# ---------------------------------------------------------------------------
# thresholding


@dataclass(frozen=True, eq=False)
class ThresholdCut:
    A: np.ndarray  # sorted local vertex ids
    value: float
    threshold: Optional[float] = None
    trivial: bool = False

    def __iter__(self):
        yield self.A
        yield self.value


def optimal_threshold(ctx, x, criterion="q") -> ThresholdCut:
    """Best upper level set ``{i : x_i >= t}`` under ``q`` or ``q_mu``.

    All distinct thresholds are swept with prefix sums, so the cost is one
    sort plus O(|E|).  Ties go to the smaller set.  Under ``q`` the empty
    set (value 0) is also a candidate, so a vector whose level sets all have
    negative modularity yields the trivial cut; under ``q_mu`` only proper
    subsets qualify.
    """
    ctx = as_context(ctx)
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")
    x = np.asarray(x, dtype=float)
    n = ctx.n
    if x.shape != (n,):
        raise ValueError(f"vector length {x.shape} does not match {n} vertices")
    empty = np.zeros(0, dtype=np.int64)
    if n < 2 or np.all(x == x[0]):
        return ThresholdCut(empty, 0.0, None, True)

    order = np.argsort(-x, kind="stable")
    xs = x[order]
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)
    # prefix k = first k vertices in decreasing order; valid where xs[k-1] > xs[k]
    ks = np.nonzero(xs[:-1] > xs[1:])[0] + 1
    G = ctx.graph
    enter = np.maximum(rank[G.src], rank[G.dst])
    w_in = np.concatenate(([0.0], np.cumsum(wbincount(enter, G.weight, n))))
    D = np.concatenate(([0.0], np.cumsum(ctx.null_degrees[order])))
    dloc = np.concatenate(([0.0], np.cumsum(G.degrees[order])))
    mu = np.concatenate(([0.0], np.cumsum(ctx.mu[order])))
    Dk, muk = D[ks], mu[ks]
    Q = Dk * (ctx.null_total - Dk) / ctx.volume - (dloc[ks] - 2.0 * w_in[ks])
    if criterion == "q":
        vals = 2.0 * Q / ctx.mu_total
    else:
        vals = ctx.mu_total * Q / (muk * (ctx.mu_total - muk))

    best = float(vals.max())
    if criterion == "q" and best <= 0.0:
        return ThresholdCut(empty, 0.0, None, True)
    k = int(ks[np.nonzero(vals == best)[0][0]])  # ks ascending: smallest set first
    return ThresholdCut(np.sort(order[:k]), best, float(xs[k - 1]), False)


def _criterion_value(ctx, A, criterion) -> float:
    mask = as_mask(A, ctx.n)
    if criterion == "q":
        return 2.0 * set_modularity(ctx, mask) / ctx.mu_total
    mu_A = float(ctx.mu[mask].sum())
    return ctx.mu_total * set_modularity(ctx, mask) / (mu_A * (ctx.mu_total - mu_A))


# ---------------------------------------------------------------------------
# diffusion starts


def diffusion_start(G: WeightedGraph, A, xbar, seed):
    """Diffuse ``e_i - e_j`` over ``G(A)``: solve ``(I + L) z = e_i - e_j``.

    ``i`` and ``j`` are drawn uniformly from the positive and nonpositive
    parts of ``xbar`` (indexed like ``A``).  Returns ``(z, fallback)``;
    when one side is empty a standard normal vector is returned with
    ``fallback = True``.
    """
    A = np.asarray(A, dtype=np.int64)
    xbar = np.asarray(xbar, dtype=float)
    if xbar.shape != A.shape:
        raise ValueError("xbar must have one entry per vertex of A")
    rng = np.random.default_rng(seed)
    C = np.nonzero(xbar > 0)[0]
    Cbar = np.nonzero(xbar <= 0)[0]
    if C.size == 0 or Cbar.size == 0:
        return rng.standard_normal(A.size), True
    i, j = int(rng.choice(C)), int(rng.choice(Cbar))
    z = np.zeros(A.size)
    z[i], z[j] = 1.0, -1.0
    H = G if A.size == G.n and np.array_equal(A, np.arange(G.n)) else subgraph(G, A)[0]
    if H.n_edges == 0:
        return z, False
    op = sp.identity(H.n, format="csr") + H.laplacian()
    zt, info = cg(op, z, rtol=1e-8, atol=0.0, maxiter=10 * H.n + 100)
    if info != 0:
        raise RuntimeError(f"conjugate gradients did not converge (info={info})")
    return zt, False


# ---------------------------------------------------------------------------
# leading module


@dataclass
class StartRecord:
    index: int
    start: Start
    lam: Optional[float] = None
    lambdas: list = field(default_factory=list)
    status: str = ""
    value: Optional[float] = None
    A: Optional[np.ndarray] = None
    from_start_vector: bool = False
    fallback: bool = False
    error: Optional[str] = None
    seconds: float = 0.0


@dataclass
class LeadingModuleReport:
    relaxation: str
    criterion: str
    indivisible: bool
    linear_lambda: float
    value: float
    best_start: Optional[int]
    starts: List[StartRecord]
    timings: dict


class AllStartsFailed(RuntimeError):
    def __init__(self, msg, report=None):
        super().__init__(msg)
        self.report = report


def _start_vector(ctx, start: Start, eig_vec, relaxation):
    if start.kind == "eigenvector":
        return eig_vec.copy(), False
    if start.kind == "random":
        x = np.random.default_rng(start.seed).standard_normal(ctx.n)
        fallback = False
    else:
        x, fallback = diffusion_start(ctx.graph, np.arange(ctx.n), eig_vec, start.seed)
    if relaxation == "nonlinear_qmu":
        x = project_center(ctx, x)
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("degenerate start vector")
    return x / nrm, fallback


def _run_start(ctx, spec: MethodSpec, index, start, eig_vec) -> StartRecord:
    rec = StartRecord(index, start)
    t0 = time.perf_counter()
    try:
        x0, rec.fallback = _start_vector(ctx, start, eig_vec, spec.relaxation)
        solver = maximize_r_star if spec.relaxation == "nonlinear_q" else maximize_r_perp
        lam, x, trace = solver(ctx, x0, spec.dca)
        rec.lam, rec.lambdas, rec.status = lam, trace.lambdas, trace.status
        # the ascent starts at x0, so keep its cut when it thresholds better
        cut = optimal_threshold(ctx, x, spec.criterion)
        cut0 = optimal_threshold(ctx, x0, spec.criterion)
        if cut0.value > cut.value or (cut0.value == cut.value and cut0.A.size < cut.A.size):
            cut, rec.from_start_vector = cut0, True
        rec.value, rec.A = cut.value, cut.A
    except Exception as exc:  # noqa: BLE001 - failures are reported per start
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.seconds = time.perf_counter() - t0
    return rec


def leading_module(ctx, spec: MethodSpec = None):
    """Best bipartition of the active vertices by one relaxation.

    Returns ``(Partition, LeadingModuleReport)``; the partition has a single
    community when no split with positive criterion value is found (or the
    leading eigenvalue of the modularity operator is not positive).
    """
    ctx = as_context(ctx)
    spec = spec or MethodSpec()
    timings = {}
    t0 = time.perf_counter()
    eig = leading_eigenpair(ctx, tol=spec.eig_tol, method=spec.eigensolver)
    timings["eigen"] = time.perf_counter() - t0
    trivial = Partition(np.zeros(ctx.n, dtype=np.int64))

    if ctx.n < 2 or eig.lam <= 1e-9 * max(_shift_bound(ctx), 1e-300):
        rep = LeadingModuleReport(spec.relaxation, spec.criterion, True, eig.lam, 0.0, None, [],
                                  timings)
        return trivial, rep

    t1 = time.perf_counter()
    if spec.relaxation == "linear":
        rec = StartRecord(0, Start("eigenvector"), eig.lam, [eig.lam], "eigen")
        cut = optimal_threshold(ctx, eig.vector, spec.criterion)
        rec.value, rec.A = cut.value, cut.A
        records = [rec]
    else:
        jobs = list(enumerate(spec.starts))
        if spec.threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=spec.threads) as pool:
                records = list(pool.map(lambda j: _run_start(ctx, spec, j[0], j[1], eig.vector),
                                        jobs))
        else:
            records = [_run_start(ctx, spec, i, s, eig.vector) for i, s in jobs]
    timings["starts"] = time.perf_counter() - t1

    ok = [r for r in records if r.error is None]
    if not ok:
        rep = LeadingModuleReport(spec.relaxation, spec.criterion, False, eig.lam, 0.0, None,
                                  records, timings)
        raise AllStartsFailed("every start failed: " + records[0].error, rep)
    best = ok[0]
    for r in ok[1:]:
        if r.value > best.value:
            best = r
    indivisible = best.A.size == 0 or best.value <= 0
    rep = LeadingModuleReport(spec.relaxation, spec.criterion, indivisible, eig.lam,
                              0.0 if indivisible else best.value, best.index, records, timings)
    if indivisible:
        return trivial, rep
    return Partition.bipartition(best.A, ctx.n), rep


# ---------------------------------------------------------------------------
# successive bipartition


@dataclass
class DendrogramNode:
    id: int
    parent: Optional[int]
    members: np.ndarray  # root vertex ids
    depth: int
    children: list = field(default_factory=list)
    gain: Optional[float] = None  # increase of sum_i Q(A_i) from splitting this node
    status: str = "leaf"
    report: Optional[LeadingModuleReport] = None


@dataclass
class Hierarchy:
    partition: Partition
    q: float
    nodes: List[DendrogramNode]

    def leaves(self) -> List[DendrogramNode]:
        return [nd for nd in self.nodes if not nd.children]


def _split_node(root_ctx, node, spec):
    sub = root_ctx.restrict(node.members)
    try:
        P, rep = leading_module(sub, spec)
    except Exception as exc:  # noqa: BLE001 - a failed branch stays unsplit
        return None, None, f"failed: {type(exc).__name__}: {exc}"
    if P.k < 2:
        return None, rep, "indivisible"
    S = P.labels == 0
    gain = 2.0 * set_modularity(sub, S)
    if gain <= 1e-12 * root_ctx.volume:
        return None, rep, "no_gain"
    return (node.members[S], node.members[~S], gain), rep, "split"


def successive_bipartition(G, spec: MethodSpec = None, max_communities=None, min_size=2,
                           kl=False, kl_rounds=100) -> Hierarchy:
    """Split communities recursively with :func:`leading_module` on subgraph contexts.

    Branches at the same depth are split concurrently (``spec.threads``) and
    their results are applied in a fixed order, so the output does not
    depend on the thread count.  ``kl`` runs :func:`kl_refine` on the final
    flat partition.
    """
    ctx = as_context(G)
    spec = spec or MethodSpec()
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    if max_communities is not None and max_communities < 1:
        raise ValueError("max_communities must be >= 1")
    nodes = [DendrogramNode(0, None, np.arange(ctx.n), 0)]
    frontier = [0]
    n_leaves = 1
    while frontier:
        todo, nxt = [], []
        for nid in frontier:
            nd = nodes[nid]
            if nd.members.size < max(min_size, 2):
                nd.status = "too_small"
            else:
                todo.append(nd)
        if not todo:
            break
        if max_communities is not None and n_leaves >= max_communities:
            for nd in todo:
                nd.status = "limit"
            break
        if spec.threads > 1 and len(todo) > 1:
            inner = MethodSpec(spec.relaxation, spec.starts, spec.criterion, spec.dca,
                               spec.eig_tol, spec.eigensolver, 1)
            with ThreadPoolExecutor(max_workers=spec.threads) as pool:
                results = list(pool.map(lambda nd: _split_node(ctx, nd, inner), todo))
        else:
            results = [_split_node(ctx, nd, spec) for nd in todo]
        for nd, (split, rep, status) in zip(todo, results):
            nd.report = rep
            if split is None:
                nd.status = status
                continue
            if max_communities is not None and n_leaves >= max_communities:
                nd.status = "limit"
                continue
            left, right, gain = split
            nd.status, nd.gain = "split", gain
            for members in (left, right):
                child = DendrogramNode(len(nodes), nd.id, members, nd.depth + 1)
                nodes.append(child)
                nd.children.append(child.id)
                nxt.append(child.id)
            n_leaves += 1
        frontier = nxt

    labels = np.empty(ctx.n, dtype=np.int64)
    for c, nd in enumerate(nd for nd in nodes if not nd.children):
        labels[nd.members] = c
    P = Partition.from_labels(labels, ctx)
    if kl:
        P = kl_refine(ctx, P, kl_rounds)
    return Hierarchy(P, float(P.q_values.sum()) / ctx.mu_total, nodes)


# ---------------------------------------------------------------------------
# Kernighan-Lin refinement


def kl_refine(ctx, P, max_rounds=100, tol=1e-12) -> Partition:
    """Single-vertex move passes; returns a partition with modularity never lower.

    In a pass every vertex moves at most once: the unmoved vertex and target
    community with the largest gain (possibly negative) are chosen each step,
    ties going to the lowest vertex id and then the lowest community id.
    Only nonempty communities are targets.  The best prefix of the pass is
    kept if its total gain exceeds ``tol * vol``; communities emptied on the
    way are dropped.
    """
    ctx = as_context(ctx)
    labels = _labels_from(P, ctx.n).copy()
    _, labels = np.unique(labels, return_inverse=True)
    labels = labels.ravel()
    n = ctx.n
    k = int(labels.max()) + 1 if n else 0
    if k < 2 and n < 2:
        return Partition.from_labels(labels, ctx)
    G = ctx.graph
    adj = G.adjacency()
    d = ctx.null_degrees
    vol = ctx.volume
    indptr, indices, wts = adj.indptr, adj.indices, adj.data
    rows = np.arange(n)

    for _ in range(max_rounds):
        start = labels.copy()
        # neighbour weight of each vertex into each community
        Kw = np.zeros((n, k))
        np.add.at(Kw, (np.repeat(rows, np.diff(indptr)), labels[indices]), wts)
        Dc = wbincount(labels, d, k)
        size = np.bincount(labels, minlength=k)
        moved = np.zeros(n, dtype=bool)
        gains, moves = [], []
        for _step in range(n):
            own = Kw[rows, labels]
            Da = Dc[labels]
            # gain of moving v from a to b: 2(k_vb - k_va) + 2 d_v (D_a - d_v - D_b) / vol
            gain = 2.0 * (Kw - own[:, None]) + 2.0 * d[:, None] * (
                (Da - d)[:, None] - Dc[None, :]) / vol
            gain[rows, labels] = -np.inf
            gain[:, size == 0] = -np.inf
            gain[moved] = -np.inf
            flat = int(np.argmax(gain))
            best = gain.flat[flat]
            if not np.isfinite(best):
                break
            v, b = divmod(flat, k)
            a = labels[v]
            lo, hi = indptr[v], indptr[v + 1]
            nb, w = indices[lo:hi], wts[lo:hi]
            np.subtract.at(Kw[:, a], nb, w)
            np.add.at(Kw[:, b], nb, w)
            Dc[a] -= d[v]
            Dc[b] += d[v]
            size[a] -= 1
            size[b] += 1
            labels[v] = b
            moved[v] = True
            gains.append(best)
            moves.append(v)
        if not gains:
            labels = start
            break
        cum = np.cumsum(gains)
        t = int(np.argmax(cum))
        if cum[t] <= tol * vol:
            labels = start
            break
        # keep moves 0..t
        keep = labels.copy()
        labels = start
        for v in moves[: t + 1]:
            labels[v] = keep[v]
    _, labels = np.unique(labels, return_inverse=True)
    return Partition.from_labels(labels.ravel(), ctx)
