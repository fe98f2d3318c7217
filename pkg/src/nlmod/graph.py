"""Weighted undirected graphs: storage, edge-list I/O, generators, subgraphs."""

from __future__ import annotations

import io
import re
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

__all__ = [
    "EdgeListError",
    "WeightedGraph",
    "IndexMap",
    "load_edge_list",
    "read_edge_list",
    "write_edge_list",
    "knn_graph",
    "planted_model",
    "chung_lu_sample",
    "subgraph",
]

MEASURE_MODES = ("degree", "uniform")

def wbincount(idx, weights, minlength=0) -> np.ndarray:
    """Weighted ``np.bincount`` that stays float when ``idx`` is empty."""
    return np.bincount(idx, weights=weights, minlength=minlength).astype(float, copy=False)


_HEADER_RE = re.compile(r"^[#%]\s*vertices:\s*(\d+)\s*,\s*ids:\s*([01])-based", re.I)


class EdgeListError(ValueError):
    """Malformed edge-list input."""


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected weighted graph on vertices ``0..n-1``.

    Edges are stored once, canonically with ``src < dst``.  ``measure`` is
    the vertex measure (degrees or all ones).  Isolated vertices are allowed
    here; a modularity context rejects graphs whose measure is not positive.
    """

    n: int
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    measure_mode: str = "degree"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        src = np.asarray(self.src, dtype=np.int64)
        dst = np.asarray(self.dst, dtype=np.int64)
        w = np.asarray(self.weight, dtype=float)
        if not (src.shape == dst.shape == w.shape) or src.ndim != 1:
            raise ValueError("src, dst and weight must be 1-d arrays of equal length")
        if self.n < 0:
            raise ValueError("vertex count must be nonnegative")
        if src.size:
            if np.any(src >= dst):
                raise ValueError("edges must be canonical (src < dst, no self-loops)")
            if src.min() < 0 or dst.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if not np.all(w > 0) or not np.all(np.isfinite(w)):
                raise ValueError("edge weights must be positive and finite")
            key = src * self.n + dst
            if np.unique(key).size != key.size:
                raise ValueError("duplicate edges")
        if self.measure_mode not in MEASURE_MODES:
            raise ValueError(f"measure_mode must be one of {MEASURE_MODES}")
        for arr in (src, dst, w):
            arr.setflags(write=False)
        object.__setattr__(self, "src", src)
        object.__setattr__(self, "dst", dst)
        object.__setattr__(self, "weight", w)
        deg = wbincount(src, w, self.n) + wbincount(
            dst, w, self.n
        )
        deg.setflags(write=False)
        object.__setattr__(self, "_degrees", deg)

    @classmethod
    def from_edges(cls, n, edges, measure_mode="degree", info=None):
        """Build from an iterable of ``(i, j)`` or ``(i, j, w)``; duplicates are summed."""
        rows = [tuple(e) for e in edges]
        i = np.array([r[0] for r in rows], dtype=np.int64)
        j = np.array([r[1] for r in rows], dtype=np.int64)
        w = np.array([r[2] if len(r) > 2 else 1.0 for r in rows], dtype=float)
        return cls._canonical(n, i, j, w, measure_mode, info or {})

    @classmethod
    def from_dense(cls, W, measure_mode="degree"):
        W = np.asarray(W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError("weight matrix must be square")
        if not np.allclose(W, W.T, rtol=0, atol=0):
            raise ValueError("weight matrix must be symmetric")
        i, j = np.nonzero(np.triu(W, 1))
        return cls(W.shape[0], i, j, W[i, j], measure_mode)

    @classmethod
    def _canonical(cls, n, i, j, w, measure_mode, info):
        if i.size and np.any(i == j):
            raise ValueError("self-loops are not allowed")
        lo, hi = np.minimum(i, j), np.maximum(i, j)
        if lo.size:
            key = lo * n + hi
            uniq, inv = np.unique(key, return_inverse=True)
            w = np.bincount(inv, weights=w)
            lo, hi = uniq // n, uniq % n
        return cls(n, lo, hi, w, measure_mode, info)

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def volume(self) -> float:
        return float(self._degrees.sum())

    @property
    def measure(self) -> np.ndarray:
        if self.measure_mode == "degree":
            return self._degrees
        return np.ones(self.n)

    @property
    def n_edges(self) -> int:
        return int(self.src.size)

    def with_measure(self, measure_mode):
        return WeightedGraph(self.n, self.src, self.dst, self.weight, measure_mode, dict(self.info))

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric sparse weight matrix (built on demand)."""
        W = sp.coo_matrix((self.weight, (self.src, self.dst)), shape=(self.n, self.n))
        return (W + W.T).tocsr()

    def dense(self) -> np.ndarray:
        W = np.zeros((self.n, self.n))
        W[self.src, self.dst] = self.weight
        W[self.dst, self.src] = self.weight
        return W

    def laplacian(self) -> sp.csr_matrix:
        """Unnormalized Laplacian ``D - W``."""
        return (sp.diags(self._degrees) - self.adjacency()).tocsr()

    def edge_list(self):
        return list(zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()))

    def __repr__(self):
        return f"WeightedGraph(n={self.n}, edges={self.n_edges}, measure={self.measure_mode!r})"


# ---------------------------------------------------------------------------
# edge-list text format


def load_edge_list(text, measure_mode="degree") -> WeightedGraph:
    """Parse an edge list: one ``u v`` or ``u v w`` per line.

    ``#`` and ``%`` lines are comments.  Ids are 0-based when the smallest id
    is 0 and 1-based otherwise, unless a ``# vertices: N, ids: B-based``
    header (as written by :func:`write_edge_list`) fixes both.  Duplicate
    lines, in either orientation, have their weights summed; self-loops are
    dropped with a warning.
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    us, vs, ws = [], [], []
    header_n = header_base = None
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line:
            continue
        if line[0] in "#%":
            m = _HEADER_RE.match(line)
            if m:
                header_n, header_base = int(m.group(1)), int(m.group(2))
            continue
        parts = line.split()
        if len(parts) not in (2, 3):
            raise EdgeListError(f"line {lineno}: expected 'u v' or 'u v w', got {line!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
            w = float(parts[2]) if len(parts) == 3 else 1.0
        except ValueError:
            raise EdgeListError(f"line {lineno}: cannot parse {line!r}") from None
        if u < 0 or v < 0:
            raise EdgeListError(f"line {lineno}: negative vertex id")
        if not np.isfinite(w) or w <= 0:
            raise EdgeListError(f"line {lineno}: edge weight must be positive, got {w}")
        us.append(u)
        vs.append(v)
        ws.append(w)

    u = np.array(us, dtype=np.int64)
    v = np.array(vs, dtype=np.int64)
    w = np.array(ws, dtype=float)
    if header_base is not None:
        base = header_base
    else:
        base = 0 if (u.size and min(u.min(), v.min()) == 0) else 1
    u -= base
    v -= base
    if u.size and min(u.min(), v.min()) < 0:
        raise EdgeListError("vertex id below the declared base")
    n = int(max(u.max(), v.max()) + 1) if u.size else 0
    if header_n is not None:
        if header_n < n:
            raise EdgeListError(f"header declares {header_n} vertices but ids reach {n}")
        n = header_n

    loops = u == v
    n_loops = int(loops.sum())
    if n_loops:
        warnings.warn(f"dropped {n_loops} self-loop(s)", stacklevel=2)
    keep = ~loops
    info = {"self_loops_dropped": n_loops, "id_base": base}
    return WeightedGraph._canonical(n, u[keep], v[keep], w[keep], measure_mode, info)


def read_edge_list(path, measure_mode="degree") -> WeightedGraph:
    with open(path) as fh:
        return load_edge_list(fh, measure_mode)


def write_edge_list(G: WeightedGraph, fh) -> None:
    """Write ``G`` in the edge-list format with a self-describing header (0-based ids)."""
    fh.write(f"# vertices: {G.n}, ids: 0-based\n")
    for i, j, w in zip(G.src.tolist(), G.dst.tolist(), G.weight.tolist()):
        fh.write(f"{i} {j} {w:.17g}\n")


# ---------------------------------------------------------------------------
# generators


def knn_graph(points, m: int, measure_mode="degree") -> WeightedGraph:
    """Symmetric m-nearest-neighbour similarity graph.

    ``i ~ j`` when either point is among the other's ``m`` nearest
    neighbours.  Weights are ``exp(-4 |X_i - X_j|^2 / min(nu_i, nu_j))``
    where ``nu_s`` is the smallest positive squared distance from ``s`` to a
    graph neighbour.  Coincident points get weight 1 (the zero-distance
    limit); their count is recorded in ``info["coincident_pairs"]``.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    X = X.reshape(X.shape[0], -1)
    if np.isnan(X).any():
        raise ValueError("points contain NaN")
    npts = X.shape[0]
    if not 0 < m < npts:
        raise ValueError("need 0 < m < number of points")

    tree = cKDTree(X)
    _, idx = tree.query(X, k=min(m + 1, npts))
    rows, cols = [], []
    for i in range(npts):
        nbrs = [j for j in idx[i].tolist() if j != i][:m]
        rows.extend([i] * len(nbrs))
        cols.extend(nbrs)
    rows = np.array(rows, dtype=np.int64)
    cols = np.array(cols, dtype=np.int64)
    lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
    key = np.unique(lo * npts + hi)
    lo, hi = key // npts, key % npts

    d2 = np.sum((X[lo] - X[hi]) ** 2, axis=1)
    pos = d2 > 0
    nu = np.full(npts, np.inf)
    np.minimum.at(nu, lo[pos], d2[pos])
    np.minimum.at(nu, hi[pos], d2[pos])
    w = np.ones_like(d2)
    scale = np.minimum(nu[lo[pos]], nu[hi[pos]])
    w[pos] = np.exp(-4.0 * d2[pos] / scale)
    info = {"coincident_pairs": int((~pos).sum()), "nu": nu}
    return WeightedGraph(npts, lo, hi, w, measure_mode, info)


def planted_model(
    sizes=(50, 100, 450),
    probs=(0.6, 0.4, 0.05),
    weights=(2.0, 1.0, 1.0),
    background_prob=0.05,
    seed=None,
    measure_mode="degree",
):
    """Block model with per-block density/weight and a uniform background.

    Pairs inside block ``b`` are joined with probability ``probs[b]`` and
    weight ``weights[b]``; every other pair with ``background_prob`` and
    weight 1.  The defaults are the unbalanced 50/100/450 benchmark.
    Returns ``(graph, blocks)`` with ``blocks`` a list of index arrays.
    """
    sizes = [int(s) for s in sizes]
    if len(probs) != len(sizes) or len(weights) != len(sizes):
        raise ValueError("probs and weights need one entry per block")
    n = sum(sizes)
    if n <= 0:
        raise ValueError("total size must be positive")
    for p in list(probs) + [background_prob]:
        if not 0.0 <= p <= 1.0:
            raise ValueError("probabilities must lie in [0, 1]")
    if any(w <= 0 for w in weights):
        raise ValueError("block weights must be positive")

    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(len(sizes)), sizes)
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    p = np.where(same, np.asarray(probs, dtype=float)[labels[iu]], background_prob)
    w = np.where(same, np.asarray(weights, dtype=float)[labels[iu]], 1.0)
    keep = rng.random(iu.size) < p
    G = WeightedGraph(n, iu[keep], ju[keep], w[keep], measure_mode, {"labels": labels})
    blocks = [np.flatnonzero(labels == b) for b in range(len(sizes))]
    return G, blocks


def chung_lu_sample(delta, seed=None, measure_mode="degree") -> WeightedGraph:
    """Bernoulli Chung-Lu graph: edge ``ij`` (i != j) with prob. ``delta_i delta_j / sum(delta)``.

    Self-loops are never generated, so ``E[d_i] = delta_i - delta_i**2 / sum(delta)``.
    """
    delta = np.asarray(delta, dtype=float)
    if delta.ndim != 1 or delta.size == 0 or np.any(delta <= 0):
        raise ValueError("delta must be a nonempty positive vector")
    n = delta.size
    total = delta.sum()
    iu, ju = np.triu_indices(n, k=1)
    p = delta[iu] * delta[ju] / total
    if p.size and p.max() > 1.0:
        k = int(np.argmax(p))
        raise ValueError(
            f"edge probability {p[k]:.6g} > 1 for pair ({iu[k]}, {ju[k]})"
        )
    rng = np.random.default_rng(seed)
    keep = rng.random(iu.size) < p
    return WeightedGraph(n, iu[keep], ju[keep], np.ones(int(keep.sum())), measure_mode)


# ---------------------------------------------------------------------------
# subgraphs


@dataclass(frozen=True, eq=False)
class IndexMap:
    """Bidirectional vertex map between an induced subgraph and its parent."""

    to_parent: np.ndarray
    parent_n: int
    parent_degrees: np.ndarray
    parent_volume: float
    parent_measure: np.ndarray

    @property
    def to_local(self) -> np.ndarray:
        """Parent id -> local id, ``-1`` for vertices outside the subgraph."""
        loc = np.full(self.parent_n, -1, dtype=np.int64)
        loc[self.to_parent] = np.arange(self.to_parent.size)
        return loc


def subgraph(G: WeightedGraph, A):
    """Induced subgraph on ``A`` (ids relabelled ``0..|A|-1`` in increasing parent order)."""
    A = np.unique(np.asarray(A, dtype=np.int64))
    if A.size == 0:
        raise ValueError("vertex set must be nonempty")
    if A[0] < 0 or A[-1] >= G.n:
        raise ValueError("vertex id out of range")
    imap = IndexMap(A, G.n, G.degrees, G.volume, G.measure)
    loc = imap.to_local
    ls, ld = loc[G.src], loc[G.dst]
    keep = (ls >= 0) & (ld >= 0)
    H = WeightedGraph(A.size, ls[keep], ld[keep], G.weight[keep], G.measure_mode)
    return H, imap
