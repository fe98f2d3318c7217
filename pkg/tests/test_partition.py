import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import nlmod.partition as part
from nlmod import (
    ModularityContext,
    WeightedGraph,
    lovasz_modularity,
    partition_modularity,
    planted_model,
    q_mu_of,
    q_of,
    rayleigh_r_star,
    set_modularity,
)
from nlmod.partition import (
    AllStartsFailed,
    MethodSpec,
    Partition,
    Start,
    default_starts,
    diffusion_start,
    kl_refine,
    leading_module,
    optimal_threshold,
    successive_bipartition,
)
from nlmod.ratiodca import DCAOptions
from oracles import random_graph

FEW = [Start("eigenvector"), Start("random", 1), Start("diffusion", 2)]


def two_triangles():
    return WeightedGraph.from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


# --- partitions and starts --------------------------------------------------


def test_partition_relabels_by_first_appearance():
    P = Partition([7, 7, 3, 9, 3])
    np.testing.assert_array_equal(P.labels, [0, 0, 1, 2, 1])
    assert P.k == 3 and P.sizes.tolist() == [2, 2, 1]
    assert [c.tolist() for c in P.communities()] == [[0, 1], [2, 4], [3]]
    assert P == Partition([1, 1, 0, 5, 0])


def test_bipartition_puts_vertex_zero_first():
    np.testing.assert_array_equal(Partition.bipartition([3, 4], 5).labels, [0, 0, 0, 1, 1])
    np.testing.assert_array_equal(Partition.bipartition([0, 4], 5).labels, [0, 1, 1, 1, 0])


def test_default_starts_deterministic():
    a, b = default_starts(seed=4), default_starts(seed=4)
    assert a == b and len(a) == 61 and a[0].kind == "eigenvector"
    assert [s.kind for s in a[1:31]] == ["random"] * 30
    assert default_starts(seed=5) != a
    assert len(default_starts(2, 3, eigenvector=False)) == 5


def test_method_spec_validation():
    with pytest.raises(ValueError):
        MethodSpec("spectral")
    with pytest.raises(ValueError):
        MethodSpec(starts=[])
    with pytest.raises(ValueError):
        MethodSpec(threads=0)
    with pytest.raises(ValueError):
        Start("random")
    assert MethodSpec("nonlinear_qmu").criterion == "q_mu"
    assert MethodSpec("linear").criterion == "q"


# --- thresholding -------------------------------------------------------------


def sweep_oracle(G, x, criterion):
    best, bestA = (0.0, []) if criterion == "q" else (-np.inf, None)
    for t in sorted(set(x.tolist()), reverse=True):
        A = [i for i in range(len(x)) if x[i] >= t]
        if len(A) == len(x):
            continue
        v = q_of(G, A) if criterion == "q" else q_mu_of(G, A)
        if v > best:
            best, bestA = v, A
    return best, bestA


def test_threshold_T2(T2):
    cut = optimal_threshold(T2, np.array([3, 2, 1, -1, -2, -3.0]))
    assert cut.A.tolist() == [0, 1, 2]
    assert cut.value == pytest.approx(5 / 14, abs=1e-14)
    assert cut.threshold == 1.0 and not cut.trivial
    A, value = cut
    assert value == cut.value


def test_threshold_constant_flagged(T2):
    cut = optimal_threshold(T2, np.full(6, 0.3))
    assert cut.trivial and cut.A.size == 0 and cut.value == 0


def test_threshold_all_negative_is_trivial_under_q(K2):
    cut = optimal_threshold(K2, np.array([1.0, 0.0]))
    assert cut.trivial and cut.value == 0
    cut = optimal_threshold(K2, np.array([1.0, 0.0]), "q_mu")
    assert cut.A.tolist() == [0] and cut.value == pytest.approx(q_mu_of(K2, [0]))


def test_threshold_ties_prefer_smaller_set():
    # two triangles: both halves score the same
    G = two_triangles()
    cut = optimal_threshold(G, np.array([2, 2, 2, 1, 1, 1.0]))
    assert cut.A.tolist() == [0, 1, 2]


@pytest.mark.parametrize("criterion", ["q", "q_mu"])
def test_threshold_matches_sweep_oracle(rng, criterion):
    for _ in range(100):
        n = int(rng.integers(2, 10))
        G = random_graph(rng, n, 0.5)
        x = rng.integers(-3, 4, n).astype(float) if rng.random() < 0.5 else rng.standard_normal(n)
        if np.all(x == x[0]):
            continue
        cut = optimal_threshold(G, x, criterion)
        value, A = sweep_oracle(G, x, criterion)
        assert cut.value == pytest.approx(value, abs=1e-12)
        if criterion == "q" and value <= 0:
            assert cut.trivial
        else:
            assert cut.A.tolist() == A


def test_threshold_on_subgraph_context(rng):
    G = random_graph(rng, 10, 0.5)
    ctx = ModularityContext.for_subset(G, [1, 3, 4, 6, 8, 9])
    x = rng.standard_normal(6)
    cut = optimal_threshold(ctx, x, "q")
    for t in x:
        S = x >= t
        if S.all():
            continue
        assert cut.value >= 2 * set_modularity(ctx, S) / ctx.mu_total - 1e-12


def test_threshold_lower_bounds(rng):
    """Best level set beats the ratio the vector itself achieves."""
    for _ in range(100):
        n = int(rng.integers(3, 12))
        G = random_graph(rng, n, 0.4)
        ctx = ModularityContext.root(G)
        x = rng.standard_normal(n)
        assert optimal_threshold(ctx, x, "q").value >= rayleigh_r_star(ctx, x) / ctx.mu_total - 1e-12
        # under q_mu the matching denominator is the Lovasz extension of mu(A) mu(A^c) / mu(V)
        mu = ctx.mu
        L = 0.5 * (mu[:, None] * mu[None] * np.abs(x[:, None] - x[None])).sum() / ctx.mu_total
        fq = lovasz_modularity(ctx, x)
        if fq > 0:
            assert optimal_threshold(ctx, x, "q_mu").value >= fq / L - 1e-10


def test_threshold_bad_input(T2):
    with pytest.raises(ValueError):
        optimal_threshold(T2, np.zeros(5))
    with pytest.raises(ValueError):
        optimal_threshold(T2, np.arange(6.0), "modularity")


# --- diffusion starts ---------------------------------------------------------


def test_diffusion_K2(K2):
    z, fallback = diffusion_start(K2, [0, 1], np.array([1.0, -1.0]), seed=0)
    assert not fallback
    np.testing.assert_allclose(z, [1 / 3, -1 / 3], atol=1e-8)


def test_diffusion_no_edges():
    G = WeightedGraph(3, np.zeros(0, int), np.zeros(0, int), np.zeros(0))
    z, fallback = diffusion_start(G, [0, 1, 2], np.array([1.0, -1.0, -2.0]), seed=3)
    assert not fallback and z[0] == 1 and sorted(z) == [-1, 0, 1]


def test_diffusion_fallback_when_one_sided(T2):
    z, fallback = diffusion_start(T2, np.arange(6), np.ones(6), seed=1)
    assert fallback and z.shape == (6,)


def test_diffusion_solves_linear_system(rng):
    for _ in range(10):
        G = random_graph(rng, 15, 0.3)
        A = np.sort(rng.choice(15, 9, replace=False))
        xbar = rng.standard_normal(9)
        z, _ = diffusion_start(G, A, xbar, seed=int(rng.integers(1000)))
        H = G.dense()[np.ix_(A, A)]
        L = np.diag(H.sum(1)) - H
        rhs = (np.eye(9) + L) @ z
        # right-hand side is e_i - e_j with i positive and j nonpositive in xbar
        assert abs(rhs.sum()) < 1e-7
        i, j = int(np.argmax(rhs)), int(np.argmin(rhs))
        assert rhs[i] == pytest.approx(1, abs=1e-6) and rhs[j] == pytest.approx(-1, abs=1e-6)
        assert xbar[i] > 0 and xbar[j] <= 0
        assert z.sum() == pytest.approx(0, abs=1e-7)


# --- leading module -----------------------------------------------------------


@pytest.mark.parametrize("relaxation", ["linear", "nonlinear_q", "nonlinear_qmu"])
def test_leading_module_T2(T2, relaxation):
    P, rep = leading_module(T2, MethodSpec(relaxation, FEW))
    assert P == Partition([0, 0, 0, 1, 1, 1])
    assert not rep.indivisible
    expect = 5 / 14 if rep.criterion == "q" else q_mu_of(T2, [0, 1, 2])
    assert rep.value == pytest.approx(expect, abs=1e-12)


@pytest.mark.parametrize("relaxation", ["linear", "nonlinear_q", "nonlinear_qmu"])
def test_leading_module_K2_indivisible(K2, relaxation):
    P, rep = leading_module(K2, MethodSpec(relaxation, FEW))
    assert P.k == 1 and rep.indivisible and rep.starts == []


def test_nonlinear_never_worse_than_linear(rng):
    for _ in range(8):
        G = random_graph(rng, 25, 0.2)
        _, lin = leading_module(G, MethodSpec("linear"))
        _, nl = leading_module(G, MethodSpec("nonlinear_q", [Start("eigenvector")]))
        assert nl.value >= lin.value - 1e-12


def test_leading_module_report_records(T2):
    P, rep = leading_module(T2, MethodSpec("nonlinear_q", FEW))
    assert [r.start for r in rep.starts] == FEW
    best = rep.starts[rep.best_start]
    assert best.value == rep.value
    for r in rep.starts:
        assert r.error is None and r.lambdas == sorted(r.lambdas)
        assert r.value <= rep.value


def test_leading_module_all_starts_failed(T2, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("inner solver exploded")

    monkeypatch.setattr(part, "maximize_r_star", boom)
    with pytest.raises(AllStartsFailed) as err:
        leading_module(T2, MethodSpec("nonlinear_q", FEW))
    assert len(err.value.report.starts) == 3
    assert all("exploded" in r.error for r in err.value.report.starts)


def test_leading_module_single_failure_tolerated(T2, monkeypatch):
    real = part.maximize_r_star
    calls = []

    def flaky(ctx, x0, *a, **k):
        calls.append(1)
        if len(calls) == 1:
            raise RuntimeError("first start fails")
        return real(ctx, x0, *a, **k)

    monkeypatch.setattr(part, "maximize_r_star", flaky)
    P, rep = leading_module(T2, MethodSpec("nonlinear_q", FEW))
    assert rep.starts[0].error and P.k == 2


def test_leading_module_thread_count_invariant():
    G = random_graph(np.random.default_rng(3), 60, 0.08)
    starts = default_starts(3, 3, seed=9)
    dca = DCAOptions(max_outer=30)
    a = leading_module(G, MethodSpec("nonlinear_q", starts, dca=dca, threads=1))
    b = leading_module(G, MethodSpec("nonlinear_q", starts, dca=dca, threads=4))
    assert a[0] == b[0]
    assert [r.lambdas for r in a[1].starts] == [r.lambdas for r in b[1].starts]


def test_planted_qmu_finds_small_block():
    G, blocks = planted_model(seed=2)
    P, rep = leading_module(G, MethodSpec("nonlinear_qmu", [Start("eigenvector")]))
    S = np.nonzero(P.labels == P.labels[blocks[0][0]])[0]
    jac = len(np.intersect1d(S, blocks[0])) / len(np.union1d(S, blocks[0]))
    assert jac >= 0.9


# --- successive bipartition ---------------------------------------------------


def test_successive_two_triangles():
    H = successive_bipartition(two_triangles(), MethodSpec("nonlinear_q", FEW))
    assert H.partition == Partition([0, 0, 0, 1, 1, 1])
    assert H.q == pytest.approx(0.5, abs=1e-12)


def test_successive_K3_single_community(K3):
    H = successive_bipartition(K3, MethodSpec("linear"))
    assert H.partition.k == 1 and H.q == 0
    assert H.nodes[0].status == "indivisible"


@pytest.mark.parametrize("relaxation", ["linear", "nonlinear_q"])
def test_successive_T2(T2, relaxation):
    H = successive_bipartition(T2, MethodSpec(relaxation, FEW))
    assert H.q == pytest.approx(5 / 14, abs=1e-12)


def test_successive_consistency(rng):
    for _ in range(5):
        G = random_graph(rng, 30, 0.15)
        H = successive_bipartition(G, MethodSpec("linear"))
        assert H.q == pytest.approx(partition_modularity(G, H.partition.labels), abs=1e-12)
        # each split adds its gain to sum Q
        gains = sum(nd.gain for nd in H.nodes if nd.gain is not None)
        assert H.q == pytest.approx(gains / G.volume, abs=1e-12)
        for nd in H.nodes:
            if nd.children:
                kids = [H.nodes[c].members for c in nd.children]
                assert sorted(np.concatenate(kids).tolist()) == sorted(nd.members.tolist())


def test_successive_limits():
    G = random_graph(np.random.default_rng(1), 60, 0.08)
    H = successive_bipartition(G, MethodSpec("linear"), max_communities=2)
    assert H.partition.k <= 2
    H = successive_bipartition(G, MethodSpec("linear"), max_communities=1)
    assert H.partition.k == 1 and H.nodes[0].status == "limit"
    H = successive_bipartition(G, MethodSpec("linear"), min_size=10_000)
    assert H.partition.k == 1 and H.nodes[0].status == "too_small"
    with pytest.raises(ValueError):
        successive_bipartition(G, min_size=0)


def test_successive_thread_count_invariant():
    G = random_graph(np.random.default_rng(5), 60, 0.08)
    spec1 = MethodSpec("nonlinear_q", default_starts(2, 2, seed=1), dca=DCAOptions(max_outer=30))
    spec4 = MethodSpec("nonlinear_q", spec1.starts, dca=spec1.dca, threads=4)
    a, b = successive_bipartition(G, spec1), successive_bipartition(G, spec4)
    assert a.partition == b.partition and a.q == b.q


def test_successive_with_kl_not_worse(rng):
    G = random_graph(rng, 40, 0.12)
    a = successive_bipartition(G, MethodSpec("linear"))
    b = successive_bipartition(G, MethodSpec("linear"), kl=True)
    assert b.q >= a.q - 1e-12


# --- Kernighan-Lin ------------------------------------------------------------


def test_kl_fixes_misassigned_vertex(T2):
    P = kl_refine(T2, [0, 0, 1, 1, 1, 1])
    assert P == Partition([0, 0, 0, 1, 1, 1])
    assert partition_modularity(T2, P.labels) == pytest.approx(5 / 14)


def test_kl_leaves_optimum_alone(T2):
    P = kl_refine(T2, [0, 0, 0, 1, 1, 1])
    assert P == Partition([0, 0, 0, 1, 1, 1])
    assert P.q_values.sum() == pytest.approx(5)


def single_move_best(G, labels):
    best = -np.inf
    base = partition_modularity(G, labels)
    for v in range(G.n):
        for c in set(labels.tolist()) - {labels[v]}:
            trial = labels.copy()
            trial[v] = c
            best = max(best, partition_modularity(G, trial) - base)
    return best


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 14), st.integers(1, 4))
def test_kl_monotone_and_locally_optimal(seed, n, k):
    rng = np.random.default_rng(seed)
    G = random_graph(rng, n, 0.4)
    labels = rng.integers(0, k, n)
    before = partition_modularity(G, labels)
    P = kl_refine(G, labels, max_rounds=200)
    after = partition_modularity(G, P.labels)
    assert after >= before - 1e-12
    assert P.q_values.sum() / G.volume == pytest.approx(after, abs=1e-12)
    # no single move left that gains more than the tolerance
    if P.k > 1:
        assert single_move_best(G, P.labels) <= 1e-9
    assert kl_refine(G, P, max_rounds=200) == P


def test_kl_move_gain_formula(rng):
    """The incremental gain equals the exact change of sum_i Q(A_i)."""
    for _ in range(50):
        n = int(rng.integers(3, 10))
        G = random_graph(rng, n, 0.5)
        ctx = ModularityContext.root(G)
        labels = rng.integers(0, 3, n)
        v = int(rng.integers(n))
        a, b = labels[v], (labels[v] + 1) % 3
        W = G.dense()
        d = G.degrees
        k_va = W[v, labels == a].sum()
        k_vb = W[v, labels == b].sum()
        Da, Db = d[labels == a].sum(), d[labels == b].sum()
        gain = 2 * (k_vb - k_va) + 2 * d[v] * (Da - d[v] - Db) / G.volume
        after = labels.copy()
        after[v] = b
        exact = G.volume * (partition_modularity(ctx, after) - partition_modularity(ctx, labels))
        assert gain == pytest.approx(exact, abs=1e-10)
