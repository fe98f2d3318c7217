import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.metrics import normalized_mutual_info_score

from nlmod import Partition
from nlmod.metrics import clustering_error, contingency, nmi

labelings = st.integers(1, 40).flatmap(
    lambda n: st.tuples(st.lists(st.integers(0, 4), min_size=n, max_size=n),
                        st.lists(st.integers(0, 4), min_size=n, max_size=n)))


def test_identical_partitions():
    assert nmi([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert nmi([0, 0, 1, 1], [5, 5, 2, 2]) == 1.0


def test_independent_partitions():
    assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-15)


def test_single_block_conventions():
    assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
    assert nmi([0, 0, 0], [0, 1, 2]) == 0.0


def test_accepts_partition_objects():
    assert nmi(Partition([0, 1, 1]), Partition([3, 4, 4])) == 1.0


def test_contingency_counts():
    N = contingency([0, 0, 1, 1, 1], ["a", "b", "b", "b", "a"])
    np.testing.assert_array_equal(N, [[1, 1], [1, 2]])


def test_length_mismatch():
    with pytest.raises(ValueError):
        nmi([0, 1], [0, 1, 1])


@settings(max_examples=200, deadline=None)
@given(labelings)
def test_nmi_matches_sklearn(pair):
    a, b = pair
    assert nmi(a, b) == pytest.approx(
        normalized_mutual_info_score(a, b, average_method="arithmetic"), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(labelings, st.randoms(use_true_random=False))
def test_nmi_symmetric_and_label_invariant(pair, rnd):
    a, b = map(np.array, pair)
    v = nmi(a, b)
    assert 0.0 <= v <= 1.0
    assert nmi(b, a) == pytest.approx(v, abs=1e-12)
    perm = list(range(5))
    rnd.shuffle(perm)
    assert nmi(np.array(perm)[a], b) == pytest.approx(v, abs=1e-12)


def test_clustering_error_examples():
    assert clustering_error([0, 0, 1, 1], [0, 0, 1, 1]) == 0.0
    assert clustering_error([0, 0, 1, 1], [0, 1, 1, 1]) == 0.25
    # dominant labels 4 and 9, vertex 2 is the only stray
    assert clustering_error([0, 0, 0, 1], [4, 4, 9, 9]) == 0.25
    # a cluster that mixes all truth labels
    assert clustering_error([0, 0, 0, 1], [0, 1, 2, 2]) == pytest.approx(0.5)


def test_clustering_error_one_stray_vertex():
    n = 10
    truth = np.r_[np.zeros(n // 2), np.ones(n // 2)]
    pred = np.r_[np.zeros(n - 1), 1]
    # the big cluster holds n/2 of one label and n/2 - 1 of the other
    assert clustering_error(pred, truth) == pytest.approx(0.5 - 1 / n)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=2, max_size=30), st.data())
def test_clustering_error_invariances(pred, data):
    pred = np.array(pred)
    if len(set(pred.tolist())) < 2:
        pred[0], pred[1] = 0, 1
    truth = np.array(data.draw(st.lists(st.integers(0, 3), min_size=pred.size,
                                        max_size=pred.size)))
    e = clustering_error(pred, truth)
    assert 0.0 <= e <= 0.5 + 1e-12 or len(set(truth.tolist())) > 2
    assert clustering_error(1 - pred, truth) == pytest.approx(e)
    assert clustering_error(pred, 7 - truth) == pytest.approx(e)


def test_clustering_error_needs_two_clusters():
    with pytest.raises(ValueError):
        clustering_error([0, 0, 0], [0, 1, 1])
    with pytest.raises(ValueError):
        clustering_error([0, 1, 2], [0, 1, 1])
