import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustfed.geometry import (
    DistanceMatrix,
    GradientSet,
    neighbor_order,
    pairwise_sq_distances,
    vector_set_stats,
    write_distance_csv,
)
from robustfed.oracles import ref_pairwise_sq, ref_sorted_neighbors


def vector_sets(max_n=8, max_d=5):
    return st.integers(2, max_n).flatmap(
        lambda n: st.integers(1, max_d).flatmap(
            lambda d: st.lists(
                st.lists(st.floats(-100, 100, allow_nan=False), min_size=d, max_size=d),
                min_size=n,
                max_size=n,
            )
        )
    )


def test_pairwise_scalar_example():
    g = GradientSet(np.array([[0.0], [1.0], [2.0]]))
    expected = [[0, 1, 4], [1, 0, 1], [4, 1, 0]]
    assert np.array_equal(pairwise_sq_distances(g).entries, np.array(expected, dtype=float))


def test_pairwise_single_vector():
    g = GradientSet(np.array([[3.0, 4.0]]))
    assert np.array_equal(pairwise_sq_distances(g).entries, np.zeros((1, 1)))


def test_pairwise_identical_vectors():
    v = np.array([1.5, -2.0, 0.25])
    g = GradientSet(np.stack([v, v]))
    assert np.array_equal(pairwise_sq_distances(g).entries, np.zeros((2, 2)))


def test_nonfinite_input_names_client():
    vectors = np.array([[0.0], [np.nan], [2.0]])
    with pytest.raises(ValueError, match="client 7"):
        GradientSet(vectors, client_ids=np.array([5, 7, 9]))


@settings(max_examples=150, deadline=None)
@given(vector_sets())
def test_pairwise_matches_naive_oracle(rows):
    g = GradientSet(np.array(rows))
    entries = pairwise_sq_distances(g).entries
    expected = np.array(ref_pairwise_sq(rows))
    assert np.allclose(entries, expected, rtol=1e-12, atol=1e-12)
    assert np.array_equal(entries, entries.T)
    assert np.all(np.diag(entries) == 0.0)
    assert np.all(entries >= 0.0)


def test_neighbor_tie_broken_by_lower_index():
    g = GradientSet(np.array([[0.0], [1.0], [2.0]]))
    order = neighbor_order(pairwise_sq_distances(g))
    # middle client is equidistant from both ends; lower index comes first
    assert order.indices[1].tolist() == [0, 2]
    assert order.distances[1].tolist() == [1.0, 1.0]


def test_neighbor_order_example():
    g = GradientSet(np.array([[0.0], [1.0], [4.0]]))
    order = neighbor_order(pairwise_sq_distances(g))
    assert order.indices[0].tolist() == [1, 2]
    assert order.distances[0].tolist() == [1.0, 16.0]


def test_neighbor_order_two_clients():
    g = GradientSet(np.array([[0.0], [5.0]]))
    order = neighbor_order(pairwise_sq_distances(g))
    assert order.indices[0].tolist() == [1]
    assert order.indices[1].tolist() == [0]


@settings(max_examples=100, deadline=None)
@given(vector_sets())
def test_neighbor_order_matches_oracle_and_permutes(rows):
    g = GradientSet(np.array(rows))
    order = neighbor_order(pairwise_sq_distances(g))
    n = len(rows)
    for k in range(n):
        expected = ref_sorted_neighbors(rows, k)
        assert order.indices[k].tolist() == [idx for _, idx in expected]
        assert sorted(order.indices[k].tolist()) == [j for j in range(n) if j != k]
        assert np.all(np.diff(order.distances[k]) >= 0)


@settings(max_examples=100, deadline=None)
@given(vector_sets(), st.randoms(use_true_random=False))
def test_neighbor_order_permutation_equivariant(rows, rnd):
    n = len(rows)
    perm = list(range(n))
    rnd.shuffle(perm)
    base = neighbor_order(pairwise_sq_distances(GradientSet(np.array(rows))))
    permuted = neighbor_order(
        pairwise_sq_distances(GradientSet(np.array([rows[p] for p in perm])))
    )
    # relabeling clients relabels the orderings identically, up to distance ties
    inverse = np.argsort(perm)
    for new_k in range(n):
        old_k = perm[new_k]
        if len(set(base.distances[old_k].tolist())) == n - 1:
            assert [perm[j] for j in permuted.indices[new_k]] == base.indices[old_k].tolist()


def test_stats_scalar_pair():
    stats = vector_set_stats(np.array([[0.0], [1.0]]))
    assert stats.mean.tolist() == [0.5]
    assert stats.spread == 0.5


def test_stats_singleton_and_constant():
    v = np.array([2.0, -1.0])
    assert vector_set_stats(v[None, :]).spread == 0.0
    stats = vector_set_stats(np.stack([v, v, v]))
    assert np.array_equal(stats.mean, v)
    assert stats.spread == 0.0


def test_stats_empty_rejected():
    with pytest.raises(ValueError):
        vector_set_stats(np.empty((0, 3)))


@settings(max_examples=150, deadline=None)
@given(vector_sets())
def test_spread_bounded_by_max_pairwise_distance(rows):
    arr = np.array(rows)
    stats = vector_set_stats(arr)
    max_sq = ref_pairwise_sq(rows)
    bound = max(max(row) for row in max_sq)
    assert stats.spread**2 <= bound + 1e-9 * (1.0 + bound)


def test_distance_csv_dump(tmp_path):
    g = GradientSet(np.array([[0.0], [1.0], [2.0]]), client_ids=np.array([4, 5, 6]))
    path = tmp_path / "dist.csv"
    write_distance_csv(pairwise_sq_distances(g), g.client_ids, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "4,5,6"
    assert len(lines) == 4
    assert [float(v) for v in lines[1].split(",")] == [0.0, 1.0, 4.0]


def test_distance_csv_id_mismatch(tmp_path):
    m = DistanceMatrix(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        write_distance_csv(m, [1, 2, 3], tmp_path / "x.csv")
