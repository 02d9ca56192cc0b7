import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robustfed.aggregators import (
    Aggregator,
    AggregatorSpec,
    AggregatorState,
    average,
    centered_clip,
    coordinate_median,
    geometric_median,
    krum,
    nnm_mix,
    trimmed_mean,
)
from robustfed.geometry import GradientSet
from robustfed.oracles import (
    ref_centered_clip,
    ref_geometric_median,
    ref_krum,
    ref_median,
    ref_nnm,
    ref_trimmed_mean,
)

SCALARS = np.array([[0.0], [1.0], [2.0], [3.0], [10.0]])


def random_instance(seed, min_n=5, max_n=7, max_d=4):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(min_n, max_n + 1))
    d = int(rng.integers(1, max_d + 1))
    return rng, rng.standard_normal((n, d))


def test_average_examples():
    assert average(GradientSet(np.array([[0.0], [1.0], [2.0]]))).tolist() == [1.0]
    single = np.array([[3.0, -1.0]])
    assert average(GradientSet(single)).tolist() == [3.0, -1.0]
    v = np.array([2.0, -5.0])
    assert average(GradientSet(np.stack([v, -v]))).tolist() == [0.0, 0.0]


def test_median_examples():
    assert coordinate_median(GradientSet(SCALARS)).tolist() == [2.0]
    assert coordinate_median(GradientSet(np.array([[0.0], [1.0], [2.0], [3.0]]))).tolist() == [1.5]
    two_d = GradientSet(np.array([[0.0, 10.0], [1.0, 0.0], [2.0, 5.0]]))
    assert coordinate_median(two_d).tolist() == [1.0, 5.0]


def test_trimmed_mean_examples():
    assert trimmed_mean(GradientSet(SCALARS), 1).tolist() == [2.0]
    constant = GradientSet(np.tile(np.array([7.0]), (5, 1)))
    assert trimmed_mean(constant, 2).tolist() == [7.0]
    with pytest.raises(ValueError):
        trimmed_mean(GradientSet(SCALARS), 3)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_trimmed_q0_equals_average_exactly(seed):
    _, vectors = random_instance(seed)
    g = GradientSet(vectors)
    assert np.array_equal(trimmed_mean(g, 0), average(g))


def test_geomed_worked_example():
    g = GradientSet(np.array([[0.0], [0.0], [3.0]]))
    out = geometric_median(g, nu=0.1, rounds=3)
    assert out == pytest.approx(np.array([3.0 / 17.0]), abs=1e-12)
    # iterate trace from the recurrence: 1 -> 0.6 -> 1/3 -> 3/17
    assert geometric_median(g, 0.1, 1) == pytest.approx(np.array([0.6]), abs=1e-12)
    assert geometric_median(g, 0.1, 2) == pytest.approx(np.array([1.0 / 3.0]), abs=1e-12)


def test_geomed_fixed_point_and_segment():
    v = np.array([1.0, -2.0])
    identical = GradientSet(np.tile(v, (4, 1)))
    assert np.allclose(geometric_median(identical, 0.1, 5), v)
    a, b = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    out = geometric_median(GradientSet(np.stack([a, b])), 0.1, 4)
    t = out[0]
    assert np.allclose(out, a + t * (b - a)) and -1e-12 <= t <= 1 + 1e-12


def test_krum_worked_example():
    # closest scores tie between the two central clients; lower index wins
    assert krum(GradientSet(SCALARS), 1).tolist() == [1.0]


def test_krum_selects_an_input_and_all_tie_case():
    rng = np.random.default_rng(0)
    vectors = rng.standard_normal((6, 3))
    out = krum(GradientSet(vectors), 2)
    assert any(np.array_equal(out, v) for v in vectors)
    constant = GradientSet(np.tile(np.array([4.0, 4.0]), (5, 1)), np.arange(5))
    assert krum(constant, 1).tolist() == [4.0, 4.0]
    with pytest.raises(ValueError):
        krum(GradientSet(SCALARS), 3)


def test_cclip_worked_example():
    g = GradientSet(np.array([[30.0]]))
    out = centered_clip(g, None, tau=10.0, iters=3)
    assert out.tolist() == [30.0]


def test_cclip_inactive_clipping_is_average():
    rng = np.random.default_rng(1)
    vectors = rng.uniform(-1, 1, size=(5, 3))
    out = centered_clip(GradientSet(vectors), AggregatorState(np.zeros(3)), tau=10.0, iters=1)
    assert np.allclose(out, vectors.mean(axis=0), atol=1e-12)


def test_cclip_fixed_point_at_center():
    center = np.array([2.0, -1.0])
    g = GradientSet(np.tile(center, (4, 1)))
    out = centered_clip(g, AggregatorState(center.copy()), tau=5.0, iters=3)
    assert np.array_equal(out, center)


def test_nnm_worked_example():
    g = GradientSet(np.array([[0.0], [1.0], [5.0]]))
    assert nnm_mix(g, 1).vectors.tolist() == [[0.5], [0.5], [3.0]]


def test_nnm_constant_idempotent_and_equivariant():
    v = np.array([3.0, 3.0])
    constant = GradientSet(np.tile(v, (4, 1)))
    assert np.allclose(nnm_mix(constant, 1).vectors, constant.vectors)
    rng = np.random.default_rng(2)
    vectors = rng.standard_normal((6, 2))
    perm = rng.permutation(6)
    base = nnm_mix(GradientSet(vectors.copy()), 2).vectors
    permuted = nnm_mix(GradientSet(vectors[perm]), 2).vectors
    assert np.allclose(base[perm], permuted)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_rules_match_oracles(seed):
    rng, vectors = random_instance(seed)
    n = vectors.shape[0]
    f = int(rng.integers(1, (n - 1) // 2 + 1))
    g = GradientSet(vectors.copy())
    assert np.allclose(coordinate_median(g), ref_median(vectors), atol=1e-10)
    assert np.allclose(trimmed_mean(g, f), ref_trimmed_mean(vectors, f), atol=1e-10)
    assert np.allclose(
        geometric_median(g, 0.1, 3), ref_geometric_median(vectors, 0.1, 3), atol=1e-10
    )
    if n >= f + 3:
        assert np.allclose(krum(g, f), ref_krum(vectors, f), atol=1e-10)
    center = rng.standard_normal(vectors.shape[1])
    assert np.allclose(
        centered_clip(g, AggregatorState(center.copy()), 10.0, 3),
        ref_centered_clip(vectors, center, 10.0, 3),
        atol=1e-10,
    )
    assert np.allclose(nnm_mix(g, f).vectors, np.stack(ref_nnm(vectors, f)), atol=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_outputs_in_bounding_box(seed):
    rng, vectors = random_instance(seed)
    n = vectors.shape[0]
    f = int(rng.integers(1, (n - 1) // 2 + 1))
    g = GradientSet(vectors)
    lo, hi = vectors.min(axis=0) - 1e-12, vectors.max(axis=0) + 1e-12
    for out in (
        coordinate_median(g),
        trimmed_mean(g, f),
        geometric_median(g, 0.1, 3),
        centered_clip(g, AggregatorState(vectors.mean(axis=0)), 10.0, 3),
    ):
        assert np.all(out >= lo) and np.all(out <= hi)
    mixed = nnm_mix(g, f).vectors
    assert np.all(mixed >= lo) and np.all(mixed <= hi)


def test_spec_validation():
    with pytest.raises(ValueError):
        AggregatorSpec(kind="bogus")
    with pytest.raises(ValueError):
        AggregatorSpec(kind="geomed", weiszfeld_nu=0.0)
    spec = AggregatorSpec(kind="trimmed_mean")
    with pytest.raises(ValueError):
        Aggregator(spec, n_clients=10, n_byzantine=5)
    assert AggregatorSpec(kind="median", nnm_enabled=True).label() == "nnm+median"


def test_defaults_are_standard():
    spec = AggregatorSpec(kind="geomed")
    assert spec.weiszfeld_nu == 0.1 and spec.weiszfeld_rounds == 3
    assert spec.clip_tau == 10.0 and spec.clip_iters == 3
    agg = Aggregator(AggregatorSpec(kind="trimmed_mean"), 10, 3)
    assert agg.trim_q == 3  # defaults to the byzantine count


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["median", "trimmed_mean", "geomed", "krum", "cclip", "prodigy"]))
def test_nnm_composition_is_a_valid_aggregator(seed, kind):
    rng = np.random.default_rng(seed)
    n, f = 8, 2
    vectors = rng.standard_normal((n, 4))
    g = GradientSet(vectors.copy())
    plain = Aggregator(AggregatorSpec(kind=kind), n, f)
    composed = Aggregator(AggregatorSpec(kind=kind, nnm_enabled=True), n, f)
    state = AggregatorState(np.zeros(4))
    out = composed(g, state).vector
    assert out.shape == (4,)
    # composition equals running the plain rule on the mixed set
    expected = plain(nnm_mix(GradientSet(vectors.copy()), f), state).vector
    assert np.allclose(out, expected, atol=1e-12)


def test_cclip_warm_start_uses_state():
    g = GradientSet(np.array([[30.0]]))
    agg = Aggregator(AggregatorSpec(kind="cclip"), 1, 0)
    first = agg(g, AggregatorState()).vector
    assert first.tolist() == [30.0]
    resumed = agg(g, AggregatorState(prev_aggregate=np.array([30.0]))).vector
    assert resumed.tolist() == [30.0]
