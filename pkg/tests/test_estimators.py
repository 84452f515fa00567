import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbnorm.estimators import (
    DegenerateDrawError,
    EstimatorKind,
    counterbalance,
    dixon,
    estimate,
    power_ratio,
    sample_base_values,
    sample_power_ratios,
    vanilla,
)
from cbnorm.operators import CapabilityError, CountingOperator, DenseOperator, SpectrumSpec, gen_synthetic
from cbnorm.rng import RandomSource

KINDS = [EstimatorKind.vanilla(1), EstimatorKind.vanilla(3), EstimatorKind.dixon(), EstimatorKind.counterbalance()]


def _rank1(rows=6, cols=5, sigma=2.0, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(rows)
    v = rng.standard_normal(cols)
    u /= np.linalg.norm(u)
    v /= np.linalg.norm(v)
    return DenseOperator(sigma * np.outer(u, v)), u, v


def test_kind_parsing_and_accounting():
    assert EstimatorKind.parse("cb") == EstimatorKind.counterbalance()
    assert EstimatorKind.parse("vanilla") == EstimatorKind.vanilla(3)
    assert EstimatorKind.parse("Vanilla7").k == 7
    with pytest.raises(ValueError):
        EstimatorKind.parse("lanczos")
    with pytest.raises(ValueError):
        EstimatorKind.vanilla(0)
    assert (EstimatorKind.vanilla(4).matvec_count, EstimatorKind.vanilla(4).sequential_depth) == (4, 1)
    assert (EstimatorKind.dixon().matvec_count, EstimatorKind.dixon().sequential_depth) == (3, 2)
    assert (EstimatorKind.counterbalance().matvec_count, EstimatorKind.counterbalance().sequential_depth) == (3, 2)


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_matvec_counts_match_report(kind):
    op = CountingOperator(gen_synthetic(SpectrumSpec((1.0, 0.5), 8, 6), 0)[0])
    report = estimate(op, kind, 1.5, RandomSource(3, 1))
    assert op.total == report.matvec_count == kind.matvec_count
    assert report.sequential_depth == kind.sequential_depth


def test_zero_matrix():
    zero = DenseOperator(np.zeros((4, 3)))
    assert vanilla(zero, 2.0, 3, RandomSource(0)).value == 0.0
    assert dixon(zero, 2.0, RandomSource(0)).value == 0.0
    with pytest.raises(DegenerateDrawError) as info:
        counterbalance(zero, 2.0, RandomSource(5, 9))
    assert info.value.seed == 5 and info.value.stream_ids == [9]


def test_vanilla_scaled_identity():
    rng = RandomSource(4, 2)
    xs = rng.gaussian_vectors(3, 7)
    report = vanilla(DenseOperator(2.5 * np.eye(7)), 1.7, 3, rng)
    assert report.value == pytest.approx(1.7 * 2.5 * max(np.linalg.norm(xs, axis=1)), rel=1e-14)


def test_dixon_identity_and_rank1():
    rng = RandomSource(8, 0)
    x1, x2 = rng.gaussian_vectors(2, 5)
    got = dixon(DenseOperator(np.eye(5)), 2.0, rng).value
    assert got == pytest.approx(2.0 * max(math.sqrt(np.linalg.norm(x1)), np.linalg.norm(x2)), rel=1e-14)
    op, u, v = _rank1(sigma=1.0)
    for sid in range(20):
        rng = RandomSource(1, sid)
        x1, x2 = rng.gaussian_vectors(2, 5)
        expected = max(math.sqrt(abs(v @ x1)), abs(v @ x2))
        assert dixon(op, 1.0, rng).value == pytest.approx(expected, abs=1e-12)


def test_counterbalance_rank1_never_underestimates():
    op, _, _ = _rank1(sigma=2.0)
    for sid in range(200):
        report = counterbalance(op, 1.0, RandomSource(2, sid))
        assert report.value >= 2.0 - 1e-12


def test_counterbalance_isometric_2d():
    op = DenseOperator(np.eye(2))
    for sid in range(20):
        rng = RandomSource(6, sid)
        _, x2 = rng.gaussian_vectors(2, 2)
        assert counterbalance(op, 1.3, rng).value == pytest.approx(1.3 * math.sqrt(1 + x2 @ x2), rel=1e-14)


def test_power_ratio_closed_form():
    s1, s2 = 1.0, 0.3
    op = DenseOperator(np.diag([s1, s2]))
    for sid in range(50):
        rng = RandomSource(10, sid)
        (y,) = rng.gaussian_vectors(1, 2)
        expected = math.sqrt((s1**4 * y[0] ** 2 + s2**4 * y[1] ** 2) / (s1**2 * y[0] ** 2 + s2**2 * y[1] ** 2))
        assert power_ratio(op, rng) == pytest.approx(expected, abs=1e-12)
    r1, _, _ = _rank1(sigma=3.0)
    assert power_ratio(r1, RandomSource(0)) == pytest.approx(3.0, rel=1e-13)


def test_power_ratio_never_exceeds_norm():
    op, truth = gen_synthetic(SpectrumSpec((1.0,) + (0.5,) * 10, 100, 100), 3)
    ratios = sample_power_ratios(op, 0, np.arange(100_000))
    assert np.all(ratios <= truth.spectral_norm + 1e-12)
    assert np.all(ratios > 0)


def test_adjoint_required():
    op = DenseOperator(np.eye(3), adjoint=False)
    vanilla(op, 1.0, 2, RandomSource(0))
    for fn in (lambda: dixon(op, 1.0, RandomSource(0)), lambda: counterbalance(op, 1.0, RandomSource(0))):
        with pytest.raises(CapabilityError, match="adjoint"):
            fn()
    with pytest.raises(CapabilityError):
        sample_base_values(op, EstimatorKind.dixon(), 0, [0])


def test_counterbalance_theta_floor():
    with pytest.raises(ValueError):
        counterbalance(DenseOperator(np.eye(2)), 0.9, RandomSource(0))


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_batched_equals_single(kind):
    op, _ = gen_synthetic(SpectrumSpec((1.0, 0.7, 0.2), 12, 9), 2)
    streams = np.arange(5, 25)
    batch = sample_base_values(op, kind, 42, streams)
    single = [estimate(op, kind, 1.0, RandomSource(42, int(s))).value for s in streams]
    assert np.allclose(batch, single, rtol=1e-13, atol=0)


@pytest.mark.parametrize("kind", KINDS, ids=str)
def test_reproducible(kind):
    op, _ = gen_synthetic(SpectrumSpec((1.0, 0.5), 10, 10), 0)
    a = estimate(op, kind, 2.0, RandomSource(9, 4))
    b = estimate(op, kind, 2.0, RandomSource(9, 4))
    assert a.value == b.value
    assert a.to_dict()["kind"] == kind.label


@given(
    seed=st.integers(0, 2**31),
    theta=st.floats(1.0, 20.0),
    scale=st.floats(1e-3, 1e3),
)
@settings(max_examples=40, deadline=None)
def test_theta_linearity_and_scale_covariance(seed, theta, scale):
    base, _ = gen_synthetic(SpectrumSpec((1.0, 0.4, 0.1), 7, 6), 1)
    scaled = DenseOperator(scale * base.matrix)
    for kind in KINDS:
        one = estimate(base, kind, 1.0, RandomSource(seed)).value
        assert estimate(base, kind, theta, RandomSource(seed)).value == pytest.approx(theta * one, rel=1e-14)
        assert estimate(scaled, kind, 1.0, RandomSource(seed)).value == pytest.approx(scale * one, rel=1e-12)


def test_vanilla_rank1_halfnormal_law():
    op, _, _ = _rank1(sigma=1.0)
    values = sample_base_values(op, EstimatorKind.vanilla(1), 3, np.arange(200_000))
    p = np.mean(values <= 1.0)
    expected = math.erf(1 / math.sqrt(2))
    assert abs(p - expected) < 4 * math.sqrt(expected * (1 - expected) / values.size)


def test_counterbalance_nan_for_degenerate_in_batch():
    values = sample_base_values(DenseOperator(np.zeros((3, 3))), EstimatorKind.counterbalance(), 0, [0, 1])
    assert np.all(np.isnan(values))
