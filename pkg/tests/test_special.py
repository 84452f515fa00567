import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cbnorm.special import (
    bessel_i0e,
    chi2_1_cdf,
    chi2_cdf,
    chi2_pdf,
    erf,
    erfc,
    gammainc_lower,
    std_normal_cdf,
    wchi2_cdf,
    wchi2_pdf,
    wchi2_pdf_bessel,
)

scipy_special = pytest.importorskip("scipy.special")


def test_erf_against_stdlib():
    xs = np.linspace(-7, 7, 1401)
    ours = erf(xs)
    ref = np.array([math.erf(x) for x in xs])
    assert np.max(np.abs(ours - ref)) < 2e-15


def test_erfc_tail_relative_accuracy():
    xs = np.linspace(0.0, 25.0, 501)
    ref = np.array([math.erfc(x) for x in xs])
    rel = np.abs(erfc(xs) - ref) / ref
    assert rel.max() < 1e-10


def test_normal_cdf_symmetry():
    xs = np.linspace(-5, 5, 101)
    assert np.allclose(std_normal_cdf(xs) + std_normal_cdf(-xs), 1.0, atol=1e-15)


@pytest.mark.parametrize("a", [0.5, 1.0, 2.0, 3.5, 10.0, 40.0])
def test_gammainc_against_scipy(a):
    xs = np.concatenate([np.linspace(0, 3 * a + 10, 200), [1e-8, 0.3]])
    ours = np.array([gammainc_lower(a, x) for x in xs])
    assert np.max(np.abs(ours - scipy_special.gammainc(a, xs))) < 1e-13


@given(k=st.integers(min_value=1, max_value=30), t=st.floats(min_value=0.0, max_value=200.0))
@settings(max_examples=200, deadline=None)
def test_chi2_cdf_is_probability_matching_scipy(k, t):
    value = chi2_cdf(k, t)
    assert 0.0 <= value <= 1.0
    assert value == pytest.approx(scipy_special.chdtr(k, t), abs=1e-12)


def test_chi2_4_closed_form():
    t = np.linspace(0, 60, 601)
    assert np.max(np.abs(chi2_cdf(4, t) - (1 - np.exp(-t / 2) * (1 + t / 2)))) < 1e-12


def test_chi2_cdf_monotone():
    t = np.linspace(0, 30, 3001)
    for k in (1, 2, 3, 7):
        assert np.all(np.diff(chi2_cdf(k, t)) >= -1e-16)


def test_chi2_pdf_integrates_to_cdf():
    from cbnorm.quadrature import integrate

    for k in (2, 3, 5):
        assert integrate(lambda s: chi2_pdf(k, s), 0.0, 4.0) == pytest.approx(chi2_cdf(k, 4.0), abs=1e-10)


def test_chi2_1_cdf_negative_maps_to_zero():
    assert chi2_1_cdf(-3.0) == 0.0
    assert chi2_1_cdf(np.inf) == 1.0


def test_bessel_i0e_against_scipy():
    z = np.concatenate([np.linspace(0, 60, 601), [100.0, 1e3, 1e5]])
    assert np.allclose(bessel_i0e(z), scipy_special.i0e(z), rtol=1e-13, atol=0)


def test_wchi2_alpha_one_is_exponential():
    t = np.linspace(0.01, 30, 300)
    assert np.max(np.abs(wchi2_pdf(1.0, t) - 0.5 * np.exp(-t / 2))) < 1e-9


@pytest.mark.parametrize("alpha", [0.1, 0.5, 2.0, 6.0])
def test_wchi2_pdf_routes_agree(alpha):
    t = np.linspace(0.05, 20, 60)
    assert np.allclose(wchi2_pdf(alpha, t), wchi2_pdf_bessel(alpha, t), rtol=1e-10, atol=1e-13)


@pytest.mark.parametrize("alpha", [0.2, 1.0, 3.0])
def test_wchi2_cdf_matches_monte_carlo(alpha):
    rng = np.random.default_rng(5)
    xi, eta = rng.standard_normal((2, 400_000))
    sample = xi**2 + alpha * eta**2
    for t in (0.5, 2.0, 6.0):
        p = np.mean(sample <= t)
        se = math.sqrt(p * (1 - p) / sample.size)
        assert abs(wchi2_cdf(alpha, t) - p) < 5 * se


def test_wchi2_cdf_alpha_one_is_chi2_2():
    t = np.linspace(0.0, 25, 51)
    assert np.max(np.abs(wchi2_cdf(1.0, t) - chi2_cdf(2, t))) < 1e-10


def test_negative_arguments_rejected():
    with pytest.raises(ValueError):
        gammainc_lower(1.0, -1.0)
    with pytest.raises(ValueError):
        wchi2_pdf(1.0, -0.5)


def test_golden_values():
    assert std_normal_cdf(0.0) == 0.5
    assert std_normal_cdf(1.0) == pytest.approx(0.8413447460685429, abs=1e-15)
    assert std_normal_cdf(8.0) > 1 - 1e-14
    assert chi2_cdf(1, 0.0) == 0.0
    assert chi2_cdf(4, 2.0) == pytest.approx(1 - 2 * math.exp(-1), abs=1e-14)
    assert chi2_cdf(2, 2.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert wchi2_cdf(0.0, 1.0) == pytest.approx(0.6826894921370859, abs=1e-12)
    assert wchi2_cdf(1.0, 1.0) == pytest.approx(1 - math.exp(-0.5), abs=1e-10)
    assert wchi2_pdf(1.0, 2.0) == pytest.approx(0.5 * math.exp(-1), abs=1e-12)
    assert wchi2_pdf(0.0, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), abs=1e-14)


def test_chi2_1_agrees_with_normal():
    t = np.linspace(0, 40, 401)
    assert np.max(np.abs(chi2_cdf(1, t) - (2 * std_normal_cdf(np.sqrt(t)) - 1))) < 1e-12


def test_wchi2_alpha6_small_t_monte_carlo():
    rng = np.random.default_rng(17)
    hits = 0
    n = 0
    for _ in range(10):
        xi, eta = rng.standard_normal((2, 1_000_000))
        hits += int(np.count_nonzero(xi**2 + 6 * eta**2 <= 0.25))
        n += xi.size
    p = hits / n
    assert abs(wchi2_cdf(6.0, 0.25) - p) < 3 * math.sqrt(p * (1 - p) / n)


def test_wchi2_pdf_is_cdf_derivative():
    h = 1e-5
    numeric = (wchi2_cdf(6.0, 0.5 + h) - wchi2_cdf(6.0, 0.5 - h)) / (2 * h)
    assert numeric == pytest.approx(wchi2_pdf(6.0, 0.5), abs=1e-6)


@pytest.mark.parametrize("alpha", [0.0, 0.1, 1.0, 6.0])
def test_wchi2_cdf_monotone(alpha):
    t = np.linspace(0, 40, 1000)
    values = wchi2_cdf(alpha, t)
    assert values[0] == 0.0
    assert np.all(np.diff(values) >= -1e-12)
    assert wchi2_cdf(alpha, 400.0) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 2.0, 6.0])
@pytest.mark.parametrize("upper", [0.5, 1.0, 4.0])
def test_pdf_integrates_to_cdf(alpha, upper):
    from cbnorm.quadrature import integrate

    # t = upper * sin^2(phi) takes care of the 1/sqrt(t) behavior at 0
    def f(phi):
        t = upper * np.sin(phi) ** 2
        jac = 2 * upper * np.sin(phi) * np.cos(phi)
        return np.array([wchi2_pdf(alpha, x) if x > 0 else 0.0 for x in t]) * jac

    assert integrate(f, 0.0, math.pi / 2, tol=1e-10) == pytest.approx(wchi2_cdf(alpha, upper), abs=1e-7)


def test_density_total_mass():
    from cbnorm.quadrature import integrate

    for alpha in (0.5, 3.0):
        mass = integrate(lambda u: wchi2_pdf_bessel(alpha, u * u) * 2 * u, 0.0, 20.0, tol=1e-11)
        assert mass == pytest.approx(1.0, abs=1e-8)


def test_weighted_chi2_extremum_property():
    # a convex combination of chi^2_1 variables is never more concentrated below x than one chi^2_1
    rng = np.random.default_rng(23)
    n = 1_000_000
    for _ in range(50):
        lam = rng.dirichlet(np.ones(5))
        sample = lam @ (rng.standard_normal((5, n)) ** 2)
        for x in (0.1, 0.5, 1.0):
            p = np.mean(sample <= x)
            se = math.sqrt(max(p * (1 - p), 1e-12) / sample.size)
            assert p <= chi2_cdf(1, x) + 4 * se


def test_case_one_taylor_inequality():
    for theta in np.linspace(1, 10, 91):
        assert chi2_cdf(4, theta**-2) <= theta**-4 / 8
