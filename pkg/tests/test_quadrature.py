import math

import numpy as np
import pytest

from cbnorm.quadrature import IntegrationError, gauss_kronrod_21, integrate


@pytest.mark.parametrize("degree", [0, 1, 5, 17, 31])
def test_single_panel_exact_for_polynomials(degree):
    value, err = gauss_kronrod_21(lambda x: x**degree, 0.0, 2.0)
    assert value == pytest.approx(2.0 ** (degree + 1) / (degree + 1), rel=1e-14)


def test_known_integrals():
    assert integrate(np.exp, 0.0, 1.0) == pytest.approx(math.e - 1.0, abs=1e-12)
    assert integrate(lambda x: 1 / (1 + x) ** 2, 0.0, 50.0) == pytest.approx(50 / 51, abs=1e-10)
    assert integrate(lambda x: 2 / np.sqrt(np.pi) * np.exp(-x * x), 0.0, 8.0) == pytest.approx(1.0, abs=1e-12)


def test_square_root_cusp_converges():
    # sqrt is not smooth at 0; bisection toward the cusp still meets the tolerance
    assert integrate(np.sqrt, 0.0, 1.0, tol=1e-10) == pytest.approx(2.0 / 3.0, abs=1e-10)


def test_sharp_peak():
    f = lambda x: 1e-3 / (x * x + 1e-6)
    exact = 2.0 * math.atan(1.0 / 1e-3)
    assert integrate(f, -1.0, 1.0, tol=1e-9, max_subdivisions=2000) == pytest.approx(exact, abs=1e-8)


def test_empty_interval():
    assert integrate(np.exp, 1.0, 1.0) == 0.0


def test_non_finite_integrand_raises():
    with pytest.raises(IntegrationError):
        integrate(lambda x: 1.0 / x, 0.0, 1.0)


def test_non_convergence_raises_with_estimate():
    with pytest.raises(IntegrationError) as info:
        integrate(lambda x: np.sin(1.0 / (x + 1e-4)), 0.0, 1.0, tol=1e-14, max_subdivisions=20)
    assert math.isfinite(info.value.estimate)


def test_bad_limits():
    with pytest.raises(ValueError):
        integrate(np.exp, 1.0, 0.0)
    with pytest.raises(ValueError):
        integrate(np.exp, 0.0, math.inf)
