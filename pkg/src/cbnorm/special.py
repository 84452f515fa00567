"""Probability kernels: error function, chi-squared and weighted chi-squared laws.

Everything here is implemented from series and continued fractions so the
numerical core does not lean on an external special-function library. The
functions accept scalars or numpy arrays unless noted otherwise.

The weighted law ``chi2_(1,alpha)`` is the distribution of ``xi**2 + alpha*eta**2``
for independent standard normals ``xi`` and ``eta``.
"""

from __future__ import annotations

import math

import numpy as np

from .quadrature import integrate

__all__ = [
    "erf",
    "erfc",
    "std_normal_cdf",
    "std_normal_pdf",
    "gammainc_lower",
    "chi2_cdf",
    "chi2_pdf",
    "chi2_1_cdf",
    "chi2_1_pdf",
    "bessel_i0e",
    "wchi2_cdf",
    "wchi2_pdf",
    "wchi2_pdf_bessel",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_PI = math.sqrt(math.pi)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

_ERF_SWITCH = 3.0  # series below, continued fraction above
_SERIES_TERMS = 80
_CF_TERMS = 60


def _erf_series(x: np.ndarray) -> np.ndarray:
    # erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n x / (1*3*...*(2n+1)); all terms positive
    x2 = x * x
    term = x.copy()
    total = x.copy()
    for n in range(1, _SERIES_TERMS):
        term = term * (2.0 * x2) / (2 * n + 1)
        total = total + term
    return 2.0 / _SQRT_PI * np.exp(-x2) * total


def _erfc_cf(x: np.ndarray) -> np.ndarray:
    # erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))), x > 0
    tail = x.copy()
    for n in range(_CF_TERMS, 0, -1):
        tail = x + (0.5 * n) / tail
    return np.exp(-x * x) / (_SQRT_PI * tail)


def _erfc_nonneg(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    small = x < _ERF_SWITCH
    out[small] = 1.0 - _erf_series(x[small])
    out[~small] = _erfc_cf(x[~small])
    return out


def erfc(x):
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ax = np.abs(x)
    out = _erfc_nonneg(ax)
    out = np.where(x < 0, 2.0 - out, out)
    return float(out[0]) if scalar else out


def erf(x):
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    ax = np.abs(x)
    out = np.empty_like(ax)
    small = ax < _ERF_SWITCH
    out[small] = _erf_series(ax[small])
    out[~small] = 1.0 - _erfc_cf(ax[~small])
    out = np.copysign(out, x)
    return float(out[0]) if scalar else out


def std_normal_cdf(x):
    """Standard normal distribution function."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


def _check_nonneg(name: str, value) -> None:
    if np.any(np.asarray(value) < 0):
        raise ValueError(f"{name} must be >= 0, got {value}")


def _gammainc_scalar(a: float, x: float) -> float:
    if x == 0.0:
        return 0.0
    log_prefactor = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        # series: P(a, x) = x^a e^-x / Gamma(a+1) * sum x^n / ((a+1)...(a+n))
        term = 1.0 / a
        total = term
        ap = a
        for _ in range(1000):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * 1e-17:
                break
        return min(1.0, total * math.exp(log_prefactor))
    # modified Lentz for Q(a, x)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 1000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return max(0.0, 1.0 - math.exp(log_prefactor) * h)


def gammainc_lower(a: float, x):
    """Regularized lower incomplete gamma function P(a, x)."""
    if a <= 0:
        raise ValueError(f"shape a must be positive, got {a}")
    _check_nonneg("x", x)
    if np.ndim(x) == 0:
        return _gammainc_scalar(float(a), float(x))
    return np.array([_gammainc_scalar(float(a), float(v)) for v in np.ravel(x)]).reshape(np.shape(x))


def chi2_cdf(k: int, t):
    """Distribution function of the chi-squared law with ``k`` degrees of freedom."""
    if k < 1 or int(k) != k:
        raise ValueError(f"degrees of freedom must be a positive integer, got {k}")
    _check_nonneg("t", t)
    if k == 1:
        return chi2_1_cdf(t)
    if k == 2:
        return -np.expm1(-0.5 * np.asarray(t, dtype=float)) if np.ndim(t) else -math.expm1(-0.5 * t)
    return gammainc_lower(0.5 * k, 0.5 * np.asarray(t, dtype=float) if np.ndim(t) else 0.5 * t)


def chi2_pdf(k: int, t):
    t = np.asarray(t, dtype=float)
    half = 0.5 * k
    with np.errstate(divide="ignore"):
        return np.exp((half - 1.0) * np.log(t) - 0.5 * t - half * math.log(2.0) - math.lgamma(half))


def chi2_1_cdf(t):
    """P(xi^2 <= t) = erf(sqrt(t/2)); negative arguments map to 0."""
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    return erf(np.sqrt(0.5 * t))


def chi2_1_pdf(t):
    t = np.asarray(t, dtype=float)
    return np.exp(-0.5 * t) / np.sqrt(2.0 * math.pi * t)


def bessel_i0e(z):
    """Exponentially scaled modified Bessel function ``exp(-|z|) * I0(z)``."""
    z = np.abs(np.atleast_1d(np.asarray(z, dtype=float)))
    out = np.empty_like(z)
    small = z <= 30.0
    zs = z[small]
    q = 0.25 * zs * zs
    term = np.ones_like(zs)
    total = np.ones_like(zs)
    for k in range(1, 120):
        term = term * q / (k * k)
        total = total + term
    out[small] = total * np.exp(-zs)
    zl = z[~small]
    # I0(z) ~ e^z / sqrt(2 pi z) * sum_k prod_{j<=k} (2j-1)^2 / (k! (8z)^k)
    term = np.ones_like(zl)
    total = np.ones_like(zl)
    for k in range(1, 16):
        term = term * (2 * k - 1) ** 2 / (k * 8.0 * zl)
        total = total + term
    out[~small] = total / np.sqrt(2.0 * math.pi * zl)
    return out


def wchi2_pdf_bessel(alpha: float, t):
    """Closed form density of ``xi^2 + alpha*eta^2`` via ``I0`` (alpha > 0, t > 0).

    p(t) = exp(-t(1 + 1/alpha)/4) * I0(t(1/alpha - 1)/4) / (2 sqrt(alpha))
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive for the closed form, got {alpha}")
    t = np.asarray(t, dtype=float)
    z = 0.25 * t * (1.0 / alpha - 1.0)
    exponent = -0.25 * t * (1.0 + 1.0 / alpha) + np.abs(z)
    out = np.exp(exponent) * bessel_i0e(z).reshape(np.shape(t)) / (2.0 * math.sqrt(alpha))
    return float(out) if np.ndim(out) == 0 else out


def _wchi2_pdf_scalar(alpha: float, t: float, tol: float) -> float:
    # convolution int_0^t f1(s) f1((t-s)/alpha)/alpha ds with s = t sin^2(phi):
    # both inverse-sqrt endpoint singularities cancel against the Jacobian,
    # leaving exp(-t sin^2/2 - t cos^2/(2 alpha)) / (pi sqrt(alpha)) on [0, pi/2].
    scale = 1.0 / (math.pi * math.sqrt(alpha))

    def integrand(phi):
        s2 = np.sin(phi) ** 2
        return np.exp(-0.5 * t * s2 - 0.5 * t * (1.0 - s2) / alpha)

    return scale * integrate(integrand, 0.0, 0.5 * math.pi, tol=tol / scale)


def wchi2_pdf(alpha: float, t, tol: float = 1e-11):
    """Density ``p_(1,alpha)(t)`` of ``xi^2 + alpha*eta^2``.

    ``alpha = 0`` reduces to the chi-squared(1) density. For ``alpha > 0`` the
    convolution of the two scaled chi-squared(1) densities is integrated
    numerically.
    """
    _check_nonneg("alpha", alpha)
    if np.any(np.asarray(t) <= 0):
        raise ValueError("density argument must be positive")
    if alpha == 0:
        out = chi2_1_pdf(t)
        return float(out) if np.ndim(out) == 0 else out
    if np.ndim(t) == 0:
        return _wchi2_pdf_scalar(float(alpha), float(t), tol)
    return np.array([_wchi2_pdf_scalar(float(alpha), float(v), tol) for v in np.ravel(t)]).reshape(np.shape(t))


def _wchi2_cdf_scalar(alpha: float, t: float, tol: float) -> float:
    if t == 0.0:
        return 0.0
    eta_max = math.sqrt(t / alpha)
    root = math.sqrt(0.5 * t)

    # P = 2 int_0^{eta_max} phi(eta) chi2_1(t - alpha eta^2) d eta, with eta = eta_max sin(psi)
    def integrand(psi):
        return 2.0 * std_normal_pdf(eta_max * np.sin(psi)) * erf(root * np.cos(psi)) * eta_max * np.cos(psi)

    return min(1.0, integrate(integrand, 0.0, 0.5 * math.pi, tol=tol))


def wchi2_cdf(alpha: float, t, tol: float = 1e-11):
    """Distribution function ``chi2_(1,alpha)(t) = P(xi^2 + alpha*eta^2 <= t)``."""
    _check_nonneg("alpha", alpha)
    _check_nonneg("t", t)
    if alpha == 0:
        out = chi2_1_cdf(t)
        return float(out) if np.ndim(out) == 0 else out
    if np.ndim(t) == 0:
        return _wchi2_cdf_scalar(float(alpha), float(t), tol)
    return np.array([_wchi2_cdf_scalar(float(alpha), float(v), tol) for v in np.ravel(t)]).reshape(np.shape(t))
