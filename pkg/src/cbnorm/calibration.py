"""Choosing the scale ``theta`` for a target underestimation probability ``delta``.

Two routes:

* realizable -- invert a proven bound ``P(T(theta) <= ||A||) <= g(theta)``.
  Vanilla(k) and Dixon have closed forms; Counterbalance uses the
  effective-rank bound ``g_cb(theta, rho)`` maximized over ``rho``.
* oracle -- needs ``||A||``: take the empirical ``delta``-quantile ``q`` of
  the theta-free base statistic and set ``theta = ||A|| / q``.

The Counterbalance bound, with ``c = theta**-2`` and ``chi1`` the
chi-squared(1) distribution function::

    rho >= 7:            c**2 / 8
    1 + c <= rho <= 7:   int_0^c chi1((rho-1) t/(1-t)) p_(1,rho-1)(c - t) dt
    1 <= rho < 1 + c:    int_0^c chi1((rho-1) t/(1-t)) p_(1,0)((c - t)/rho) dt

The last integral is evaluated as written (no ``1/rho`` change-of-variables
factor) unless ``case3_jacobian=True``; the omitted factor only makes the
bound larger. Both integrals use ``t = c sin^2(phi)``, which removes the
inverse-square-root singularity of the density at ``t = c`` and the
square-root cusp of ``chi1`` at ``t = 0``.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .estimators import EstimatorKind, sample_base_values
from .operators import GroundTruth, LinearOperator
from .quadrature import _GAUSS_W, _KRONROD_W, _NODES, integrate
from .rng import RandomSource
from .special import bessel_i0e, chi2_1_cdf, wchi2_pdf_bessel

__all__ = [
    "RHO_CAP",
    "GCurve",
    "CalibrationEntry",
    "CalibrationTable",
    "CalibrationCache",
    "g_cb",
    "g_cb_case",
    "g_cb_sup",
    "g_curve",
    "vanilla_bound",
    "dixon_bound",
    "theta_for_delta",
    "theta_for_bound",
    "oracle_theta",
]

log = logging.getLogger(__name__)

RHO_CAP = 7.0
RHO_GRID_POINTS = 2000
GOLDEN_TOL = 1e-6
QUAD_TOL = 1e-9
THETA_WIDTH = 1e-4
THETA_BRACKET = (1.0, 64.0)

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
_HALF_PI = 0.5 * math.pi


def vanilla_bound(theta: float, k: int = 1) -> float:
    """``(sqrt(2/pi) / theta) ** k``."""
    return min(1.0, (_SQRT_2_OVER_PI / theta) ** k)


def dixon_bound(theta: float) -> float:
    return min(1.0, (2.0 / math.pi) * theta**-3)


def _lemma_term(rho: float, t: np.ndarray) -> np.ndarray:
    # chi1((rho-1) t / (1-t)); the argument is +inf at t = 1 (theta = 1)
    one_minus = 1.0 - t
    if rho == 1.0:
        return np.zeros_like(t)
    with np.errstate(divide="ignore"):
        arg = np.where(one_minus > 0, (rho - 1.0) * t / np.where(one_minus > 0, one_minus, 1.0), np.inf)
    return chi2_1_cdf(arg)


def _case_large_rank(theta: float) -> float:
    return theta**-4 / 8.0


def _case_mid_rank(theta: float, rho: float, tol: float) -> float:
    c = theta**-2
    alpha = rho - 1.0

    def integrand(phi):
        s, co = np.sin(phi), np.cos(phi)
        t = c * s * s
        return _lemma_term(rho, t) * wchi2_pdf_bessel(alpha, c * co * co) * (2.0 * c * s * co)

    return integrate(integrand, 0.0, _HALF_PI, tol=tol)


def _case_low_rank(theta: float, rho: float, tol: float, jacobian: bool) -> float:
    c = theta**-2
    # p_(1,0)((c - t)/rho) dt with t = c sin^2 phi  ->  2 sin(phi) sqrt(c rho / 2 pi) exp(-c cos^2 phi / 2 rho) dphi
    weight = 2.0 * math.sqrt(c * rho / (2.0 * math.pi))

    def integrand(phi):
        s, co = np.sin(phi), np.cos(phi)
        t = c * s * s
        return _lemma_term(rho, t) * weight * s * np.exp(-0.5 * c * co * co / rho)

    value = integrate(integrand, 0.0, _HALF_PI, tol=tol)
    return value / rho if jacobian else value


def g_cb_case(theta: float, rho: float, case: int, tol: float = QUAD_TOL, case3_jacobian: bool = False) -> float:
    """Evaluate one branch of the bound regardless of which ``rho`` range it is meant for.

    ``case`` 1: large-rank closed form, 2: mid-rank integral (needs ``rho > 1``),
    3: low-rank integral.
    """
    if case == 1:
        value = _case_large_rank(theta)
    elif case == 2:
        if rho <= 1.0:
            raise ValueError("the mid-rank branch needs rho > 1")
        value = _case_mid_rank(theta, rho, tol)
    elif case == 3:
        value = _case_low_rank(theta, rho, tol, case3_jacobian)
    else:
        raise ValueError(f"case must be 1, 2 or 3, got {case}")
    return min(1.0, max(0.0, value))


def g_cb(theta: float, rho: float, tol: float = QUAD_TOL, case3_jacobian: bool = False) -> float:
    """Upper bound on ``P(T_cb(theta) <= ||A||)`` for a matrix of effective rank ``rho``."""
    if not theta >= 1.0:
        raise ValueError(f"the bound needs theta >= 1, got {theta}")
    if not rho >= 1.0:
        raise ValueError(f"effective rank is at least 1, got {rho}")
    c = theta**-2
    if rho > RHO_CAP:
        return g_cb_case(theta, rho, 1)
    if rho == RHO_CAP:
        # both branches are valid bounds here
        return min(g_cb_case(theta, rho, 1), g_cb_case(theta, rho, 2, tol))
    if rho >= 1.0 + c:
        return g_cb_case(theta, rho, 2, tol)
    return g_cb_case(theta, rho, 3, tol, case3_jacobian)


def _g_grid(theta: float, rhos: np.ndarray, tol: float, case3_jacobian: bool) -> np.ndarray:
    """``g_cb(theta, rho)`` for many ``rho`` in [1, 7) at once.

    One 21-point Kronrod panel on [0, pi/2] per ``rho`` (same integrands as the
    scalar path); rows whose Kronrod-Gauss difference exceeds ``tol`` are redone
    with the adaptive scalar integrator. Only theta near 1 needs that.
    """
    c = theta**-2
    half = 0.25 * math.pi
    phi = half + half * _NODES
    s, co = np.sin(phi), np.cos(phi)
    t = c * s * s
    r = rhos[:, None]
    one_minus = 1.0 - t
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(one_minus > 0, t / np.where(one_minus > 0, one_minus, 1.0), np.inf)
        arg = np.where(r > 1.0, (r - 1.0) * ratio, 0.0)
    lemma = chi2_1_cdf(arg)

    out = np.empty(rhos.size)
    err = np.empty(rhos.size)
    mid = rhos >= 1.0 + c
    if np.any(mid):
        alpha = rhos[mid][:, None] - 1.0
        u = c * co * co
        z = 0.25 * u * (1.0 / alpha - 1.0)
        dens = np.exp(-0.25 * u * (1.0 + 1.0 / alpha) + np.abs(z)) * bessel_i0e(z).reshape(z.shape) / (2.0 * np.sqrt(alpha))
        f = lemma[mid] * dens * (2.0 * c * s * co)
        out[mid] = half * (f @ _KRONROD_W)
        err[mid] = half * np.abs(f @ (_KRONROD_W - _GAUSS_W))
    low = ~mid
    if np.any(low):
        rl = rhos[low][:, None]
        f = lemma[low] * (2.0 * np.sqrt(c * rl / (2.0 * math.pi))) * s * np.exp(-0.5 * c * co * co / rl)
        k = half * (f @ _KRONROD_W)
        err[low] = half * np.abs(f @ (_KRONROD_W - _GAUSS_W))
        out[low] = k / rhos[low] if case3_jacobian else k
    for i in np.flatnonzero(err > tol):
        out[i] = g_cb(theta, float(rhos[i]), tol, case3_jacobian)
    return np.clip(out, 0.0, 1.0)


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - inv_phi * (b - a)
    x2 = a + inv_phi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv_phi * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv_phi * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def _rho_grid(points: int) -> np.ndarray:
    return np.geomspace(1.0, RHO_CAP, points)


def g_cb_sup(
    theta: float,
    grid_points: int = RHO_GRID_POINTS,
    tol: float = QUAD_TOL,
    case3_jacobian: bool = False,
    return_argmax: bool = False,
):
    """``sup_rho g_cb(theta, rho)``: log-spaced grid on [1, 7] refined by golden section.

    Values for ``rho > 7`` are the closed form ``theta**-4/8``, which is
    included in the maximum.
    """
    grid = _rho_grid(grid_points)

    def g(r):
        return g_cb(theta, r, tol, case3_jacobian)

    values = _g_grid(theta, grid[:-1], tol, case3_jacobian)
    values = np.append(values, g(float(grid[-1])))  # rho = 7 takes the min of two branches
    i = int(np.argmax(values))
    best_rho, best = float(grid[i]), float(values[i])
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    if hi > lo:
        rho_star, refined = _golden_max(g, float(lo), float(hi), GOLDEN_TOL)
        if refined > best:
            best_rho, best = rho_star, refined
    tail = _case_large_rank(theta)
    if tail > best:
        best_rho, best = math.inf, tail
    return (best, best_rho) if return_argmax else best


@dataclass(frozen=True)
class GCurve:
    theta_grid: tuple[float, ...]
    g_values: tuple[float, ...]
    rho_cap: float = RHO_CAP


def g_curve(thetas, **kwargs) -> GCurve:
    thetas = sorted(float(t) for t in thetas)
    return GCurve(tuple(thetas), tuple(g_cb_sup(t, **kwargs) for t in thetas))


@dataclass(frozen=True)
class CalibrationEntry:
    delta: float
    kind: str
    theta: float
    method: str  # closed_form | numeric_inversion | oracle_mc | override

    def to_dict(self) -> dict:
        return asdict(self)


class CalibrationTable:
    def __init__(self, entries=()):
        self.entries: list[CalibrationEntry] = list(entries)

    def add(self, entry: CalibrationEntry) -> None:
        self.entries.append(entry)

    def lookup(self, kind: str, delta: float) -> CalibrationEntry:
        for e in self.entries:
            if e.kind == kind and e.delta == delta:
                return e
        raise KeyError((kind, delta))

    def to_json(self, indent: int | None = None) -> str:
        return json.dumps([e.to_dict() for e in self.entries], indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "CalibrationTable":
        return cls(CalibrationEntry(**item) for item in json.loads(text))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def _check_delta(delta: float) -> None:
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def theta_for_bound(bound, delta: float, width: float = THETA_WIDTH, bracket=THETA_BRACKET) -> float:
    """Smallest grid-resolved ``theta`` with ``bound(theta) <= delta`` (bisection, ``bound`` decreasing).

    Returns the upper end of the final bracket, so ``bound(theta) <= delta`` holds.
    """
    _check_delta(delta)
    lo, hi = bracket
    lo_checked = False
    while bound(hi) > delta:
        lo, hi = hi, 2.0 * hi
        lo_checked = True
        if hi > 1e8:
            raise RuntimeError("could not bracket theta")
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if bound(mid) <= delta:
            hi = mid
        else:
            lo = mid
            lo_checked = True
    # the bracket's lower end is only evaluated if the answer sits next to it
    # (near theta = 1 the rho scan is slow)
    if not lo_checked and bound(lo) <= delta:
        return lo
    return hi


def theta_for_delta(kind: EstimatorKind, delta: float, case3_jacobian: bool = False, **sup_kwargs) -> CalibrationEntry:
    """Realizable ``theta`` guaranteeing underestimation probability at most ``delta``."""
    _check_delta(delta)
    if kind.name == "vanilla":
        theta = _SQRT_2_OVER_PI * delta ** (-1.0 / kind.k)
        return CalibrationEntry(delta, kind.label, theta, "closed_form")
    if kind.name == "dixon":
        theta = (2.0 / (math.pi * delta)) ** (1.0 / 3.0)
        return CalibrationEntry(delta, kind.label, theta, "closed_form")
    theta = theta_for_bound(lambda t: g_cb_sup(t, case3_jacobian=case3_jacobian, **sup_kwargs), delta)
    return CalibrationEntry(delta, kind.label, theta, "numeric_inversion")


def _default_cache_dir() -> Path:
    env = os.environ.get("CBNORM_CACHE_DIR")
    if env:
        return Path(env)
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "cbnorm"


class CalibrationCache:
    """JSON store of numerically inverted thetas.

    Keys carry the package version, the rho-grid size, the quadrature
    tolerance and the bisection width, so a change to any of them misses.
    """

    def __init__(self, directory: str | os.PathLike | None = None):
        self.path = Path(directory or _default_cache_dir()) / "calibration.json"

    @staticmethod
    def key(kind: str, delta: float, case3_jacobian: bool = False) -> str:
        return (
            f"v{__version__}|grid={RHO_GRID_POINTS}|tol={QUAD_TOL:g}|width={THETA_WIDTH:g}"
            f"|jac={int(case3_jacobian)}|{kind}|{delta!r}"
        )

    def _load(self) -> dict:
        try:
            return json.loads(self.path.read_text())
        except (FileNotFoundError, json.JSONDecodeError):
            return {}

    def get(self, kind: str, delta: float, case3_jacobian: bool = False) -> float | None:
        return self._load().get(self.key(kind, delta, case3_jacobian))

    def put(self, kind: str, delta: float, theta: float, case3_jacobian: bool = False) -> None:
        data = self._load()
        data[self.key(kind, delta, case3_jacobian)] = theta
        self.path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
        tmp.replace(self.path)

    def theta_for_delta(self, kind: EstimatorKind, delta: float, case3_jacobian: bool = False) -> CalibrationEntry:
        if kind.name != "counterbalance":
            return theta_for_delta(kind, delta)
        cached = self.get(kind.label, delta, case3_jacobian)
        if cached is not None:
            return CalibrationEntry(delta, kind.label, cached, "numeric_inversion")
        entry = theta_for_delta(kind, delta, case3_jacobian)
        self.put(kind.label, delta, entry.theta, case3_jacobian)
        return entry


def oracle_theta(
    op: LinearOperator,
    truth: GroundTruth,
    kind: EstimatorKind,
    delta: float,
    n_trials: int,
    rng: RandomSource,
) -> float:
    """Theta making the empirical underestimation frequency equal ``delta``.

    Uses theta-linearity: with base values ``S`` (theta = 1), ``theta S <= ||A||``
    iff ``S <= ||A|| / theta``, so ``theta = ||A|| / quantile(S, delta)``
    (linear interpolation between order statistics). Trials use streams
    ``rng.stream_id, rng.stream_id + 1, ...``.
    """
    _check_delta(delta)
    if n_trials < math.ceil(10.0 / delta):
        raise ValueError(f"need at least {math.ceil(10.0 / delta)} trials for delta={delta}, got {n_trials}")
    streams = np.arange(rng.stream_id, rng.stream_id + n_trials)
    values = sample_base_values(op, kind, rng.seed, streams)
    bad = np.isnan(values)
    if bad.sum() > 1e-3 * n_trials:
        raise RuntimeError(
            f"{int(bad.sum())} of {n_trials} draws were degenerate (||A X_1|| = 0); "
            "the operator is probably zero"
        )
    q = float(np.quantile(values[~bad], delta))
    if q <= 0:
        raise RuntimeError("delta-quantile of the base statistic is zero")
    return truth.spectral_norm / q
