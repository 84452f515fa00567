"""Randomized upper-bound statistics for the spectral norm.

Every statistic is ``theta`` times a theta-free base value computed from a
few matvecs with Gaussian test vectors:

* Vanilla(k):      max_i ||A X_i||                        (k matvecs, depth 1)
* Dixon:           max(sqrt(||A^T A X_1||), ||A X_2||)    (3 matvecs, depth 2)
* Counterbalance:  sqrt((||A^T A X_1|| / ||A X_1||)^2 + ||A X_2||^2)
                                                          (3 matvecs, depth 2)

Test vectors for a trial come from ``RandomSource(seed, stream_id)``: the
first rows of ``gaussian_vectors`` are ``X_1``, then ``X_2`` (or ``X_1..X_k``).
The single-trial functions and :func:`sample_base_values` draw identically.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .operators import CapabilityError, LinearOperator
from .rng import RandomSource

__all__ = [
    "EstimatorKind",
    "EstimatorReport",
    "DegenerateDrawError",
    "vanilla",
    "dixon",
    "counterbalance",
    "power_ratio",
    "estimate",
    "sample_base_values",
]


@dataclass(frozen=True)
class EstimatorKind:
    name: str
    k: int = 3

    def __post_init__(self):
        if self.name not in ("vanilla", "dixon", "counterbalance"):
            raise ValueError(f"unknown estimator {self.name!r}")
        if self.name == "vanilla":
            if self.k < 1:
                raise ValueError("Vanilla needs k >= 1")
        else:
            object.__setattr__(self, "k", 3)

    @classmethod
    def vanilla(cls, k: int = 3) -> "EstimatorKind":
        return cls("vanilla", k)

    @classmethod
    def dixon(cls) -> "EstimatorKind":
        return cls("dixon")

    @classmethod
    def counterbalance(cls) -> "EstimatorKind":
        return cls("counterbalance")

    @classmethod
    def parse(cls, text: str) -> "EstimatorKind":
        """Accepts ``counterbalance``/``cb``, ``dixon``, ``vanilla`` (k=3) or ``vanilla<k>``."""
        text = text.strip().lower()
        if text in ("counterbalance", "cb"):
            return cls.counterbalance()
        if text == "dixon":
            return cls.dixon()
        match = re.fullmatch(r"vanilla(\d*)", text)
        if match:
            return cls.vanilla(int(match.group(1)) if match.group(1) else 3)
        raise ValueError(f"unknown estimator kind {text!r}")

    @property
    def label(self) -> str:
        return f"vanilla{self.k}" if self.name == "vanilla" else self.name

    @property
    def matvec_count(self) -> int:
        return self.k if self.name == "vanilla" else 3

    @property
    def sequential_depth(self) -> int:
        return 1 if self.name == "vanilla" else 2

    @property
    def needs_adjoint(self) -> bool:
        return self.name != "vanilla"

    @property
    def vectors_per_trial(self) -> int:
        return self.k if self.name == "vanilla" else 2

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class EstimatorReport:
    value: float
    theta: float
    matvec_count: int
    sequential_depth: int
    seed: int
    stream_id: int
    kind: EstimatorKind

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.label,
            "value": self.value,
            "theta": self.theta,
            "matvec_count": self.matvec_count,
            "sequential_depth": self.sequential_depth,
            "seed": self.seed,
            "stream_id": self.stream_id,
        }


class DegenerateDrawError(RuntimeError):
    """``||A X_1|| = 0``: the power ratio is undefined for this draw."""

    def __init__(self, seed: int, stream_ids):
        self.seed = seed
        self.stream_ids = list(stream_ids)
        shown = ", ".join(str(s) for s in self.stream_ids[:10])
        more = "" if len(self.stream_ids) <= 10 else f" (+{len(self.stream_ids) - 10} more)"
        super().__init__(f"degenerate draw ||A X_1|| = 0 for seed {seed}, stream(s) {shown}{more}")


def _require_adjoint(op: LinearOperator, name: str) -> None:
    if not op.adjoint_available:
        raise CapabilityError(f"{name} estimator needs adjoint products A^T y, which this operator lacks")


def _check_theta(theta: float, minimum: float = 0.0) -> None:
    if not (math.isfinite(theta) and theta >= minimum):
        raise ValueError(f"theta must be finite and >= {minimum}, got {theta}")


def _report(value, theta, kind, rng) -> EstimatorReport:
    return EstimatorReport(
        value=float(value),
        theta=float(theta),
        matvec_count=kind.matvec_count,
        sequential_depth=kind.sequential_depth,
        seed=rng.seed,
        stream_id=rng.stream_id,
        kind=kind,
    )


def vanilla(op: LinearOperator, theta: float, k: int, rng: RandomSource) -> EstimatorReport:
    _check_theta(theta)
    kind = EstimatorKind.vanilla(k)
    xs = rng.gaussian_vectors(k, op.cols)
    base = max(float(np.linalg.norm(op.matvec(x))) for x in xs)
    return _report(theta * base, theta, kind, rng)


def dixon(op: LinearOperator, theta: float, rng: RandomSource) -> EstimatorReport:
    _check_theta(theta)
    _require_adjoint(op, "Dixon")
    x1, x2 = rng.gaussian_vectors(2, op.cols)
    y1 = op.matvec(x1)
    z = op.rmatvec(y1)
    y2 = op.matvec(x2)
    base = max(math.sqrt(float(np.linalg.norm(z))), float(np.linalg.norm(y2)))
    return _report(theta * base, theta, EstimatorKind.dixon(), rng)


def _ratio(op: LinearOperator, x: np.ndarray, rng: RandomSource) -> float:
    y = op.matvec(x)
    ny = float(np.linalg.norm(y))
    if ny == 0.0:
        raise DegenerateDrawError(rng.seed, [rng.stream_id])
    return float(np.linalg.norm(op.rmatvec(y))) / ny


def counterbalance(op: LinearOperator, theta: float, rng: RandomSource) -> EstimatorReport:
    _check_theta(theta, 1.0)
    _require_adjoint(op, "Counterbalance")
    x1, x2 = rng.gaussian_vectors(2, op.cols)
    ratio = _ratio(op, x1, rng)
    ny2 = float(np.linalg.norm(op.matvec(x2)))
    return _report(theta * math.hypot(ratio, ny2), theta, EstimatorKind.counterbalance(), rng)


def power_ratio(op: LinearOperator, rng: RandomSource) -> float:
    """``||A^T A Y|| / ||A Y||`` for one Gaussian ``Y``; never exceeds ``||A||``."""
    _require_adjoint(op, "power-ratio")
    (y,) = rng.gaussian_vectors(1, op.cols)
    return _ratio(op, y, rng)


def estimate(op: LinearOperator, kind: EstimatorKind, theta: float, rng: RandomSource) -> EstimatorReport:
    if kind.name == "vanilla":
        return vanilla(op, theta, kind.k, rng)
    if kind.name == "dixon":
        return dixon(op, theta, rng)
    return counterbalance(op, theta, rng)


def _stacked_vectors(op: LinearOperator, count: int, seed: int, stream_ids) -> np.ndarray:
    # (count, cols, n_streams): slab j holds X_{j+1} for every stream
    out = np.empty((count, op.cols, len(stream_ids)))
    for col, sid in enumerate(stream_ids):
        out[:, :, col] = RandomSource(seed, int(sid)).gaussian_vectors(count, op.cols)
    return out


def sample_base_values(op: LinearOperator, kind: EstimatorKind, seed: int, stream_ids) -> np.ndarray:
    """Theta-free base statistic for each stream, batched through ``matmat``.

    Counterbalance draws with ``||A X_1|| = 0`` come back as NaN so the caller
    can decide whether to redraw or abort.
    """
    stream_ids = np.asarray(stream_ids, dtype=np.int64)
    n = stream_ids.size
    if kind.needs_adjoint:
        _require_adjoint(op, kind.label)
    xs = _stacked_vectors(op, kind.vectors_per_trial, seed, stream_ids)
    if kind.name == "vanilla":
        ys = op.matmat(xs.transpose(1, 0, 2).reshape(op.cols, kind.k * n))
        norms = np.linalg.norm(ys, axis=0).reshape(kind.k, n)
        return norms.max(axis=0)
    ys = op.matmat(np.concatenate([xs[0], xs[1]], axis=1))
    y1, y2 = ys[:, :n], ys[:, n:]
    nz = np.linalg.norm(op.rmatmat(y1), axis=0)
    ny1 = np.linalg.norm(y1, axis=0)
    ny2 = np.linalg.norm(y2, axis=0)
    if kind.name == "dixon":
        return np.maximum(np.sqrt(nz), ny2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(ny1 > 0, nz / ny1, np.nan)
    return np.hypot(ratio, ny2)


def sample_power_ratios(op: LinearOperator, seed: int, stream_ids) -> np.ndarray:
    """Batched :func:`power_ratio` (NaN for degenerate draws)."""
    _require_adjoint(op, "power-ratio")
    stream_ids = np.asarray(stream_ids, dtype=np.int64)
    xs = _stacked_vectors(op, 1, seed, stream_ids)[0]
    ys = op.matmat(xs)
    ny = np.linalg.norm(ys, axis=0)
    nz = np.linalg.norm(op.rmatmat(ys), axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(ny > 0, nz / ny, np.nan)
