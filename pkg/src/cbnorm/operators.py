"""Matrix-free operators, the test-matrix zoo and dense ground truth.

Estimators only ever touch an operator through ``matvec``/``rmatvec`` (or the
batched ``matmat``/``rmatmat``); ``shape`` and ``adjoint_available`` complete
the contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import expm, haar_orthonormal, jacobi_svd

__all__ = [
    "ContractViolation",
    "CapabilityError",
    "LinearOperator",
    "DenseOperator",
    "CountingOperator",
    "FrechetExpmOperator",
    "SpectrumSpec",
    "GroundTruth",
    "make_dense_operator",
    "gen_synthetic",
    "hilbert_matrix",
    "hilbert_operator",
    "frechet_expm_operator",
    "frechet_ground_truth",
    "dense_svd",
]


class ContractViolation(ValueError):
    """An operator was applied to a vector of the wrong length."""


class CapabilityError(RuntimeError):
    """The operator lacks a capability (typically the adjoint) an algorithm needs."""


class LinearOperator:
    """Base class: subclasses implement ``_matvec`` and optionally ``_rmatvec``.

    ``matmat``/``rmatmat`` act column-wise on a ``(dim, count)`` block; the
    default loops over columns, subclasses override with something faster.
    """

    adjoint_available: bool = False

    def __init__(self, rows: int, cols: int):
        if rows < 1 or cols < 1:
            raise ValueError(f"operator dimensions must be positive, got {rows}x{cols}")
        self.rows = int(rows)
        self.cols = int(cols)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def _check(self, x: np.ndarray, expected: int, what: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != expected:
            raise ContractViolation(
                f"{type(self).__name__} {what}: expected leading dimension {expected}, got {x.shape[0]}"
            )
        return x

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x, self.cols, "apply")
        if x.ndim != 1:
            raise ContractViolation(f"apply expects a vector, got shape {x.shape}")
        return self._matvec(x)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        if not self.adjoint_available:
            raise CapabilityError(f"{type(self).__name__} has no adjoint")
        y = self._check(y, self.rows, "adjoint-apply")
        if y.ndim != 1:
            raise ContractViolation(f"adjoint-apply expects a vector, got shape {y.shape}")
        return self._rmatvec(y)

    def matmat(self, x: np.ndarray) -> np.ndarray:
        x = self._check(x, self.cols, "apply")
        return self._matmat(x)

    def rmatmat(self, y: np.ndarray) -> np.ndarray:
        if not self.adjoint_available:
            raise CapabilityError(f"{type(self).__name__} has no adjoint")
        y = self._check(y, self.rows, "adjoint-apply")
        return self._rmatmat(y)

    def _matvec(self, x):
        raise NotImplementedError

    def _rmatvec(self, y):
        raise NotImplementedError

    def _matmat(self, x):
        return np.column_stack([self._matvec(x[:, j]) for j in range(x.shape[1])])

    def _rmatmat(self, y):
        return np.column_stack([self._rmatvec(y[:, j]) for j in range(y.shape[1])])

    def __repr__(self):
        return f"<{type(self).__name__} {self.rows}x{self.cols}>"


class DenseOperator(LinearOperator):
    adjoint_available = True

    def __init__(self, matrix: np.ndarray, adjoint: bool = True):
        matrix = np.array(matrix, dtype=float, copy=True)
        if matrix.ndim != 2:
            raise ValueError(f"dense operator needs a 2-D array, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("dense operator entries must be finite")
        super().__init__(*matrix.shape)
        matrix.setflags(write=False)
        self.matrix = matrix
        self.adjoint_available = adjoint

    def _matvec(self, x):
        return self.matrix @ x

    def _rmatvec(self, y):
        return self.matrix.T @ y

    def _matmat(self, x):
        return self.matrix @ x

    def _rmatmat(self, y):
        return self.matrix.T @ y


class CountingOperator(LinearOperator):
    """Wraps an operator and counts applies and adjoint-applies (per column)."""

    def __init__(self, inner: LinearOperator):
        super().__init__(inner.rows, inner.cols)
        self.inner = inner
        self.adjoint_available = inner.adjoint_available
        self.applies = 0
        self.adjoint_applies = 0

    @property
    def total(self) -> int:
        return self.applies + self.adjoint_applies

    def _matvec(self, x):
        self.applies += 1
        return self.inner.matvec(x)

    def _rmatvec(self, y):
        self.adjoint_applies += 1
        return self.inner.rmatvec(y)

    def _matmat(self, x):
        self.applies += x.shape[1]
        return self.inner.matmat(x)

    def _rmatmat(self, y):
        self.adjoint_applies += y.shape[1]
        return self.inner.rmatmat(y)


def make_dense_operator(matrix: np.ndarray) -> DenseOperator:
    return DenseOperator(matrix)


@dataclass(frozen=True)
class GroundTruth:
    spectral_norm: float
    frobenius_norm: float
    effective_rank: float
    singular_values: tuple[float, ...] = field(repr=False)

    @classmethod
    def from_singular_values(cls, values) -> "GroundTruth":
        sv = np.sort(np.abs(np.asarray(values, dtype=float)))[::-1]
        if sv.size == 0 or sv[0] <= 0:
            raise ValueError("ground truth needs at least one positive singular value")
        fro2 = float(np.sum(sv * sv))
        top = float(sv[0])
        return cls(
            spectral_norm=top,
            frobenius_norm=math.sqrt(fro2),
            effective_rank=fro2 / (top * top),
            singular_values=tuple(float(s) for s in sv),
        )

    def to_dict(self, include_singular_values: bool = True) -> dict:
        out = {
            "spectral_norm": self.spectral_norm,
            "frobenius_norm": self.frobenius_norm,
            "effective_rank": self.effective_rank,
        }
        if include_singular_values:
            out["singular_values"] = list(self.singular_values)
        return out


@dataclass(frozen=True)
class SpectrumSpec:
    """Nonzero singular values of a synthetic ``rows x cols`` matrix."""

    singular_values: tuple[float, ...]
    rows: int
    cols: int

    def __post_init__(self):
        sv = tuple(float(s) for s in self.singular_values)
        object.__setattr__(self, "singular_values", sv)
        if not sv:
            raise ValueError("spectrum needs at least one singular value")
        if any(not math.isfinite(s) or s <= 0 for s in sv):
            raise ValueError(f"singular values must be positive and finite: {sv}")
        if any(a < b for a, b in zip(sv, sv[1:])):
            raise ValueError(f"singular values must be nonincreasing: {sv}")
        if self.rows < 1 or self.cols < 1:
            raise ValueError("shape must be positive")
        if len(sv) > min(self.rows, self.cols):
            raise ValueError(
                f"{len(sv)} singular values do not fit a {self.rows}x{self.cols} matrix"
            )

    @property
    def effective_rank(self) -> float:
        sv = np.asarray(self.singular_values)
        return float(np.sum(sv * sv) / sv[0] ** 2)


def gen_synthetic(spec: SpectrumSpec, seed: int) -> tuple[DenseOperator, GroundTruth]:
    """``A = U diag(sigma) V^T`` with Haar orthonormal ``U``, ``V``."""
    rng = np.random.default_rng(seed)
    k = len(spec.singular_values)
    u = haar_orthonormal(spec.rows, k, rng)
    v = haar_orthonormal(spec.cols, k, rng)
    matrix = (u * np.asarray(spec.singular_values)) @ v.T
    return DenseOperator(matrix), GroundTruth.from_singular_values(spec.singular_values)


def hilbert_matrix(n: int, convention: str = "classical") -> np.ndarray:
    """``classical``: 1/(i+j-1) with 1-based indices; ``shifted``: 1/(i+j)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    offset = {"classical": 1.0, "shifted": 0.0}.get(convention)
    if offset is None:
        raise ValueError(f"unknown Hilbert convention {convention!r}")
    idx = np.arange(1, n + 1, dtype=float)
    return 1.0 / (idx[:, None] + idx[None, :] - offset)


def hilbert_operator(n: int, convention: str = "classical") -> DenseOperator:
    return DenseOperator(hilbert_matrix(n, convention))


def _laplacian_1d(n: int) -> np.ndarray:
    h2 = 1.0 / (n - 1) ** 2
    return h2 * (2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1))


def _exp_divided_differences(lam: np.ndarray) -> np.ndarray:
    # (e^a - e^b)/(a - b) = e^{(a+b)/2} sinh(d)/d with d = (a-b)/2; -> e^a as a -> b
    a = lam[:, None]
    b = lam[None, :]
    d = 0.5 * (a - b)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.abs(d) > 1e-8, np.sinh(d) / d, 1.0 + d * d / 6.0)
    return np.exp(0.5 * (a + b)) * ratio


class FrechetExpmOperator(LinearOperator):
    """The Frechet derivative ``X -> D exp{H}(X)`` acting on vectorized ``N x N`` matrices.

    ``H = scale * (I kron T + T kron I)`` with ``T`` the ``n x n`` tridiagonal
    ``(2, -1)/(n-1)^2`` stencil, so ``N = n^2`` and the operator is
    ``N^2 x N^2``. ``matvec`` reads the derivative off the top-right block of
    ``expm([[H, X], [0, H]])``. ``matmat`` uses the eigendecomposition of the
    symmetric ``H`` instead, which is the same linear map and much cheaper for
    large blocks of vectors.
    """

    adjoint_available = True

    def __init__(self, n: int, scale: float = -0.01, check_adjoint: bool = True):
        if n < 2:
            raise ValueError("n must be >= 2")
        t = _laplacian_1d(n)
        eye = np.eye(n)
        h = scale * (np.kron(eye, t) + np.kron(t, eye))
        self.n = n
        self.scale = scale
        self.block = n * n
        super().__init__(self.block**2, self.block**2)
        self.h = h
        lam, q = np.linalg.eigh(h)
        self._eigvals = lam
        self._eigvecs = q
        self._divided = _exp_divided_differences(lam)
        if check_adjoint:
            self._assert_self_adjoint()

    def _block_derivative(self, h: np.ndarray, x: np.ndarray) -> np.ndarray:
        size = self.block
        big = np.zeros((2 * size, 2 * size))
        big[:size, :size] = h
        big[size:, size:] = h
        big[:size, size:] = x.reshape(size, size)
        return expm(big)[:size, size:].ravel()

    def _matvec(self, x):
        return self._block_derivative(self.h, x)

    def _rmatvec(self, y):
        # adjoint under the trace inner product is the derivative at H^T
        return self._block_derivative(self.h.T, y)

    def _spectral_apply(self, x: np.ndarray) -> np.ndarray:
        size = self.block
        count = x.shape[1]
        q = self._eigvecs
        mats = x.T.reshape(count, size, size)
        inner = q.T @ mats @ q
        out = q @ (inner * self._divided) @ q.T
        return out.reshape(count, size * size).T

    def _matmat(self, x):
        return self._spectral_apply(x)

    def _rmatmat(self, y):
        # H symmetric (checked at construction), so the map is self-adjoint
        return self._spectral_apply(y)

    def _assert_self_adjoint(self):
        if not np.allclose(self.h, self.h.T, rtol=0, atol=0):
            raise AssertionError("H must be symmetric for the Frechet operator")
        rng = np.random.default_rng(0)
        u = rng.standard_normal(self.cols)
        v = rng.standard_normal(self.cols)
        lhs = float(self._matvec(v) @ u)
        rhs = float(v @ self._rmatvec(u))
        cross = float(self._matvec(u) @ v)
        if abs(lhs - rhs) > 1e-10 * max(abs(lhs), 1.0) or abs(lhs - cross) > 1e-10 * max(abs(lhs), 1.0):
            raise AssertionError("Frechet operator failed the self-adjointness check")

    def ground_truth(self) -> GroundTruth:
        # X -> Q^T X Q is orthogonal in the Frobenius inner product, so the
        # singular values are the moduli of the divided differences.
        return GroundTruth.from_singular_values(np.abs(self._divided).ravel())


def frechet_expm_operator(n: int = 10, scale: float = -0.01) -> FrechetExpmOperator:
    return FrechetExpmOperator(n, scale)


def frechet_ground_truth(op: FrechetExpmOperator) -> GroundTruth:
    return op.ground_truth()


def dense_svd(matrix, compute_uv: bool = False):
    """Ground truth for a dense matrix via one-sided Jacobi.

    With ``compute_uv`` returns ``(truth, (u, s, vt))``.
    """
    if isinstance(matrix, DenseOperator):
        matrix = matrix.matrix
    matrix = np.asarray(matrix, dtype=float)
    if compute_uv:
        u, s, vt = jacobi_svd(matrix, compute_uv=True)
        return GroundTruth.from_singular_values(s), (u, s, vt)
    return GroundTruth.from_singular_values(jacobi_svd(matrix))
