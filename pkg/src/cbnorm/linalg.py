"""Dense kernels: matrix exponential, one-sided Jacobi SVD, Haar orthogonal factors."""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "ConvergenceError",
    "DESK_SCALE_LIMIT",
    "expm",
    "jacobi_svd",
    "haar_orthonormal",
]

DESK_SCALE_LIMIT = 2000

# Pade(13/13) numerator coefficients and the 1-norm threshold for degree 13
# (Higham 2005).
_PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
_THETA13 = 5.371920351148152


class ConvergenceError(RuntimeError):
    pass


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a degree-13 Pade approximant."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("expm input has non-finite entries")
    n = a.shape[0]
    if n == 0:
        return a.copy()

    norm1 = np.abs(a).sum(axis=0).max()
    s = 0 if norm1 <= _THETA13 else int(math.ceil(math.log2(norm1 / _THETA13)))
    a = a / (2.0**s)

    b = _PADE13
    ident = np.eye(n)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Rounds of disjoint index pairs covering every pair once (circle method)."""
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            x, y = players[i], players[m - 1 - i]
            if x >= 0 and y >= 0:
                p.append(min(x, y))
                q.append(max(x, y))
        rounds.append((np.array(p, dtype=int), np.array(q, dtype=int)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_svd(
    a: np.ndarray,
    compute_uv: bool = False,
    tol: float = 1e-12,
    max_sweeps: int = 60,
):
    """Singular values (and optionally factors) by one-sided Jacobi.

    Columns are orthogonalized pairwise; each round rotates ``n // 2``
    disjoint pairs at once. A sweep ends the iteration once no pair has
    ``|<a_p, a_q>| > tol * ||a_p|| ||a_q||``.

    Returns ``s`` or ``(u, s, vt)`` in thin form, ``s`` nonincreasing.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if min(a.shape) > DESK_SCALE_LIMIT:
        raise ValueError(
            f"dense SVD refused: min dimension {min(a.shape)} exceeds the "
            f"desk-scale limit {DESK_SCALE_LIMIT}"
        )
    transposed = a.shape[0] < a.shape[1]
    work = (a.T if transposed else a).copy()
    m, n = work.shape
    v = np.eye(n) if compute_uv else None
    fro2 = float(np.sum(work * work))
    floor = (np.finfo(float).eps ** 2) * fro2

    if fro2 > 0 and n > 1:
        rounds = _round_robin(n)
        for _sweep in range(max_sweeps):
            rotated = False
            for p, q in rounds:
                up = work[:, p]
                uq = work[:, q]
                alpha = np.einsum("ij,ij->j", up, up)
                beta = np.einsum("ij,ij->j", uq, uq)
                gamma = np.einsum("ij,ij->j", up, uq)
                scale = np.sqrt(alpha * beta)
                active = (np.abs(gamma) > tol * scale) & (scale > floor)
                if not np.any(active):
                    continue
                rotated = True
                p, q = p[active], q[active]
                alpha, beta, gamma = alpha[active], beta[active], gamma[active]
                up, uq = up[:, active], uq[:, active]
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                work[:, p] = c * up - s * uq
                work[:, q] = s * up + c * uq
                if v is not None:
                    vp, vq = v[:, p].copy(), v[:, q]
                    v[:, p] = c * vp - s * vq
                    v[:, q] = s * vp + c * vq
            if not rotated:
                break
        else:
            raise ConvergenceError(f"one-sided Jacobi did not converge in {max_sweeps} sweeps")

    sv = np.sqrt(np.einsum("ij,ij->j", work, work))
    order = np.argsort(-sv, kind="stable")
    sv = sv[order]
    if not compute_uv:
        return sv
    work = work[:, order]
    v = v[:, order]
    u = np.zeros_like(work)
    nz = sv > 0
    u[:, nz] = work[:, nz] / sv[nz]
    if transposed:
        return v, sv, u.T
    return u, sv, v.T


def haar_orthonormal(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """``rows x cols`` matrix with Haar-distributed orthonormal columns.

    Householder QR of a Gaussian matrix, with R's diagonal sign-fixed to be
    positive; without the fix the Q factor is not Haar distributed.
    """
    if cols > rows:
        raise ValueError(f"cannot have {cols} orthonormal columns in dimension {rows}")
    g = rng.standard_normal((rows, cols))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs
