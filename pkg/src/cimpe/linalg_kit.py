"""Dense linear-algebra primitives used throughout the solver.

Everything here works on small dense ``numpy`` arrays and tolerates
zero-sized dimensions, which show up whenever a controller has no action or
no private information at some stage.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

PSD_TOL = 1e-10


class NoUniqueSolution(np.linalg.LinAlgError):
    """A linear matrix equation has no unique solution."""

    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class NotPSDError(ValueError):
    """A covariance matrix is indefinite beyond roundoff."""


def as_matrix(m, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    elif a.ndim == 1:
        a = a.reshape(1, -1) if a.size else a.reshape(rows or 0, cols or 0)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def pinv(m: np.ndarray) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    Singular values below ``max(rows, cols) * eps * sigma_max`` are treated
    as zero.
    """
    m = np.asarray(m, dtype=float)
    rows, cols = m.shape
    if m.size == 0:
        return np.zeros((cols, rows))
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    cutoff = max(rows, cols) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    inv_s = np.zeros_like(s)
    keep = s > cutoff
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T


def spectral_radius(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"spectral radius needs a square matrix, got {m.shape}")
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def max_singular_value(m: np.ndarray) -> float:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return 0.0
    return float(np.linalg.svd(m, compute_uv=False)[0])


def stein_operator(p1: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Matrix of ``D -> D + P1 D P2`` acting on column-major ``vec(D)``."""
    n, k = p1.shape[0], p2.shape[0]
    return np.eye(n * k) + np.kron(p2.T, p1)


def solve_stein(p1: np.ndarray, p2: np.ndarray, p3: np.ndarray) -> np.ndarray:
    """Solve ``D + P1 @ D @ P2 = P3`` for ``D``.

    ``P1`` is ``n x n``, ``P2`` is ``k x k`` and ``P3`` is ``n x k``. The
    system is vectorized as ``(I + P2^T kron P1) vec(D) = vec(P3)`` and solved
    densely.

    Raises
    ------
    NoUniqueSolution
        If the vectorized operator is numerically singular.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    p3 = np.asarray(p3, dtype=float)
    n, k = p3.shape
    if p1.shape != (n, n) or p2.shape != (k, k):
        raise ValueError(f"non-conformable Stein equation: {p1.shape}, {p2.shape}, {p3.shape}")
    if n * k == 0:
        return np.zeros((n, k))
    op = stein_operator(p1, p2)
    s = np.linalg.svd(op, compute_uv=False)
    if s[-1] <= op.shape[0] * np.finfo(float).eps * s[0]:
        raise NoUniqueSolution("Stein operator is singular", float(s[-1]))
    vec_d = np.linalg.solve(op, p3.reshape(-1, order="F"))
    return vec_d.reshape((n, k), order="F")


def stein_uniqueness_margin(p1: np.ndarray, p2: np.ndarray) -> float:
    """``1 - rho(P1) * rho(P2)``; positive means the solution is unique."""
    return 1.0 - spectral_radius(p1) * spectral_radius(p2)


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def repair_psd(m: np.ndarray, tol: float = PSD_TOL, what: str = "covariance") -> np.ndarray:
    """Symmetrize and clip tiny negative eigenvalues to zero.

    Eigenvalues below ``-tol * (1 + ||m||)`` mean the matrix is genuinely
    indefinite and raise ``NotPSDError``.
    """
    m = symmetrize(np.asarray(m, dtype=float))
    if m.size == 0:
        return m
    w, v = np.linalg.eigh(m)
    scale = 1.0 + float(np.max(np.abs(w)))
    if w[0] < -tol * scale:
        raise NotPSDError(f"{what} has eigenvalue {w[0]:.3e}")
    if w[0] >= 0.0:
        return m
    w = np.where(w < 0.0, 0.0, w)
    return symmetrize((v * w) @ v.T)


def is_psd(m: np.ndarray, tol: float = PSD_TOL) -> bool:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return True
    if not np.allclose(m, m.T, atol=tol * (1.0 + np.max(np.abs(m)))):
        return False
    w = np.linalg.eigvalsh(symmetrize(m))
    return bool(w[0] >= -tol * (1.0 + np.max(np.abs(w))))


def is_pd(m: np.ndarray, tol: float = PSD_TOL) -> bool:
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return True
    if not np.allclose(m, m.T, atol=tol * (1.0 + np.max(np.abs(m)))):
        return False
    w = np.linalg.eigvalsh(symmetrize(m))
    return bool(w[0] > tol * (1.0 + np.max(np.abs(w))))


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (works for singular input)."""
    m = repair_psd(m)
    if m.size == 0:
        return m
    w, v = np.linalg.eigh(m)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def gaussian_condition(
    mean: np.ndarray,
    cov: np.ndarray,
    target_idx: Sequence[int],
    given_idx: Sequence[int],
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Condition a Gaussian on a subset of its coordinates.

    Returns ``(gain, offset, cond_cov)`` such that
    ``E[x_target | x_given] = gain @ x_given + offset``. The given block may be
    singular; the pseudo-inverse is used throughout.
    """
    mean = np.asarray(mean, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    tgt = np.asarray(target_idx, dtype=int)
    giv = np.asarray(given_idx, dtype=int)
    if np.intersect1d(tgt, giv).size:
        raise ValueError("target and given index sets overlap")
    if not is_psd(cov):
        raise NotPSDError("input covariance is not symmetric PSD")
    s_xy = cov[np.ix_(tgt, giv)]
    s_yy = cov[np.ix_(giv, giv)]
    gain = s_xy @ pinv(s_yy)
    offset = mean[tgt] - gain @ mean[giv]
    cond = cov[np.ix_(tgt, tgt)] - gain @ s_xy.T
    return gain, offset, repair_psd(cond, what="conditional covariance")


def block_diag(*blocks: np.ndarray) -> np.ndarray:
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out
