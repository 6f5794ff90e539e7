"""Projection residuals and numerical rank.

The orthogonal-complement projector of a column space is never formed
explicitly: residuals are taken against an orthonormal basis from a reduced
QR factorization, which avoids inverting the Gram matrix.
"""

from __future__ import annotations

import numpy as np

from sparsejt.errors import RankDeficientError

DEFAULT_RANK_TOL = 1e-10


def _as_matrix(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B[:, None]
    if B.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise ValueError("matrix entries must be finite")
    return B


def numerical_rank(B, tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values strictly above ``tol`` times the largest one."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    B = _as_matrix(B)
    if B.size == 0:
        return 0
    s = np.linalg.svd(B, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def orthonormal_basis(B, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthonormal basis ``Q`` (m x k) for the column space of a tall, full-rank ``B``.

    Raises:
        RankDeficientError: if ``B`` is rank deficient at tolerance ``tol``.
        ValueError: if ``B`` has more columns than rows.
    """
    B = _as_matrix(B)
    m, k = B.shape
    if k > m:
        raise ValueError(f"need rows >= cols, got {m}x{k}")
    rank = numerical_rank(B, tol)
    if rank < k:
        raise RankDeficientError(f"rank {rank} < {k} columns")
    q, _ = np.linalg.qr(B, mode="reduced")
    return q


def residual_norm_sq(B, y, tol: float = DEFAULT_RANK_TOL) -> float:
    """Squared norm of ``y`` with its projection onto span(B) removed."""
    y = np.asarray(y, dtype=float)
    B = _as_matrix(B)
    if y.shape != (B.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({B.shape[0]},)")
    q = orthonormal_basis(B, tol)
    r = y - q @ (q.T @ y)
    return max(float(r @ r), 0.0)


def batch_rank_ok(stack: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Full-column-rank mask for a stack of matrices of shape (S, m, k)."""
    k = stack.shape[-1]
    if stack.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    s = np.linalg.svd(stack, compute_uv=False)
    top = s[:, 0]
    return (top > 0) & (np.count_nonzero(s > tol * top[:, None], axis=1) == k)


def batch_residual_norm_sq(stack: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Residual energies of ``y`` off each matrix in a stack (S, m, k).

    ``y`` may be a single vector (m,) shared by every matrix or a stack (S, m).
    No rank check is done here; rank-deficient entries give meaningless values.
    """
    if stack.shape[0] == 0:
        return np.zeros(0)
    q, _ = np.linalg.qr(stack, mode="reduced")
    if y.ndim == 1:
        coef = np.einsum("smk,m->sk", q, y)
        r = y[None, :] - np.einsum("smk,sk->sm", q, coef)
    else:
        coef = np.einsum("smk,sm->sk", q, y)
        r = y - np.einsum("smk,sk->sm", q, coef)
    return np.maximum(np.einsum("sm,sm->s", r, r), 0.0)
