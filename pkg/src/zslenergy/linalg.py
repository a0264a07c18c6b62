"""Dense matrix kernels: SVD, right-factor least squares, softmax."""

from __future__ import annotations

import numpy as np

# Relative singular-value cutoff for the pseudoinverse.
RANK_RTOL = 1e-12


def _as_finite_matrix(M, name: str = "M") -> np.ndarray:
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2 or A.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def svd(M) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``M = U @ diag(sigma) @ Vt``.

    ``sigma`` is non-negative and sorted descending; ``U`` has orthonormal
    columns and ``Vt`` orthonormal rows.
    """
    A = _as_finite_matrix(M)
    U, sigma, Vt = np.linalg.svd(A, full_matrices=False)
    return U, sigma, Vt


def pinv(M, rtol: float = RANK_RTOL) -> np.ndarray:
    """Moore-Penrose pseudoinverse built from :func:`svd`.

    Singular values at or below ``rtol * sigma_max`` are treated as zero, so
    the pseudoinverse of an all-zero matrix is all zeros.
    """
    U, sigma, Vt = svd(M)
    if sigma[0] == 0.0:
        return np.zeros((Vt.shape[1], U.shape[0]))
    keep = sigma > rtol * sigma[0]
    inv = np.zeros_like(sigma)
    inv[keep] = 1.0 / sigma[keep]
    return (Vt.T * inv) @ U.T


def solve_right_factor(W, S) -> np.ndarray:
    """Least-squares ``V`` minimising ``||V @ S - W||_F``.

    ``W`` is ``d x z`` and ``S`` is ``a x z``; the result is ``d x a``,
    computed as ``W @ pinv(S)``.
    """
    W = _as_finite_matrix(W, "W")
    S = _as_finite_matrix(S, "S")
    if W.shape[1] != S.shape[1]:
        raise ValueError(
            f"column mismatch: W has {W.shape[1]} columns, S has {S.shape[1]}"
        )
    return W @ pinv(S)


def softmax(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("scores must be a non-empty vector")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    e = np.exp(s - s.max())
    return e / e.sum()
