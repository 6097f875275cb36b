# ABOUTME: Cholesky-based linear algebra helpers shared by every model.
# ABOUTME: Jittered factorization, log-determinants and triangular solves.

import logging

import numpy as np
from scipy import linalg

from mvpreg.errors import FactorizationError

logger = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_MAX = 1e-4


def jitchol(A: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of a symmetric matrix, adding diagonal jitter if needed.

    The plain factorization is tried first. On failure, ``eps * mean(diag(A))``
    is added to the diagonal with ``eps`` growing tenfold from ``JITTER_START``
    up to ``JITTER_MAX``.

    Args:
        A: Symmetric [N x N] matrix.

    Returns:
        Lower-triangular L with ``L @ L.T`` equal to A (plus any jitter).

    Raises:
        FactorizationError: If A is not finite, or still not positive definite at maximum jitter.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise FactorizationError(f"Expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise FactorizationError("Matrix contains non-finite entries")

    try:
        return linalg.cholesky(A, lower=True)
    except linalg.LinAlgError:
        pass

    scale = float(np.mean(np.diag(A)))
    if scale <= 0:
        raise FactorizationError("Matrix has non-positive mean diagonal")

    eps = JITTER_START
    while eps <= JITTER_MAX * (1 + 1e-12):
        try:
            L = linalg.cholesky(A + eps * scale * np.eye(A.shape[0]), lower=True)
            logger.warning("Added jitter %.1e x mean diagonal to %dx%d matrix", eps, *A.shape)
            return L
        except linalg.LinAlgError:
            eps *= 10
    raise FactorizationError(f"Matrix not positive definite even with jitter {JITTER_MAX:.0e}")


def logdet(L: np.ndarray) -> float:
    """Log-determinant of ``L @ L.T`` from its lower Cholesky factor."""
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def chol_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve ``(L @ L.T) X = B`` using the lower Cholesky factor."""
    return linalg.cho_solve((L, True), B)


def chol_inverse(L: np.ndarray) -> np.ndarray:
    """Inverse of ``L @ L.T``, symmetrized."""
    inv = chol_solve(L, np.eye(L.shape[0]))
    return 0.5 * (inv + inv.T)


def whiten(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Return ``L^{-1} B`` by forward substitution."""
    return linalg.solve_triangular(L, B, lower=True)


def quad_trace(L_row: np.ndarray, L_col: np.ndarray, A: np.ndarray) -> float:
    """Evaluate ``tr(Omega^{-1} A^T Sigma^{-1} A)`` from the factors of Sigma and Omega.

    Args:
        L_row: Lower Cholesky factor of the [n x n] matrix Sigma.
        L_col: Lower Cholesky factor of the [d x d] matrix Omega.
        A: [n x d] residual matrix.

    Returns:
        The trace as a float, computed as the squared Frobenius norm of
        ``L_row^{-1} A L_col^{-T}``.
    """
    W = whiten(L_row, A)
    V = whiten(L_col, W.T)
    return float(np.sum(V * V))
