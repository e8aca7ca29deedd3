"""Shared numerical linear-algebra helpers.

All rank decisions in the package go through :func:`numerical_rank` so that a
single relative singular-value threshold governs Hankel ranks, kernel bases
and row selections alike.
"""
from __future__ import annotations

import warnings

import numpy as np

from .errors import ConditioningError

# Relative singular-value threshold used everywhere a rank decision is made.
RANK_RTOL = 1e-9

# Condition number above which pseudo-inverses emit a warning.
COND_WARN = 1e12


def numerical_rank(a: np.ndarray, rtol: float = RANK_RTOL) -> int:
    """Rank of ``a`` counted as singular values above ``rtol`` times the largest."""
    a = np.atleast_2d(a)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def kernel_basis(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the null space of ``a`` as columns of the result."""
    a = np.atleast_2d(a)
    _, s, vt = np.linalg.svd(a)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > rtol * s[0]))
    return vt[rank:].T.copy()


def row_space_basis(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis of the row space of ``a`` as columns of the result."""
    a = np.atleast_2d(a)
    _, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > rtol * s[0]))
    return vt[:rank].T.copy()


def right_pseudo_inverse(a: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Return ``a^T (a a^T)^{-1}`` for a full-row-rank matrix via SVD.

    Raises:
        ConditioningError: if ``a`` is numerically row-rank deficient.

    Warns when the condition number exceeds ``COND_WARN``.
    """
    a = np.atleast_2d(a)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0 or np.count_nonzero(s > rtol * s[0]) < a.shape[0]:
        raise ConditioningError(
            f"matrix of shape {a.shape} is numerically row-rank deficient"
        )
    cond = s[0] / s[-1]
    if cond > COND_WARN:
        warnings.warn(
            f"right pseudo-inverse of a matrix with condition number {cond:.2e}",
            RuntimeWarning,
            stacklevel=2,
        )
    return (vt.T / s) @ u.T


def min_norm_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution of ``a x = b``."""
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return x


def sym_sqrt(a: np.ndarray) -> np.ndarray:
    """Symmetric square root of a symmetric positive-definite matrix."""
    lam, q = np.linalg.eigh(a)
    if lam.min() <= 0:
        raise ConditioningError("matrix is not positive definite")
    return (q * np.sqrt(lam)) @ q.T


def freeze(a: np.ndarray) -> np.ndarray:
    """Copy ``a`` as float64 and mark it read-only."""
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out
