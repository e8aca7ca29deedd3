"""Shared test utilities: random minimal systems and independent oracles."""
from __future__ import annotations

import numpy as np

from ddtrack import LtiSystem
from ddtrack.errors import DimensionError


def recursion_oracle(A, B, C, D, x0, u_seq):
    """Reference state-space recursion, written independently of the package."""
    A, B, C, D = map(np.atleast_2d, (A, B, C, D))
    x = np.asarray(x0, dtype=float).ravel().copy()
    cols = []
    for k in range(u_seq.shape[1]):
        u_k = u_seq[:, k]
        cols.append(C @ x + D @ u_k)
        x = A @ x + B @ u_k
    return np.column_stack(cols), x


def rank_oracle(mat):
    """Independent numerical rank via numpy's default SVD thresholding."""
    return int(np.linalg.matrix_rank(mat))


def random_minimal_system(rng, n=None, m=None, p=None, rho=None) -> LtiSystem:
    """Controllable + observable random system with spectral radius < 1."""
    n = n if n is not None else int(rng.integers(1, 6))
    m = m if m is not None else int(rng.integers(1, 3))
    p = p if p is not None else int(rng.integers(1, 3))
    rho = rho if rho is not None else rng.uniform(0.3, 0.95)
    for _ in range(50):
        a = rng.standard_normal((n, n))
        radius = max(abs(np.linalg.eigvals(a)))
        if radius == 0:
            continue
        a *= rho / radius
        try:
            return LtiSystem(
                A=a,
                B=rng.standard_normal((n, m)),
                C=rng.standard_normal((p, n)),
                D=rng.standard_normal((p, m)),
            )
        except DimensionError:
            continue
    raise RuntimeError("failed to draw a minimal system")


def exact_recent_window(sys, x_start, t_ini, rng, amplitude=1.0):
    """Continue the plant for t_ini steps; returns stacked (u_ini, y_ini, x_end)."""
    u = rng.uniform(-amplitude, amplitude, size=(sys.m, t_ini))
    y, x_end = recursion_oracle(sys.A, sys.B, sys.C, sys.D, x_start, u)
    return (
        u.reshape(-1, order="F"),
        y.reshape(-1, order="F"),
        x_end,
    )


def schur_equivalence_trial(pred, prob, param, lmi, u, alpha, rng):
    """One equivalence check of the bordered LMI against the compact form.

    Locates the gamma where the compact form Q_g(u, gamma) - alpha A_w turns
    positive semidefinite (its smallest eigenvalue is nondecreasing in gamma),
    then classifies both forms strictly above and strictly below that point.
    Returns the four smallest eigenvalues
    (small_plus, big_plus, small_minus, big_minus).
    """
    from ddtrack import build_Qg

    def small_eig(gamma):
        return np.linalg.eigvalsh(
            build_Qg(pred, prob, u, gamma) - alpha * param.A_w
        ).min()

    # The smallest eigenvalue saturates just below zero (rounding on the
    # neutral noise directions), so bisect against a level above that floor.
    floor = -1e-9
    lo, hi = 0.0, 1.0
    for _ in range(80):
        if small_eig(hi) >= floor:
            break
        hi *= 2.0
    else:
        raise RuntimeError("no PSD gamma found")
    for _ in range(80):
        if small_eig(lo) < floor:
            break
        lo = lo * 2.0 - 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if small_eig(mid) >= floor:
            hi = mid
        else:
            lo = mid
    gamma_c = hi

    margin = max(1.0, 0.01 * abs(gamma_c))
    for _ in range(30):
        if small_eig(gamma_c - margin) < -1e-4:
            break
        margin *= 4.0

    def big_eig(gamma):
        x = np.zeros(lmi.n_var)
        x[: lmi.n_inputs] = u
        x[lmi.gamma_index] = gamma
        x[lmi.alpha_index] = alpha
        return np.linalg.eigvalsh(lmi.evaluate(x)).min()

    return (
        small_eig(gamma_c + margin),
        big_eig(gamma_c + margin),
        small_eig(gamma_c - margin),
        big_eig(gamma_c - margin),
    )
