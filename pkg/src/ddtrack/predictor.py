"""Explicit affine output predictor and the tracking cost.

Given the Hankel partition and a noise parameterization, the future output is
an affine function ``y = B_u u + B_w g_w + y0`` of the control input and the
free noise vector.  The matrices come from a full-row-rank stack
``Lambda = [U_p; Y_p1; U_f]`` obtained by keeping only the past-output rows
that contribute new rank.  The tracking cost then becomes a quadratic form
``Q_g(u, gamma)`` in ``[1; g_w]``, the shape consumed by the synthesis step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from ._linalg import RANK_RTOL, freeze, numerical_rank, right_pseudo_inverse
from .behavioral import HankelPartition
from .errors import DimensionError, PersistentExcitationError
from .noise import NoiseParameterization

RowSelection = Tuple[Sequence[int], np.ndarray]


def select_rows(part: HankelPartition, rtol: float = RANK_RTOL) -> RowSelection:
    """Pick past-output rows that enlarge the row space of ``[U_p; U_f]``.

    Rows of ``Y_p`` are scanned in natural order and kept only when they
    increase the numerical rank (incremental Gram-Schmidt with
    reorthogonalization).  The returned stack ``Lambda = [U_p; Y_p1; U_f]``
    has full row rank equal to the rank of ``[U_p; Y_p; U_f]``.

    Returns:
        (selected_rows, Lambda) where ``selected_rows`` indexes rows of ``Y_p``.

    Raises:
        PersistentExcitationError: if ``[U_p; U_f]`` is already rank deficient.
    """
    base = np.vstack([part.U_p, part.U_f])
    if numerical_rank(base, rtol) < base.shape[0]:
        raise PersistentExcitationError("input Hankel rows are rank deficient")

    # Orthonormal row-space basis, grown one candidate row at a time.
    basis = np.linalg.qr(base.T)[0].T
    selected = []
    for i in range(part.Y_p.shape[0]):
        row = part.Y_p[i]
        resid = row - basis.T @ (basis @ row)
        resid -= basis.T @ (basis @ resid)
        if np.linalg.norm(resid) > rtol * max(np.linalg.norm(row), 1.0):
            selected.append(i)
            basis = np.vstack([basis, resid / np.linalg.norm(resid)])
    lam = np.vstack([part.U_p, part.Y_p[selected], part.U_f])
    return selected, lam


@dataclass(frozen=True)
class OutputPredictor:
    """Affine map (u, g_w) -> y over the future horizon.

    ``B_w = B_ini M`` and ``y0 = B_ini g_w_star``; for any feasible ``g_w``
    the prediction agrees with the data-driven simulation run with the
    corresponding noise removed from the measured window.
    """

    selected_rows: tuple
    Lambda: np.ndarray
    B_ini: np.ndarray
    B_u: np.ndarray
    B_w: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "selected_rows", tuple(self.selected_rows))
        for name in ("Lambda", "B_ini", "B_u", "B_w", "y0"):
            object.__setattr__(self, name, freeze(getattr(self, name)))

    @property
    def horizon_outputs(self) -> int:
        return self.B_u.shape[0]

    @property
    def horizon_inputs(self) -> int:
        return self.B_u.shape[1]

    @property
    def n_w(self) -> int:
        return self.B_w.shape[1]

    def to_json(self) -> dict:
        return {
            "selected_rows": list(self.selected_rows),
            "Lambda": self.Lambda.tolist(),
            "B_ini": self.B_ini.tolist(),
            "B_u": self.B_u.tolist(),
            "B_w": self.B_w.tolist(),
            "y0": self.y0.tolist(),
        }


def build_predictor(
    part: HankelPartition,
    param: NoiseParameterization,
    selection: Optional[RowSelection] = None,
    rtol: float = RANK_RTOL,
) -> OutputPredictor:
    """Assemble the affine output predictor from the row-selected stack.

    With ``P = Lambda^T (Lambda Lambda^T)^{-1}`` split into blocks matching
    the rows of ``Lambda``, the matrices are

        B_u   = Y_f P [0; 0; I],
        B_ini = Y_f (I + P [0; 0; -U_f]) = Y_f - B_u U_f,
        B_w   = B_ini M,   y0 = B_ini g_w_star.

    Raises:
        ConditioningError: if ``Lambda`` is numerically row-rank deficient.
    """
    if selection is None:
        selection = select_rows(part, rtol)
    selected_rows, lam = selection
    p_right = right_pseudo_inverse(lam, rtol)
    g_fut = part.Y_f @ p_right   # (p*T_e, rows(Lambda))
    b_u = g_fut[:, part.m * part.T_ini + len(selected_rows):]
    b_ini = part.Y_f - b_u @ part.U_f
    return OutputPredictor(
        selected_rows=tuple(selected_rows),
        Lambda=lam,
        B_ini=b_ini,
        B_u=b_u,
        B_w=b_ini @ param.M,
        y0=b_ini @ param.g_w_star,
    )


def predict(pred: OutputPredictor, u: np.ndarray, g_w: np.ndarray) -> np.ndarray:
    """Future output ``B_u u + B_w g_w + y0``."""
    u = np.asarray(u, dtype=float).ravel()
    g_w = np.asarray(g_w, dtype=float).ravel()
    if u.size != pred.horizon_inputs:
        raise DimensionError(f"u must have length {pred.horizon_inputs}, got {u.size}")
    if g_w.size != pred.n_w:
        raise DimensionError(f"g_w must have length {pred.n_w}, got {g_w.size}")
    return pred.B_u @ u + pred.B_w @ g_w + pred.y0


@dataclass(frozen=True)
class TrackingProblem:
    """Finite-horizon quadratic tracking objective.

    The cost of an input/output pair is
    ``sum_k ||y_k - r_k||_Q^2 + ||u_k||_R^2`` with per-step weights ``Q`` and
    ``R`` (positive semidefinite).  ``Qbar`` and ``Rbar`` are the horizon-wide
    block-diagonal expansions.
    """

    r: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    Qbar: np.ndarray = field(init=False)
    Rbar: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "r", freeze(np.asarray(self.r, dtype=float).ravel()))
        object.__setattr__(self, "Q", freeze(np.atleast_2d(self.Q)))
        object.__setattr__(self, "R", freeze(np.atleast_2d(self.R)))
        for name in ("Q", "R"):
            w = getattr(self, name)
            if w.shape[0] != w.shape[1]:
                raise DimensionError(f"{name} must be square")
            if np.abs(w - w.T).max() > 1e-10 * max(1.0, np.abs(w).max()):
                raise DimensionError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(w).min() < -1e-10:
                raise DimensionError(f"{name} must be positive semidefinite")
        if self.r.size % self.p != 0:
            raise DimensionError("reference length must be a multiple of the output size")
        t_e = self.T_e
        object.__setattr__(self, "Qbar", freeze(np.kron(np.eye(t_e), self.Q)))
        object.__setattr__(self, "Rbar", freeze(np.kron(np.eye(t_e), self.R)))

    @property
    def p(self) -> int:
        return self.Q.shape[0]

    @property
    def m(self) -> int:
        return self.R.shape[0]

    @property
    def T_e(self) -> int:
        return self.r.size // self.p

    @classmethod
    def regulation(cls, T_e: int, Q=1.0, R=1.0) -> "TrackingProblem":
        """Zero-reference problem over a horizon of ``T_e`` steps."""
        q = np.atleast_2d(np.asarray(Q, dtype=float))
        return cls(r=np.zeros(q.shape[0] * T_e), Q=Q, R=R)


def lqte(prob: TrackingProblem, u: np.ndarray, y: np.ndarray) -> float:
    """Tracking cost ``(y - r)^T Qbar (y - r) + u^T Rbar u``."""
    u = np.asarray(u, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if y.size != prob.r.size or u.size != prob.m * prob.T_e:
        raise DimensionError("input/output lengths do not match the problem horizon")
    e = y - prob.r
    return float(e @ prob.Qbar @ e + u @ prob.Rbar @ u)


def build_Qg(
    pred: OutputPredictor,
    prob: TrackingProblem,
    u: np.ndarray,
    gamma: float,
) -> np.ndarray:
    """Quadratic form whose nonnegativity on [1; g_w] encodes cost <= gamma.

    The identity ``[1; g_w]^T Q_g(u, gamma) [1; g_w] = gamma - cost(u, g_w)``
    holds exactly for every ``g_w``.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.size != pred.horizon_inputs:
        raise DimensionError(f"u must have length {pred.horizon_inputs}, got {u.size}")
    e = pred.B_u @ u + pred.y0 - prob.r
    n_w = pred.n_w
    out = np.empty((1 + n_w, 1 + n_w))
    out[0, 0] = gamma - u @ prob.Rbar @ u - e @ prob.Qbar @ e
    cross = -(e @ prob.Qbar @ pred.B_w)
    out[0, 1:] = cross
    out[1:, 0] = cross
    lower = -(pred.B_w.T @ prob.Qbar @ pred.B_w)
    out[1:, 1:] = 0.5 * (lower + lower.T)
    return out
