"""Trajectory-based system representation built from raw input/output data.

A recorded input/output sequence, arranged into block Hankel matrices, spans
every trajectory the underlying linear system can produce, provided the input
was exciting enough.  This module builds those matrices, checks the
excitation condition, tests window membership and simulates the response to
new inputs directly from data.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from ._linalg import RANK_RTOL, freeze, min_norm_solve, numerical_rank
from .errors import (
    DimensionError,
    InconsistentInitialConditionError,
    PersistentExcitationError,
)

# Default absolute tolerance on the residual of window-membership tests.
TRAJECTORY_TOL = 1e-6


def stack_window(series: np.ndarray) -> np.ndarray:
    """Flatten a (q, T) time series into the stacked vector [v_0; v_1; ...; v_{T-1}]."""
    return np.asarray(series, dtype=float).reshape(-1, order="F")


def unstack_window(vec: np.ndarray, q: int) -> np.ndarray:
    """Inverse of :func:`stack_window`: reshape a stacked vector back to (q, T)."""
    vec = np.asarray(vec, dtype=float)
    if vec.size % q != 0:
        raise DimensionError(f"vector of size {vec.size} is not a multiple of {q}")
    return vec.reshape(q, -1, order="F")


def build_hankel(seq: np.ndarray, depth: int) -> np.ndarray:
    """Block Hankel matrix of a (q, T) sequence.

    Column ``j`` stacks the window ``seq[:, j : j + depth]``, so block row ``i``
    of column ``j`` equals sample ``i + j`` of the sequence.

    Args:
        seq: signal samples, one column per time step (1-D input is treated
            as a single-channel signal).
        depth: number of block rows; must satisfy ``1 <= depth <= T``.

    Returns:
        Array of shape (q * depth, T - depth + 1).
    """
    seq = np.atleast_2d(np.asarray(seq, dtype=float))
    q, t_len = seq.shape
    if not 1 <= depth <= t_len:
        raise DimensionError(f"depth {depth} outside [1, {t_len}]")
    n_cols = t_len - depth + 1
    h = np.empty((q * depth, n_cols))
    for j in range(n_cols):
        h[:, j] = seq[:, j : j + depth].reshape(-1, order="F")
    return h


def is_persistently_exciting(seq: np.ndarray, order: int, rtol: float = RANK_RTOL) -> bool:
    """Whether the depth-``order`` Hankel matrix of ``seq`` has full row rank."""
    seq = np.atleast_2d(np.asarray(seq, dtype=float))
    q, t_len = seq.shape
    if not 1 <= order <= t_len:
        raise DimensionError(f"order {order} outside [1, {t_len}]")
    h = build_hankel(seq, order)
    if h.shape[0] > h.shape[1]:
        return False
    return numerical_rank(h, rtol) == q * order


@dataclass(frozen=True)
class TrajectoryData:
    """Historical input/output record of a system.

    Attributes:
        u: inputs, shape (m, T_d).
        y: outputs, shape (p, T_d).
    """

    u: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", freeze(np.atleast_2d(self.u)))
        object.__setattr__(self, "y", freeze(np.atleast_2d(self.y)))
        if self.u.ndim != 2 or self.y.ndim != 2:
            raise DimensionError("u and y must be 2-D (channels x time)")
        if self.u.shape[1] != self.y.shape[1]:
            raise DimensionError(
                f"u has {self.u.shape[1]} samples but y has {self.y.shape[1]}"
            )
        if min(self.u.shape[0], self.y.shape[0], self.u.shape[1]) < 1:
            raise DimensionError("need at least one channel and one sample")

    @property
    def m(self) -> int:
        return self.u.shape[0]

    @property
    def p(self) -> int:
        return self.y.shape[0]

    @property
    def T_d(self) -> int:
        return self.u.shape[1]

    def to_csv(self, path: Union[str, Path]) -> None:
        """Write ``k,u_1..u_m,y_1..y_p`` rows, one per time step."""
        header = (
            ["k"]
            + [f"u_{i + 1}" for i in range(self.m)]
            + [f"y_{i + 1}" for i in range(self.p)]
        )
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for k in range(self.T_d):
                writer.writerow(
                    [k] + [repr(float(v)) for v in self.u[:, k]] + [repr(float(v)) for v in self.y[:, k]]
                )

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "TrajectoryData":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            m = sum(1 for name in header if name.startswith("u_"))
            p = sum(1 for name in header if name.startswith("y_"))
            if header[:1] != ["k"] or m == 0 or p == 0:
                raise DimensionError(f"unrecognized trajectory CSV header: {header}")
            rows = [row for row in reader if row]
        u = np.array([[float(r[1 + i]) for r in rows] for i in range(m)])
        y = np.array([[float(r[1 + m + i]) for r in rows] for i in range(p)])
        return cls(u=u, y=y)


@dataclass(frozen=True)
class HankelPartition:
    """Hankel blocks of historical data split into past and future rows.

    ``[U_p; U_f]`` is the depth ``T_ini + T_e`` Hankel matrix of the inputs,
    split after the first ``m * T_ini`` rows; ``[Y_p; Y_f]`` likewise for the
    outputs.  All four blocks share the column count ``N_c``.
    """

    U_p: np.ndarray
    Y_p: np.ndarray
    U_f: np.ndarray
    Y_f: np.ndarray
    T_ini: int
    T_e: int

    def __post_init__(self):
        for name in ("U_p", "Y_p", "U_f", "Y_f"):
            object.__setattr__(self, name, freeze(getattr(self, name)))
        n_cols = {blk.shape[1] for blk in (self.U_p, self.Y_p, self.U_f, self.Y_f)}
        if len(n_cols) != 1 or self.N_c < 1:
            raise DimensionError("partition blocks disagree on column count")

    @property
    def m(self) -> int:
        return self.U_p.shape[0] // self.T_ini

    @property
    def p(self) -> int:
        return self.Y_p.shape[0] // self.T_ini

    @property
    def N_c(self) -> int:
        return self.U_p.shape[1]

    def past_stack(self) -> np.ndarray:
        return np.vstack([self.U_p, self.Y_p])


def partition(
    data: TrajectoryData,
    T_ini: int,
    T_e: int,
    system_order: int | None = None,
    rtol: float = RANK_RTOL,
) -> HankelPartition:
    """Split the depth-(T_ini + T_e) Hankel matrices of ``data`` into blocks.

    When ``system_order`` is given, the inputs are required to be persistently
    exciting of order ``T_ini + T_e + system_order``; otherwise checking that
    condition is the caller's responsibility.
    """
    if T_ini < 1 or T_e < 1:
        raise DimensionError("T_ini and T_e must be at least 1")
    depth = T_ini + T_e
    if depth > data.T_d:
        raise DimensionError(
            f"window T_ini + T_e = {depth} exceeds data length {data.T_d}"
        )
    if system_order is not None:
        order = depth + system_order
        if order > data.T_d or not is_persistently_exciting(data.u, order, rtol):
            raise PersistentExcitationError(
                f"inputs are not persistently exciting of order {order}"
            )
    hu = build_hankel(data.u, depth)
    hy = build_hankel(data.y, depth)
    mi, pi = data.m * T_ini, data.p * T_ini
    return HankelPartition(
        U_p=hu[:mi], U_f=hu[mi:], Y_p=hy[:pi], Y_f=hy[pi:], T_ini=T_ini, T_e=T_e
    )


def _past_residual(part: HankelPartition, u_ini: np.ndarray, y_ini: np.ndarray) -> float:
    u_ini = np.asarray(u_ini, dtype=float).ravel()
    y_ini = np.asarray(y_ini, dtype=float).ravel()
    if u_ini.size != part.m * part.T_ini or y_ini.size != part.p * part.T_ini:
        raise DimensionError("recent window length does not match the partition")
    stack = part.past_stack()
    rhs = np.concatenate([u_ini, y_ini])
    g = min_norm_solve(stack, rhs)
    return float(np.abs(stack @ g - rhs).max())


def is_trajectory(
    part: HankelPartition,
    u_ini: np.ndarray,
    y_ini: np.ndarray,
    tol: float = TRAJECTORY_TOL,
) -> bool:
    """Whether (u_ini, y_ini) lies in the span of the past Hankel blocks.

    Membership is decided by the infinity norm of the least-squares residual
    of ``[U_p; Y_p] g = [u_ini; y_ini]`` against ``tol``.
    """
    return _past_residual(part, u_ini, y_ini) < tol


def simulate_ddriven(
    part: HankelPartition,
    u_ini: np.ndarray,
    y_ini: np.ndarray,
    u: np.ndarray,
    tol: float = TRAJECTORY_TOL,
) -> np.ndarray:
    """Predict the output response to ``u`` after the recent window, from data alone.

    Solves ``[U_p; Y_p; U_f] g = [u_ini; y_ini; u]`` in the minimum-norm sense
    and returns ``Y_f g``.  Any solution ``g`` yields the same output when the
    excitation and window-length preconditions hold; minimum-norm makes the
    choice deterministic.

    Raises:
        InconsistentInitialConditionError: if the recent window fails the
            membership test at tolerance ``tol``.
    """
    res = _past_residual(part, u_ini, y_ini)
    if res >= tol:
        raise InconsistentInitialConditionError(
            f"recent window residual {res:.3e} exceeds tolerance {tol:.3e}"
        )
    u = np.asarray(u, dtype=float).ravel()
    if u.size != part.m * part.T_e:
        raise DimensionError("future input length does not match the partition")
    stack = np.vstack([part.U_p, part.Y_p, part.U_f])
    rhs = np.concatenate(
        [np.asarray(u_ini, dtype=float).ravel(), np.asarray(y_ini, dtype=float).ravel(), u]
    )
    g = min_norm_solve(stack, rhs)
    return part.Y_f @ g
