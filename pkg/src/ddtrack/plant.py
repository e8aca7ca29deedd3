"""Ground-truth LTI state-space model.

Used only to generate data and to validate the data-driven pipeline; the
controller itself never sees the matrices below.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from ._linalg import RANK_RTOL, freeze, numerical_rank
from .behavioral import TrajectoryData
from .errors import DimensionError


@dataclass(frozen=True)
class LtiSystem:
    """Discrete-time system x+ = A x + B u, y = C x + D u in minimal form."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "C", "D"):
            object.__setattr__(self, name, freeze(np.atleast_2d(getattr(self, name))))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise DimensionError("A must be square")
        if self.B.shape[0] != n or self.C.shape[1] != n:
            raise DimensionError("B and C must be conformable with A")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise DimensionError("D must be p x m")
        ctrb = np.hstack(
            [np.linalg.matrix_power(self.A, k) @ self.B for k in range(n)]
        )
        obsv = np.vstack(
            [self.C @ np.linalg.matrix_power(self.A, k) for k in range(n)]
        )
        if numerical_rank(ctrb, RANK_RTOL) < n:
            raise DimensionError("(A, B) is not controllable")
        if numerical_rank(obsv, RANK_RTOL) < n:
            raise DimensionError("(A, C) is not observable")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    @classmethod
    def from_json(cls, source: Union[str, Path, dict]) -> "LtiSystem":
        """Load matrices from a JSON document with keys A, B, C, D (row-major)."""
        if isinstance(source, (str, Path)):
            with open(source) as fh:
                doc = json.load(fh)
        else:
            doc = source
        return cls(
            A=np.array(doc["A"], dtype=float),
            B=np.array(doc["B"], dtype=float),
            C=np.array(doc["C"], dtype=float),
            D=np.array(doc["D"], dtype=float),
        )

    def to_json(self) -> dict:
        return {name: getattr(self, name).tolist() for name in ("A", "B", "C", "D")}


def simulate(
    sys: LtiSystem,
    x0: np.ndarray,
    u_seq: np.ndarray,
    return_final_state: bool = False,
):
    """Propagate the recursion and return outputs (p, T), optionally with x_T."""
    x = np.asarray(x0, dtype=float).ravel()
    u_seq = np.atleast_2d(np.asarray(u_seq, dtype=float))
    if x.size != sys.n or u_seq.shape[0] != sys.m:
        raise DimensionError("state or input dimensions do not match the system")
    t_len = u_seq.shape[1]
    y = np.empty((sys.p, t_len))
    for k in range(t_len):
        y[:, k] = sys.C @ x + sys.D @ u_seq[:, k]
        x = sys.A @ x + sys.B @ u_seq[:, k]
    if return_final_state:
        return y, x
    return y


def lag(sys: LtiSystem) -> int:
    """Smallest l such that the l-step observability matrix has rank n."""
    rows = []
    for k in range(sys.n):
        rows.append(sys.C @ np.linalg.matrix_power(sys.A, k))
        if numerical_rank(np.vstack(rows), RANK_RTOL) == sys.n:
            return k + 1
    # unreachable for a constructible system: observability is checked at init
    raise DimensionError("system is unobservable; no valid lag exists")


def generate_historical(
    sys: LtiSystem,
    T_d: int,
    amplitude: float = 1.0,
    seed: int = 0,
    return_final_state: bool = False,
):
    """Record a data set driven by uniform random inputs from a random state.

    Inputs are i.i.d. uniform on [-amplitude, amplitude]; the initial state has
    standard-normal entries.  Both come from one generator seeded with ``seed``,
    inputs drawn first, so identical seeds reproduce identical data.
    """
    if T_d < 1:
        raise DimensionError("T_d must be at least 1")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-amplitude, amplitude, size=(sys.m, T_d))
    x0 = rng.standard_normal(sys.n)
    y, x_end = simulate(sys, x0, u, return_final_state=True)
    data = TrajectoryData(u=u, y=y)
    if return_final_state:
        return data, x_end
    return data
