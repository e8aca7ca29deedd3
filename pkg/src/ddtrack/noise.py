"""Parameterization of measurement noise consistent with the data.

A noise vector on the recent outputs is *feasible* when it satisfies the
quadratic bound and the de-noised window remains reproducible from the
historical Hankel blocks.  Every such vector is an affine image
``w = -Y_p M g_w + w0`` of a free vector ``g_w`` ranging over the kernel of
``U_p``, with feasibility expressed by one quadratic form ``A_w`` on
``[1; g_w]``.  Directions of ``g_w`` in the kernel of ``Y_p M`` never change
``w``; removing them leaves a bounded ellipsoid which this module exposes for
sampling and for exact inner maximization downstream.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.linalg import solve_triangular

from ._linalg import (
    RANK_RTOL,
    freeze,
    kernel_basis,
    numerical_rank,
    right_pseudo_inverse,
    row_space_basis,
)
from .behavioral import HankelPartition
from .errors import (
    DegenerateKernelError,
    DimensionError,
    InfeasibleNoiseSetError,
    PersistentExcitationError,
)

# Eigenvalue tolerance for the strict negative-definiteness of the noise bound.
DEFINITENESS_TOL = 1e-10

# The squared radius is a difference of two computed terms; below this many
# relative units of their magnitude it counts as zero (or negative: empty).
RADIUS_RTOL = 1e-12

FEASIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class NoiseModel:
    """Quadratic noise bound [1; w]^T [[phi11, phi12],[phi12^T, phi22]] [1; w] >= 0.

    ``phi22`` must be symmetric negative definite, which makes the admissible
    set bounded.  With ``phi12 = 0`` and ``phi22 = -I`` the bound reads
    ``w^T w <= phi11`` (an accumulated-energy budget).
    """

    phi11: float
    phi12: np.ndarray
    phi22: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi11", float(np.asarray(self.phi11).reshape(())))
        object.__setattr__(self, "phi12", freeze(np.asarray(self.phi12).ravel()))
        object.__setattr__(self, "phi22", freeze(np.atleast_2d(self.phi22)))
        d = self.phi22.shape[0]
        if self.phi22.shape != (d, d) or self.phi12.size != d:
            raise DimensionError("phi12 and phi22 sizes disagree")
        if np.abs(self.phi22 - self.phi22.T).max() > 1e-10 * max(
            1.0, np.abs(self.phi22).max()
        ):
            raise DimensionError("phi22 must be symmetric")
        if np.linalg.eigvalsh(self.phi22).max() >= -DEFINITENESS_TOL:
            raise DimensionError("phi22 must be negative definite")

    @property
    def dim(self) -> int:
        return self.phi22.shape[0]

    def quad_value(self, w: np.ndarray) -> float:
        """Value of the bounding quadratic at ``w`` (admissible iff >= 0)."""
        w = np.asarray(w, dtype=float).ravel()
        if w.size != self.dim:
            raise DimensionError("noise vector size does not match the model")
        return float(self.phi11 + 2.0 * self.phi12 @ w + w @ self.phi22 @ w)

    def is_admissible(self, w: np.ndarray, tol: float = FEASIBILITY_TOL) -> bool:
        return self.quad_value(w) >= -tol

    @classmethod
    def energy_bound(cls, epsilon: float, t_ini: int, p: int) -> "NoiseModel":
        """Budget ``w^T w <= T_ini * p * epsilon`` on a length-``T_ini`` window."""
        d = t_ini * p
        return cls(phi11=t_ini * p * epsilon, phi12=np.zeros(d), phi22=-np.eye(d))

    @classmethod
    def from_json(cls, source: Union[str, Path, dict]) -> "NoiseModel":
        if isinstance(source, (str, Path)):
            with open(source) as fh:
                doc = json.load(fh)
        else:
            doc = source
        return cls(
            phi11=float(np.asarray(doc["phi11"]).reshape(())),
            phi12=np.array(doc["phi12"], dtype=float).ravel(),
            phi22=np.array(doc["phi22"], dtype=float),
        )

    def to_json(self) -> dict:
        return {
            "phi11": self.phi11,
            "phi12": self.phi12.tolist(),
            "phi22": self.phi22.tolist(),
        }


@dataclass(frozen=True)
class ReducedEllipsoid:
    """Feasible set of ``g_w`` restricted to the row space of ``Y_p M``.

    In coordinates ``z`` on the column span of ``basis`` the feasible set is
    ``(z - center)^T (chol chol^T) (z - center) <= radius_sq``; the full
    feasible set is this ellipsoid plus arbitrary components along the
    neutral directions ``ker(Y_p M)``.
    """

    basis: np.ndarray      # (n_w, s), orthonormal columns
    center: np.ndarray     # (s,)
    radius_sq: float
    chol: np.ndarray       # (s, s) lower Cholesky factor of -reduced quadratic
    scale: float           # magnitude reference used for radius comparisons

    def __post_init__(self):
        object.__setattr__(self, "basis", freeze(self.basis))
        object.__setattr__(self, "center", freeze(self.center))
        object.__setattr__(self, "chol", freeze(self.chol))

    @property
    def dimension(self) -> int:
        return self.basis.shape[1]

    def is_empty(self, rtol: float = RADIUS_RTOL) -> bool:
        return self.radius_sq < -rtol * self.scale

    def is_point(self, rtol: float = RADIUS_RTOL) -> bool:
        return abs(self.radius_sq) <= rtol * self.scale

    @property
    def radius(self) -> float:
        return float(np.sqrt(max(self.radius_sq, 0.0)))

    def gw_from_ball(self, xi: np.ndarray) -> np.ndarray:
        """Map ball coordinates ``xi`` (``|xi| <= radius``) to a g_w vector."""
        z = self.center + solve_triangular(self.chol.T, np.asarray(xi, dtype=float))
        return self.basis @ z

    def ball_axes(self) -> np.ndarray:
        """Columns mapping unit ball coordinates to g_w offsets from the center."""
        return self.basis @ np.linalg.inv(self.chol.T)


@dataclass(frozen=True)
class NoiseParameterization:
    """Affine map from the free vector ``g_w`` to feasible noise vectors.

    Attributes:
        M: orthonormal kernel basis of ``U_p``, shape (N_c, n_w).
        g_w_star: minimum-norm solution of ``U_p g = u_ini``.
        w0: noise at ``g_w = 0``, equals ``y_ini - Y_p g_w_star``.
        A_w: symmetric (1 + n_w) matrix; ``g_w`` is feasible iff
            ``[1; g_w]^T A_w [1; g_w] >= 0``.
        noise_map: ``Y_p M``, so that ``w = w0 - noise_map @ g_w``.
        ellipsoid: bounded reduction of the feasible set.
        model: the quadratic bound the parameterization was built from.
    """

    M: np.ndarray
    g_w_star: np.ndarray
    w0: np.ndarray
    A_w: np.ndarray
    noise_map: np.ndarray
    ellipsoid: ReducedEllipsoid
    model: NoiseModel

    def __post_init__(self):
        for name in ("M", "g_w_star", "w0", "A_w", "noise_map"):
            object.__setattr__(self, name, freeze(getattr(self, name)))

    @property
    def n_w(self) -> int:
        return self.M.shape[1]


def build_parameterization(
    part: HankelPartition,
    u_ini: np.ndarray,
    y_ini: np.ndarray,
    noise: NoiseModel,
    rtol: float = RANK_RTOL,
) -> NoiseParameterization:
    """Construct the affine noise parameterization for a measured recent window.

    Args:
        part: Hankel blocks of the (noise-free) historical data.
        u_ini: recent inputs, stacked vector of length m * T_ini.
        y_ini: recent measured outputs, stacked vector of length p * T_ini.
        noise: quadratic bound on the measurement noise, dimension p * T_ini.

    Raises:
        PersistentExcitationError: if ``U_p`` is row-rank deficient.
        DegenerateKernelError: if ``U_p`` has a trivial kernel.
    """
    u_ini = np.asarray(u_ini, dtype=float).ravel()
    y_ini = np.asarray(y_ini, dtype=float).ravel()
    U_p, Y_p = part.U_p, part.Y_p
    if u_ini.size != U_p.shape[0] or y_ini.size != Y_p.shape[0]:
        raise DimensionError("recent window length does not match the partition")
    if noise.dim != y_ini.size:
        raise DimensionError("noise model dimension does not match the output window")
    if numerical_rank(U_p, rtol) < U_p.shape[0]:
        raise PersistentExcitationError("past input block is row-rank deficient")

    M = kernel_basis(U_p, rtol)
    if M.shape[1] == 0:
        raise DegenerateKernelError("U_p has a trivial kernel (no noise freedom)")
    g_w_star = right_pseudo_inverse(U_p, rtol) @ u_ini
    w0 = y_ini - Y_p @ g_w_star
    noise_map = Y_p @ M

    # Quadratic feasibility form on [1; g_w]: substitute w = w0 - noise_map g_w
    # into the noise bound.
    c0 = noise.quad_value(w0)
    b = -noise_map.T @ (noise.phi12 + noise.phi22 @ w0)
    C = noise_map.T @ noise.phi22 @ noise_map
    C = 0.5 * (C + C.T)
    n_w = M.shape[1]
    A_w = np.empty((1 + n_w, 1 + n_w))
    A_w[0, 0] = c0
    A_w[0, 1:] = b
    A_w[1:, 0] = b
    A_w[1:, 1:] = C

    ellipsoid = _reduce_feasible_set(noise_map, b, C, c0, rtol)
    return NoiseParameterization(
        M=M,
        g_w_star=g_w_star,
        w0=w0,
        A_w=A_w,
        noise_map=noise_map,
        ellipsoid=ellipsoid,
        model=noise,
    )


def _reduce_feasible_set(
    noise_map: np.ndarray,
    b: np.ndarray,
    C: np.ndarray,
    c0: float,
    rtol: float,
) -> ReducedEllipsoid:
    """Drop neutral directions and normalize the remaining quadratic."""
    V = row_space_basis(noise_map, rtol)
    s = V.shape[1]
    if s == 0:
        return ReducedEllipsoid(
            basis=np.zeros((noise_map.shape[1], 0)),
            center=np.zeros(0),
            radius_sq=c0,
            chol=np.zeros((0, 0)),
            scale=max(abs(c0), 1e-30),
        )
    b_red = V.T @ b
    C_red = V.T @ C @ V
    C_red = 0.5 * (C_red + C_red.T)
    # -C_red is positive definite on the retained subspace.
    chol = np.linalg.cholesky(-C_red)
    center = -np.linalg.solve(C_red, b_red)
    peak = float(b_red @ center)
    radius_sq = c0 + peak
    scale = max(abs(c0), abs(peak), 1e-30)
    return ReducedEllipsoid(
        basis=V, center=center, radius_sq=radius_sq, chol=chol, scale=scale
    )


def noise_from_gw(param: NoiseParameterization, g_w: np.ndarray) -> np.ndarray:
    """Noise vector ``-Y_p M g_w + w0`` reaching the measured window."""
    g_w = np.asarray(g_w, dtype=float).ravel()
    if g_w.size != param.n_w:
        raise DimensionError(f"g_w must have length {param.n_w}, got {g_w.size}")
    return param.w0 - param.noise_map @ g_w


def feasibility_value(param: NoiseParameterization, g_w: np.ndarray) -> float:
    """Value of ``[1; g_w]^T A_w [1; g_w]`` (feasible iff >= 0)."""
    g_w = np.asarray(g_w, dtype=float).ravel()
    if g_w.size != param.n_w:
        raise DimensionError(f"g_w must have length {param.n_w}, got {g_w.size}")
    v = np.concatenate([[1.0], g_w])
    return float(v @ param.A_w @ v)


def is_feasible_gw(
    param: NoiseParameterization, g_w: np.ndarray, tol: float = FEASIBILITY_TOL
) -> bool:
    return feasibility_value(param, g_w) >= -tol


def uniform_in_ellipsoid(
    center: np.ndarray,
    chol: np.ndarray,
    radius: float,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Uniform samples over {z : (z - center)^T chol chol^T (z - center) <= radius^2}.

    Directions come from normalized Gaussian draws and radii from the usual
    ``U^(1/dim)`` law, mapped through the inverse Cholesky factor.
    """
    dim = center.size
    if count == 0 or dim == 0:
        return np.tile(center, (count, 1))
    directions = rng.standard_normal((count, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.uniform(size=count) ** (1.0 / dim)
    xi = directions * radii[:, None]
    return center + solve_triangular(chol.T, xi.T).T


def sample_feasible_gw(
    param: NoiseParameterization,
    count: int,
    seed: Union[int, np.random.Generator] = 0,
) -> np.ndarray:
    """Draw ``count`` feasible ``g_w`` vectors, uniform over distinct noises.

    Sampling is uniform over the reduced ellipsoid (components along the
    neutral directions are zero), so equal noise vectors are equally likely.

    Returns:
        Array of shape (count, n_w).

    Raises:
        InfeasibleNoiseSetError: if the feasible set is empty.
    """
    ell = param.ellipsoid
    if ell.is_empty():
        raise InfeasibleNoiseSetError(
            "no noise vector satisfies both the bound and data consistency"
        )
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if count == 0:
        return np.zeros((0, param.n_w))
    if ell.dimension == 0 or ell.is_point():
        z = np.tile(ell.center, (count, 1))
    else:
        z = uniform_in_ellipsoid(ell.center, ell.chol, ell.radius, count, rng)
    return z @ ell.basis.T
