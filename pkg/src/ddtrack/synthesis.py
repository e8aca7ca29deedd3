"""Worst-case optimal input synthesis and its exact certification oracle.

The min-max tracking problem reduces to minimizing a scalar bound ``gamma``
over ``(u, gamma, alpha >= 0)`` subject to one linear matrix inequality: an
S-procedure multiplier ``alpha`` absorbs the noise-feasibility quadratic, and
a Schur complement linearizes the input cost.  ``assemble_lmi`` emits that
constraint in solver-neutral form; ``solve`` dispatches it to a semidefinite
solver; ``worst_case_cost`` maximizes the realized cost over the feasible
noise set exactly, which certifies that the bound is attained rather than
conservative.

The assembled LMI never has a strictly feasible point: the noise quadratic is
supported on the row space of ``Y_p M`` whose dimension is at most the output
window size, while the LMI carries one row per kernel direction of ``U_p``.
``assemble_lmi`` therefore attaches a face basis restricting the constraint to
the subspace where it can be definite, and the adapters solve the reduced
problem (a facial reduction; congruent, hence exact).  The face basis also
whitens the input-cost block and maps the noise block to unit-ball
coordinates, which conditions the problem well enough for the certificate
tolerances below.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import brentq

from ._linalg import freeze, sym_sqrt
from .errors import (
    CostDefinitenessError,
    DimensionError,
    InfeasibleNoiseSetError,
    SolverBackendError,
)
from .noise import NoiseParameterization
from .predictor import OutputPredictor, TrackingProblem, lqte, predict

# Minimum eigenvalue demanded of the input-cost curvature matrix.
COST_DEFINITENESS_TOL = 1e-10

# Slack allowed on the LMI evaluated at a reported optimal point.
CERTIFICATE_TOL = 1e-7


class SolverStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class LmiProblem:
    """Solver-neutral description: minimize c^T x s.t. F0 + sum_i x_i F_i >= 0.

    Variables are ordered ``[u_1 .. u_{mTe}, gamma, alpha]`` with the extra
    scalar constraint ``alpha >= 0``.  ``face`` spans the subspace on which
    the constraint can be positive definite; adapters replace every block by
    its congruence ``face^T F face``.
    """

    constant: np.ndarray          # (d, d)
    coefficients: np.ndarray      # (n_var, d, d)
    objective: np.ndarray         # (n_var,)
    gamma_index: int
    alpha_index: int
    n_inputs: int
    face: Optional[np.ndarray]    # (d, k); None when the noise set is empty
    noise_set_empty: bool = False
    degenerate_noise_set: bool = False

    def __post_init__(self):
        object.__setattr__(self, "constant", freeze(self.constant))
        object.__setattr__(self, "coefficients", freeze(self.coefficients))
        object.__setattr__(self, "objective", freeze(self.objective))
        if self.face is not None:
            object.__setattr__(self, "face", freeze(self.face))

    @property
    def n_var(self) -> int:
        return self.coefficients.shape[0]

    @property
    def dim(self) -> int:
        return self.constant.shape[0]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Value of the LMI matrix at the variable vector ``x``."""
        x = np.asarray(x, dtype=float).ravel()
        if x.size != self.n_var:
            raise DimensionError(f"expected {self.n_var} variables, got {x.size}")
        return self.constant + np.tensordot(x, self.coefficients, axes=(0, 0))


def assemble_lmi(
    pred: OutputPredictor,
    prob: TrackingProblem,
    param: NoiseParameterization,
) -> LmiProblem:
    """Build the synthesis LMI for the given predictor, cost and noise set.

    Block layout (size ``m*T_e + 1 + n_w``): the leading block is the constant
    ``(Rbar + B_u^T Qbar B_u)^{-1}``; the border holds ``u`` against the
    following row; the trailing block is affine in ``(u, gamma, alpha)`` and
    couples the tracking cost with the noise quadratic.

    Raises:
        CostDefinitenessError: if ``Rbar + B_u^T Qbar B_u`` is not positive
            definite.  Use a positive-definite ``R`` (or a cost making the
            combination definite).
    """
    n_u = pred.horizon_inputs
    n_w = pred.n_w
    h = prob.Rbar + pred.B_u.T @ prob.Qbar @ pred.B_u
    h = 0.5 * (h + h.T)
    eigs = np.linalg.eigvalsh(h)
    if eigs.min() <= COST_DEFINITENESS_TOL:
        raise CostDefinitenessError(
            "Rbar + B_u^T Qbar B_u has minimum eigenvalue "
            f"{eigs.min():.3e}; choose R positive definite"
        )
    h_inv = np.linalg.inv(h)
    h_inv = 0.5 * (h_inv + h_inv.T)

    e0 = pred.y0 - prob.r
    bqe = pred.B_u.T @ prob.Qbar @ e0            # (n_u,)
    bqb = pred.B_u.T @ prob.Qbar @ pred.B_w      # (n_u, n_w)
    wqw = pred.B_w.T @ prob.Qbar @ pred.B_w
    wqw = 0.5 * (wqw + wqw.T)

    d = n_u + 1 + n_w
    one = n_u                                    # row/col index of the scalar 1
    n_var = n_u + 2
    constant = np.zeros((d, d))
    constant[:n_u, :n_u] = h_inv
    constant[one, one] = -float(e0 @ prob.Qbar @ e0)
    cross = -(e0 @ prob.Qbar @ pred.B_w)
    constant[one, one + 1:] = cross
    constant[one + 1:, one] = cross
    constant[one + 1:, one + 1:] = -wqw

    coeffs = np.zeros((n_var, d, d))
    for j in range(n_u):
        f = coeffs[j]
        f[j, one] = 1.0
        f[one, j] = 1.0
        f[one, one] = -2.0 * bqe[j]
        f[one, one + 1:] = -bqb[j]
        f[one + 1:, one] = -bqb[j]
    gamma_index, alpha_index = n_u, n_u + 1
    coeffs[gamma_index, one, one] = 1.0
    coeffs[alpha_index, one:, one:] = -param.A_w

    objective = np.zeros(n_var)
    objective[gamma_index] = 1.0

    ell = param.ellipsoid
    face: Optional[np.ndarray]
    degenerate = False
    if ell.is_empty():
        face = None
    else:
        h_half = sym_sqrt(h)
        gw_center = ell.basis @ ell.center
        if ell.dimension == 0 or ell.is_point():
            degenerate = True
            face = np.zeros((d, n_u + 1))
            face[:n_u, :n_u] = h_half
            face[one, n_u] = 1.0
            face[one + 1:, n_u] = gw_center
        else:
            s = ell.dimension
            face = np.zeros((d, n_u + 1 + s))
            face[:n_u, :n_u] = h_half
            face[one, n_u] = 1.0
            face[one + 1:, n_u] = gw_center
            # radius folded in: the noise quadratic becomes radius_sq times a
            # unit form, keeping the block conditioned for tiny budgets
            face[one + 1:, n_u + 1:] = ell.ball_axes() * ell.radius

    return LmiProblem(
        constant=constant,
        coefficients=coeffs,
        objective=objective,
        gamma_index=gamma_index,
        alpha_index=alpha_index,
        n_inputs=n_u,
        face=face,
        noise_set_empty=ell.is_empty(),
        degenerate_noise_set=degenerate,
    )


# Feasibility / duality-gap targets per backend.  The Schur complement of the
# constraint amplifies the solver's gap by roughly the input-cost curvature,
# so the targets sit well below the certificate tolerance; cvxopt does not
# converge reliably below 1e-9.
DEFAULT_TOL = {"clarabel": 1e-10, "cvxopt": 1e-9}


@dataclass(frozen=True)
class SolverOptions:
    """Backend selection and tolerances for the semidefinite solve.

    ``backend`` is one of ``"clarabel"`` or ``"cvxopt"``.  ``tol`` is the
    target feasibility / duality-gap tolerance (``None`` picks the backend
    default from ``DEFAULT_TOL``); ``certificate_tol`` bounds the admissible
    negative slack of the LMI evaluated at the reported solution.
    """

    backend: str = "clarabel"
    tol: Optional[float] = None
    max_iters: Optional[int] = None
    verbose: bool = False
    certificate_tol: float = CERTIFICATE_TOL


@dataclass(frozen=True)
class SynthesisResult:
    """Outcome of one synthesis solve."""

    status: SolverStatus
    u_star: Optional[np.ndarray] = None
    gamma_star: Optional[float] = None
    alpha_star: Optional[float] = None
    solve_time: float = 0.0
    certificate_min_eig: Optional[float] = None
    degenerate_noise_set: bool = False

    def to_json(self) -> dict:
        return {
            "u_star": None if self.u_star is None else self.u_star.tolist(),
            "gamma_star": self.gamma_star,
            "alpha_star": self.alpha_star,
            "status": self.status.value,
            "timings": {"solve_seconds": self.solve_time},
            "certificate_min_eig": self.certificate_min_eig,
            "degenerate_noise_set": self.degenerate_noise_set,
        }

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, source: Union[str, Path, dict]) -> "SynthesisResult":
        if isinstance(source, (str, Path)):
            with open(source) as fh:
                doc = json.load(fh)
        else:
            doc = source
        return cls(
            status=SolverStatus(doc["status"]),
            u_star=None if doc["u_star"] is None else np.array(doc["u_star"]),
            gamma_star=doc["gamma_star"],
            alpha_star=doc["alpha_star"],
            solve_time=doc.get("timings", {}).get("solve_seconds", 0.0),
            certificate_min_eig=doc.get("certificate_min_eig"),
            degenerate_noise_set=doc.get("degenerate_noise_set", False),
        )


_CVXPY_STATUS = {
    "optimal": SolverStatus.OPTIMAL,
    "optimal_inaccurate": SolverStatus.OPTIMAL,
    "infeasible": SolverStatus.INFEASIBLE,
    "infeasible_inaccurate": SolverStatus.INFEASIBLE,
    "unbounded": SolverStatus.UNBOUNDED,
    "unbounded_inaccurate": SolverStatus.UNBOUNDED,
}


def _backend_kwargs(options: SolverOptions) -> Tuple[str, dict]:
    backend = options.backend.lower()
    if backend not in DEFAULT_TOL:
        raise SolverBackendError(
            f"unknown backend '{options.backend}' (use 'clarabel' or 'cvxopt')"
        )
    tol = options.tol if options.tol is not None else DEFAULT_TOL[backend]
    kwargs: dict = {}
    if backend == "clarabel":
        name = "CLARABEL"
        kwargs.update(tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
        if options.max_iters is not None:
            kwargs["max_iter"] = options.max_iters
    else:
        name = "CVXOPT"
        kwargs.update(abstol=tol, reltol=tol, feastol=tol)
        if options.max_iters is not None:
            kwargs["max_iters"] = options.max_iters
    return name, kwargs


def solve(lmi: LmiProblem, options: Optional[SolverOptions] = None) -> SynthesisResult:
    """Minimize gamma subject to the assembled LMI and alpha >= 0.

    The result is certified: a solver-optimal point is downgraded to
    ``NUMERICAL_FAILURE`` unless the LMI evaluated at it (on its face when the
    noise set is a single point) has minimum eigenvalue above
    ``-certificate_tol``.  Infeasibility and numerical failures are reported,
    never clamped.
    """
    import cvxpy as cp

    options = options or SolverOptions()
    if lmi.noise_set_empty:
        return SynthesisResult(status=SolverStatus.INFEASIBLE)

    face = lmi.face
    constant_r = face.T @ lmi.constant @ face
    coeffs_r = np.array([face.T @ f @ face for f in lmi.coefficients])

    x = cp.Variable(lmi.n_var)
    expr = cp.Constant(constant_r)
    for i in range(lmi.n_var):
        expr = expr + x[i] * coeffs_r[i]
    constraints = [expr >> 0, x[lmi.alpha_index] >= 0]
    problem = cp.Problem(cp.Minimize(lmi.objective @ x), constraints)

    solver_name, kwargs = _backend_kwargs(options)
    start = time.perf_counter()
    try:
        problem.solve(solver=solver_name, verbose=options.verbose, **kwargs)
    except cp.error.SolverError:
        return SynthesisResult(
            status=SolverStatus.NUMERICAL_FAILURE,
            solve_time=time.perf_counter() - start,
        )
    elapsed = time.perf_counter() - start

    status = _CVXPY_STATUS.get(problem.status, SolverStatus.NUMERICAL_FAILURE)
    if status is not SolverStatus.OPTIMAL or x.value is None:
        return SynthesisResult(status=status, solve_time=elapsed)

    xv = np.asarray(x.value, dtype=float).ravel()
    alpha = float(xv[lmi.alpha_index])
    if alpha < -1e-6:
        return SynthesisResult(
            status=SolverStatus.NUMERICAL_FAILURE, solve_time=elapsed
        )
    alpha = max(alpha, 0.0)
    xv[lmi.alpha_index] = alpha

    # Certificate on the emitted LMI; the point-degenerate case has no finite
    # multiplier, so the check lives on the solved face there.
    if lmi.degenerate_noise_set:
        cert_matrix = constant_r + np.tensordot(xv, coeffs_r, axes=(0, 0))
    else:
        cert_matrix = lmi.evaluate(xv)
    cert_eig = float(np.linalg.eigvalsh(cert_matrix).min())
    if cert_eig < -options.certificate_tol:
        return SynthesisResult(
            status=SolverStatus.NUMERICAL_FAILURE,
            solve_time=elapsed,
            certificate_min_eig=cert_eig,
        )
    return SynthesisResult(
        status=SolverStatus.OPTIMAL,
        u_star=xv[: lmi.n_inputs].copy(),
        gamma_star=float(xv[lmi.gamma_index]),
        alpha_star=alpha,
        solve_time=elapsed,
        certificate_min_eig=cert_eig,
        degenerate_noise_set=lmi.degenerate_noise_set,
    )


def _max_quadratic_over_ball(
    h: np.ndarray, g: np.ndarray, radius: float
) -> Tuple[float, np.ndarray]:
    """Exact maximum of ``xi^T h xi + 2 g^T xi`` over ``|xi| <= radius``.

    Global optimality follows from the trust-region conditions: the maximizer
    satisfies ``(lam I - h) xi = g`` with ``lam >= max(eig(h))`` and, when
    ``lam > 0``, ``|xi| = radius``.  ``lam`` is located on the secular curve
    ``|(lam I - h)^{-1} g| = radius`` by safeguarded root finding, with the
    orthogonal-gradient (hard) case filled along a top eigenvector.
    """
    dim = g.size
    if radius <= 0.0 or dim == 0:
        return 0.0, np.zeros(dim)
    dvals, w = np.linalg.eigh(h)
    ghat = w.T @ g
    dmax = dvals[-1]
    gnorm = float(np.linalg.norm(ghat))
    top = dvals >= dmax - 1e-12 * max(1.0, abs(dmax))

    def value(xi: np.ndarray) -> float:
        return float(xi @ h @ xi + 2.0 * g @ xi)

    def boundary_fill() -> np.ndarray:
        # multiplier pinned at dmax: solve off the top eigenspace, then walk
        # along a top eigenvector until the sphere is reached
        rest = np.zeros(dim)
        rest[~top] = ghat[~top] / (dmax - dvals[~top])
        norm_rest = float(np.linalg.norm(rest))
        if norm_rest > radius:
            xi_hat = rest * (radius / norm_rest)
        else:
            xi_hat = rest
            xi_hat[np.argmax(dvals)] += np.sqrt(max(radius**2 - norm_rest**2, 0.0))
        return w @ xi_hat

    if gnorm == 0.0:
        xi = radius * w[:, -1]
        return value(xi), xi

    def secular(lam: float) -> float:
        return float(np.linalg.norm(ghat / (lam - dvals))) - radius

    hard = float(np.linalg.norm(ghat[top])) <= 1e-12 * gnorm
    if hard:
        rest_norm = float(np.linalg.norm(ghat[~top] / (dmax - dvals[~top]))) if (~top).any() else 0.0
        if rest_norm <= radius:
            xi = boundary_fill()
            return value(xi), xi

    lo = dmax + max(abs(dmax), 1.0) * 4 * np.finfo(float).eps
    if secular(lo) <= 0.0:
        # the gradient cannot push the secular curve past the radius at any
        # representable multiplier: the fill is exact to rounding
        xi = boundary_fill()
        return value(xi), xi
    hi = dmax + gnorm / radius + 1e-12
    if hi <= lo:
        hi = lo + max(abs(lo), 1.0)
    lam = brentq(secular, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)

    # Back-substitute off the top eigenspace only; the top component of the
    # root is ill-conditioned when lam is pinned near dmax, but its magnitude
    # is fixed by the sphere, so reconstruct it from the radius instead.
    xi_hat = np.zeros(dim)
    xi_hat[~top] = ghat[~top] / (lam - dvals[~top])
    norm_rest = float(np.linalg.norm(xi_hat))
    if norm_rest > radius:
        xi_hat *= radius / norm_rest
    else:
        fill = np.sqrt(max(radius**2 - norm_rest**2, 0.0))
        top_norm = float(np.linalg.norm(ghat[top]))
        if top_norm > 0.0:
            xi_hat[top] = ghat[top] * (fill / top_norm)
        else:
            xi_hat[np.argmax(dvals)] = fill
    xi = w @ xi_hat
    return value(xi), xi


def worst_case_cost(
    pred: OutputPredictor,
    prob: TrackingProblem,
    param: NoiseParameterization,
    u: np.ndarray,
) -> Tuple[float, np.ndarray]:
    """Exactly maximize the tracking cost of ``u`` over all feasible noises.

    Works in the bounded ellipsoid coordinates of the noise set (neutral
    directions cannot change the cost), so the inner maximization is a
    quadratic over a ball solved exactly.

    Returns:
        (gamma_wc, g_w_wc): the worst-case cost and a maximizing free vector.

    Raises:
        InfeasibleNoiseSetError: if the feasible set is empty.
    """
    u = np.asarray(u, dtype=float).ravel()
    ell = param.ellipsoid
    if ell.is_empty():
        raise InfeasibleNoiseSetError(
            "no noise vector satisfies both the bound and data consistency"
        )
    gw_center = ell.basis @ ell.center
    if ell.dimension == 0 or ell.is_point():
        return lqte(prob, u, predict(pred, u, gw_center)), gw_center

    y_center = predict(pred, u, gw_center)
    b_red = pred.B_w @ ell.basis
    axes = solve_triangular(ell.chol, b_red.T, lower=True).T   # B_w V L^{-T}
    h = axes.T @ prob.Qbar @ axes
    h = 0.5 * (h + h.T)
    g = axes.T @ (prob.Qbar @ (y_center - prob.r))
    _, xi = _max_quadratic_over_ball(h, g, ell.radius)
    gw = ell.gw_from_ball(xi)
    return lqte(prob, u, predict(pred, u, gw)), gw
