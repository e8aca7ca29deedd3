"""End-to-end experiment pipeline and receding-horizon runner.

``run_experiment`` wires the full chain: generate historical data from the
plant, record a recent window, corrupt its outputs with an admissible noise
draw, build the noise parameterization and predictor, solve the synthesis
problem, then validate the bound against sampled noise realizations and the
exact worst-case oracle.  Everything is seeded, so identical configurations
reproduce identical reports byte for byte (timing fields aside).
"""
from __future__ import annotations

import csv
import json
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .behavioral import HankelPartition, TrajectoryData, partition, stack_window
from .errors import DimensionError, ExperimentStageError
from .noise import (
    NoiseModel,
    NoiseParameterization,
    build_parameterization,
    noise_from_gw,
    sample_feasible_gw,
    uniform_in_ellipsoid,
)
from .plant import LtiSystem, generate_historical, simulate
from .predictor import (
    OutputPredictor,
    TrackingProblem,
    build_predictor,
    lqte,
    predict,
    select_rows,
)
from .synthesis import (
    SolverOptions,
    SolverStatus,
    SynthesisResult,
    assemble_lmi,
    solve,
    worst_case_cost,
)

DEFAULT_SEEDS = {"data": 0, "recent": 1, "noise": 2, "validation": 3}


def benchmark_system() -> LtiSystem:
    """Third-order single-input single-output test system used by the CLI."""
    return LtiSystem(
        A=np.array(
            [
                [0.8768, 0.4147, 0.0678],
                [0.3934, -0.6436, -0.2961],
                [-0.7907, 0.7055, 0.1587],
            ]
        ),
        B=np.array([[0.9567], [0.1039], [-0.2155]]),
        C=np.array([[0.4164, -0.7185, -0.9618]]),
        D=np.array([[0.0]]),
    )


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one synthesis-and-validation run."""

    system: LtiSystem
    T_d: int = 100
    T_ini: int = 4
    T_e: int = 20
    epsilon: float = 0.001
    q_weight: np.ndarray = field(default_factory=lambda: np.eye(1))
    r_weight: np.ndarray = field(default_factory=lambda: np.eye(1))
    reference: Optional[np.ndarray] = None   # None means regulation to zero
    n_samples: int = 100
    amplitude: float = 1.0
    seeds: dict = field(default_factory=lambda: dict(DEFAULT_SEEDS))
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.T_ini + self.T_e > self.T_d:
            raise DimensionError("T_ini + T_e must not exceed T_d")
        if self.epsilon < 0:
            raise DimensionError("epsilon must be nonnegative")
        if self.n_samples < 0:
            raise DimensionError("n_samples must be nonnegative")
        seeds = dict(DEFAULT_SEEDS)
        seeds.update(self.seeds)
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "q_weight", np.atleast_2d(np.asarray(self.q_weight, float)))
        object.__setattr__(self, "r_weight", np.atleast_2d(np.asarray(self.r_weight, float)))
        if self.reference is not None:
            object.__setattr__(
                self, "reference", np.asarray(self.reference, float).ravel()
            )

    def noise_model(self) -> NoiseModel:
        return NoiseModel.energy_bound(self.epsilon, self.T_ini, self.system.p)

    def tracking_problem(self) -> TrackingProblem:
        p = self.system.p
        r = self.reference
        if r is None:
            r = np.zeros(p * self.T_e)
        return TrackingProblem(r=r, Q=self.q_weight, R=self.r_weight)

    def with_seed_overrides(self, overrides: dict) -> "ExperimentConfig":
        seeds = dict(self.seeds)
        seeds.update(overrides)
        return replace(self, seeds=seeds)

    @classmethod
    def benchmark(cls, **changes) -> "ExperimentConfig":
        """Default regulation setup on :func:`benchmark_system`."""
        config = cls(system=benchmark_system())
        return replace(config, **changes) if changes else config

    @classmethod
    def from_json(cls, source: Union[str, Path, dict]) -> "ExperimentConfig":
        if isinstance(source, (str, Path)):
            base = Path(source).parent
            with open(source) as fh:
                doc = json.load(fh)
        else:
            base, doc = Path("."), dict(source)
        system_src = doc.get("system", "benchmark")
        if system_src == "benchmark":
            system = benchmark_system()
        elif isinstance(system_src, str):
            system = LtiSystem.from_json(base / system_src)
        else:
            system = LtiSystem.from_json(system_src)
        reference = doc.get("reference", "zero")
        solver_doc = doc.get("solver", {})
        return cls(
            system=system,
            T_d=int(doc.get("T_d", 100)),
            T_ini=int(doc.get("T_ini", 4)),
            T_e=int(doc.get("T_e", 20)),
            epsilon=float(doc.get("epsilon", 0.001)),
            q_weight=np.array(doc.get("q_weight", [[1.0]]), dtype=float),
            r_weight=np.array(doc.get("r_weight", [[1.0]]), dtype=float),
            reference=None if reference == "zero" else np.array(reference, dtype=float),
            n_samples=int(doc.get("n_samples", 100)),
            amplitude=float(doc.get("amplitude", 1.0)),
            seeds=dict(doc.get("seeds", {})),
            solver=SolverOptions(
                backend=solver_doc.get("backend", "clarabel"),
                tol=solver_doc.get("tol", 1e-8),
                verbose=bool(solver_doc.get("verbose", False)),
            ),
        )

    def to_json(self) -> dict:
        return {
            "system": self.system.to_json(),
            "T_d": self.T_d,
            "T_ini": self.T_ini,
            "T_e": self.T_e,
            "epsilon": self.epsilon,
            "q_weight": self.q_weight.tolist(),
            "r_weight": self.r_weight.tolist(),
            "reference": "zero" if self.reference is None else self.reference.tolist(),
            "n_samples": self.n_samples,
            "amplitude": self.amplitude,
            "seeds": dict(self.seeds),
            "solver": {"backend": self.solver.backend, "tol": self.solver.tol},
        }


@dataclass(frozen=True)
class RecentWindow:
    """Measured recent data: true trajectory plus injected output noise."""

    u_ini: np.ndarray
    y_ini_true: np.ndarray
    y_ini: np.ndarray
    injected_noise: np.ndarray

    def to_csv(self, path: Union[str, Path], m: int, p: int) -> None:
        TrajectoryData(
            u=np.asarray(self.u_ini).reshape(m, -1, order="F"),
            y=np.asarray(self.y_ini).reshape(p, -1, order="F"),
        ).to_csv(path)


def sample_admissible_noise(model: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the set ``{w : [1; w]^T Phi [1; w] >= 0}``."""
    center = -np.linalg.solve(model.phi22, model.phi12)
    radius_sq = model.phi11 + model.phi12 @ center
    if radius_sq < 0:
        raise DimensionError("the noise bound admits no vector at all")
    chol = np.linalg.cholesky(-model.phi22)
    return uniform_in_ellipsoid(
        center, chol, float(np.sqrt(max(radius_sq, 0.0))), 1, rng
    )[0]


def generate_recent_window(
    sys: LtiSystem,
    x_start: np.ndarray,
    T_ini: int,
    model: NoiseModel,
    amplitude: float,
    recent_seed: int,
    noise_seed: int,
) -> RecentWindow:
    """Continue the plant for ``T_ini`` steps and corrupt the measured outputs.

    Inputs are drawn like the historical ones; the injected noise is an
    admissible draw from the quadratic bound, which keeps the corrupted window
    itself consistent with the noise model.
    """
    rng_recent = np.random.default_rng(recent_seed)
    u_ini = rng_recent.uniform(-amplitude, amplitude, size=(sys.m, T_ini))
    y_true = simulate(sys, x_start, u_ini)
    w = sample_admissible_noise(model, np.random.default_rng(noise_seed))
    y_true_v = stack_window(y_true)
    return RecentWindow(
        u_ini=stack_window(u_ini),
        y_ini_true=y_true_v,
        y_ini=y_true_v + w,
        injected_noise=w,
    )


@dataclass(frozen=True)
class ExperimentReport:
    """Everything ``run_experiment`` produced, ready for CSV/JSON emission."""

    config: ExperimentConfig
    status: SolverStatus
    gamma_star: Optional[float]
    alpha_star: Optional[float]
    u_star: Optional[np.ndarray]
    solve_time: float
    injected_noise: np.ndarray
    costs: np.ndarray                 # (n_samples,)
    outputs: np.ndarray               # (n_samples, p * T_e)
    worst_case_gamma: Optional[float]
    worst_case_gw: Optional[np.ndarray]

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "status": self.status.value,
            "gamma_star": self.gamma_star,
            "alpha_star": self.alpha_star,
            "u_star": None if self.u_star is None else self.u_star.tolist(),
            "worst_case_gamma": self.worst_case_gamma,
            "n_realizations": int(self.costs.size),
            "max_realized_cost": float(self.costs.max()) if self.costs.size else None,
            "timings": {"solve_seconds": self.solve_time},
        }


@contextmanager
def _stage(name: str):
    try:
        yield
    except ExperimentStageError:
        raise
    except Exception as exc:
        raise ExperimentStageError(name, str(exc)) from exc


@dataclass(frozen=True)
class PipelineState:
    """Intermediate objects shared by the batch and receding-horizon runs."""

    data: TrajectoryData
    x_end: np.ndarray
    part: HankelPartition
    model: NoiseModel
    problem: TrackingProblem
    selection: tuple


def prepare_pipeline(config: ExperimentConfig) -> PipelineState:
    with _stage("historical-data"):
        data, x_end = generate_historical(
            config.system,
            config.T_d,
            amplitude=config.amplitude,
            seed=config.seeds["data"],
            return_final_state=True,
        )
        part = partition(data, config.T_ini, config.T_e, system_order=config.system.n)
    with _stage("row-selection"):
        selection = select_rows(part)
    return PipelineState(
        data=data,
        x_end=x_end,
        part=part,
        model=config.noise_model(),
        problem=config.tracking_problem(),
        selection=selection,
    )


def synthesize_for_window(
    state: PipelineState,
    u_ini: np.ndarray,
    y_ini: np.ndarray,
    solver: SolverOptions,
):
    """Parameterize noise for a measured window, build the predictor and solve."""
    with _stage("noise-parameterization"):
        param = build_parameterization(state.part, u_ini, y_ini, state.model)
    with _stage("predictor"):
        pred = build_predictor(state.part, param, selection=state.selection)
    with _stage("synthesis"):
        lmi = assemble_lmi(pred, state.problem, param)
        result = solve(lmi, solver)
    return param, pred, result


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Full pipeline: data, corruption, synthesis, Monte-Carlo validation, oracle."""
    state = prepare_pipeline(config)
    with _stage("recent-window"):
        window = generate_recent_window(
            config.system,
            state.x_end,
            config.T_ini,
            state.model,
            config.amplitude,
            config.seeds["recent"],
            config.seeds["noise"],
        )
    param, pred, result = synthesize_for_window(
        state, window.u_ini, window.y_ini, config.solver
    )

    p_te = config.system.p * config.T_e
    costs = np.zeros(0)
    outputs = np.zeros((0, p_te))
    wc_gamma = None
    wc_gw = None
    if result.status is SolverStatus.OPTIMAL:
        if config.n_samples > 0:
            with _stage("validation"):
                gws = sample_feasible_gw(
                    param, config.n_samples, config.seeds["validation"]
                )
                outputs = np.array([predict(pred, result.u_star, gw) for gw in gws])
                costs = np.array(
                    [lqte(state.problem, result.u_star, y) for y in outputs]
                )
        with _stage("worst-case-oracle"):
            wc_gamma, wc_gw = worst_case_cost(pred, state.problem, param, result.u_star)

    return ExperimentReport(
        config=config,
        status=result.status,
        gamma_star=result.gamma_star,
        alpha_star=result.alpha_star,
        u_star=result.u_star,
        solve_time=result.solve_time,
        injected_noise=window.injected_noise,
        costs=costs,
        outputs=outputs,
        worst_case_gamma=wc_gamma,
        worst_case_gw=wc_gw,
    )


# ---------------------------------------------------------------------------
# report emission


def _write_csv(path: Path, header: List[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)


def _polyline_svg(path: Path, series: np.ndarray, title: str) -> None:
    """Minimal static line chart: one polyline per row of ``series``."""
    width, height, pad = 640, 400, 40
    n_pts = series.shape[1] if series.size else 0
    lo = float(series.min()) if series.size else 0.0
    hi = float(series.max()) if series.size else 1.0
    span = (hi - lo) or 1.0
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<title>{title}</title>',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for row in series:
        pts = " ".join(
            f"{pad + (width - 2 * pad) * (j / max(n_pts - 1, 1)):.2f},"
            f"{height - pad - (height - 2 * pad) * ((v - lo) / span):.2f}"
            for j, v in enumerate(row)
        )
        lines.append(
            f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="1" opacity="0.5"/>'
        )
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")


def _scatter_svg(path: Path, values: np.ndarray, level: float, title: str) -> None:
    """Scatter of per-realization values with a horizontal reference line."""
    width, height, pad = 640, 400, 40
    n = values.size
    lo = min(float(values.min()) if n else 0.0, level) * 0.98
    hi = max(float(values.max()) if n else 1.0, level) * 1.02
    span = (hi - lo) or 1.0

    def ypix(v: float) -> float:
        return height - pad - (height - 2 * pad) * ((v - lo) / span)

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<title>{title}</title>',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{ypix(level):.2f}" x2="{width - pad}" '
        f'y2="{ypix(level):.2f}" stroke="red" stroke-width="1.5"/>',
    ]
    for i, v in enumerate(values):
        x = pad + (width - 2 * pad) * (i / max(n - 1, 1))
        lines.append(
            f'<circle cx="{x:.2f}" cy="{ypix(float(v)):.2f}" r="3" fill="none" stroke="steelblue"/>'
        )
    lines.append("</svg>")
    path.write_text("\n".join(lines) + "\n")


def emit_plots(
    report: ExperimentReport, out_dir: Union[str, Path], svg: bool = False
) -> List[Path]:
    """Write ``outputs.csv`` and ``costs.csv`` (optional SVG charts) for a report.

    ``outputs.csv`` holds the per-realization output trajectories in long form
    (realization, k, y_1..y_p); ``costs.csv`` one row per realization with the
    certified bound repeated for reference.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    p = report.config.system.p
    written = []

    outputs_path = out_dir / "outputs.csv"
    rows = []
    for idx, traj in enumerate(report.outputs):
        mat = traj.reshape(p, -1, order="F")
        for k in range(mat.shape[1]):
            rows.append([idx, k] + [repr(float(v)) for v in mat[:, k]])
    _write_csv(
        outputs_path,
        ["realization", "k"] + [f"y_{i + 1}" for i in range(p)],
        rows,
    )
    written.append(outputs_path)

    costs_path = out_dir / "costs.csv"
    gamma_repr = "" if report.gamma_star is None else repr(report.gamma_star)
    _write_csv(
        costs_path,
        ["realization", "cost", "gamma_star"],
        [[idx, repr(float(c)), gamma_repr] for idx, c in enumerate(report.costs)],
    )
    written.append(costs_path)

    if svg and report.outputs.size:
        first_channel = report.outputs.reshape(report.outputs.shape[0], -1, p)[:, :, 0]
        svg_outputs = out_dir / "outputs.svg"
        _polyline_svg(svg_outputs, first_channel, "output trajectories")
        written.append(svg_outputs)
        if report.gamma_star is not None:
            svg_costs = out_dir / "costs.svg"
            _scatter_svg(svg_costs, report.costs, report.gamma_star, "realized costs")
            written.append(svg_costs)

    report_path = out_dir / "report.json"
    with open(report_path, "w") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
    written.append(report_path)
    return written


# ---------------------------------------------------------------------------
# receding horizon


@dataclass(frozen=True)
class RecedingHorizonLog:
    """Closed-loop record of a receding-horizon run."""

    states: np.ndarray            # (n, steps + 1)
    inputs: np.ndarray            # (m, steps)
    outputs_true: np.ndarray      # (p, steps)
    outputs_measured: np.ndarray  # (p, steps)
    gamma: np.ndarray             # (steps,)
    statuses: tuple
    aborted_at: Optional[int] = None

    @property
    def steps(self) -> int:
        return self.inputs.shape[1]

    def to_csv(self, path: Union[str, Path]) -> None:
        m, p = self.inputs.shape[0], self.outputs_true.shape[0]
        header = (
            ["k"]
            + [f"u_{i + 1}" for i in range(m)]
            + [f"y_{i + 1}" for i in range(p)]
            + [f"y_meas_{i + 1}" for i in range(p)]
            + ["gamma", "status"]
        )
        rows = []
        for k in range(self.steps):
            rows.append(
                [k]
                + [repr(float(v)) for v in self.inputs[:, k]]
                + [repr(float(v)) for v in self.outputs_true[:, k]]
                + [repr(float(v)) for v in self.outputs_measured[:, k]]
                + [repr(float(self.gamma[k])), self.statuses[k]]
            )
        _write_csv(Path(path), header, rows)


def run_receding_horizon(
    plant: LtiSystem,
    config: ExperimentConfig,
    steps: int,
    seed: int = 0,
) -> RecedingHorizonLog:
    """Re-solve the synthesis each step and apply the first optimal input.

    The measurement window always holds the latest ``T_ini`` input/output
    samples; each output measurement carries an injected noise drawn uniformly
    from the per-sample ball ``|v|^2 <= phi11 / T_ini``, so every sliding
    window satisfies the energy bound.  A solver failure is recorded and the
    loop aborted.

    Only energy-form noise models (``phi12 = 0``, ``phi22 = -I``) are
    supported for the injection; the synthesis itself has no such restriction.
    """
    state = prepare_pipeline(config)
    model = state.model
    if np.any(model.phi12) or not np.allclose(model.phi22, -np.eye(model.dim)):
        raise DimensionError(
            "receding-horizon noise injection requires the energy-bound form"
        )
    m, p, n = plant.m, plant.p, plant.n
    t_ini = config.T_ini
    rng = np.random.default_rng(seed)
    per_sample_cap = np.sqrt(model.phi11 / t_ini)

    def measure(y: np.ndarray) -> np.ndarray:
        direction = rng.standard_normal(p)
        norm = np.linalg.norm(direction)
        direction = direction / norm if norm > 0 else direction
        return y + per_sample_cap * rng.uniform() ** (1.0 / p) * direction

    # warm-up window continues the historical run
    rng_recent = np.random.default_rng(config.seeds["recent"])
    u_win = rng_recent.uniform(-config.amplitude, config.amplitude, size=(m, t_ini))
    y_win_true, x = simulate(plant, state.x_end, u_win, return_final_state=True)
    y_win_meas = np.column_stack([measure(y_win_true[:, k]) for k in range(t_ini)])

    states = np.zeros((n, steps + 1))
    inputs = np.zeros((m, steps))
    outputs_true = np.zeros((p, steps))
    outputs_measured = np.zeros((p, steps))
    gammas = np.zeros(steps)
    statuses: List[str] = []
    aborted_at = None
    states[:, 0] = x

    for k in range(steps):
        param, pred, result = synthesize_for_window(
            state, stack_window(u_win), stack_window(y_win_meas), config.solver
        )
        if result.status is not SolverStatus.OPTIMAL:
            statuses.append(result.status.value)
            aborted_at = k
            break
        statuses.append(result.status.value)
        gammas[k] = result.gamma_star
        u_now = result.u_star[:m]
        inputs[:, k] = u_now

        y_now = plant.C @ x + plant.D @ u_now
        outputs_true[:, k] = y_now
        y_meas = measure(y_now)
        outputs_measured[:, k] = y_meas
        x = plant.A @ x + plant.B @ u_now
        states[:, k + 1] = x

        u_win = np.column_stack([u_win[:, 1:], u_now])
        y_win_true = np.column_stack([y_win_true[:, 1:], y_now])
        y_win_meas = np.column_stack([y_win_meas[:, 1:], y_meas])

    done = len(statuses) if aborted_at is None else aborted_at
    return RecedingHorizonLog(
        states=states[:, : done + 1],
        inputs=inputs[:, :done],
        outputs_true=outputs_true[:, :done],
        outputs_measured=outputs_measured[:, :done],
        gamma=gammas[:done],
        statuses=tuple(statuses),
        aborted_at=aborted_at,
    )
