"""Command-line entry points.

Subcommands::

    generate    plant + config -> historical.csv, recent.csv
    synthesize  data + recent + config -> result.json
    validate    result + samples + seed -> costs.csv
    run         full pipeline -> report.json, outputs.csv, costs.csv [, SVG]
    rhc         receding-horizon loop -> rhc.csv

Exit codes: 0 success, 2 infeasible, 3 solver failure, 1 any other error.
"""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from .behavioral import TrajectoryData, partition, stack_window
from .errors import DdtrackError, InfeasibleNoiseSetError, SolverBackendError
from .experiments import (
    ExperimentConfig,
    emit_plots,
    generate_recent_window,
    prepare_pipeline,
    run_experiment,
    run_receding_horizon,
    synthesize_for_window,
)
from .noise import build_parameterization, sample_feasible_gw
from .predictor import build_predictor, lqte, predict, select_rows
from .synthesis import SolverStatus, SynthesisResult

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_INFEASIBLE = 2
EXIT_SOLVER_FAILURE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise _UsageError(message)


def _parse_seed_overrides(pairs: List[str]) -> dict:
    overrides = {}
    for pair in pairs:
        name, _, value = pair.partition("=")
        if not name or not value:
            raise _UsageError(f"--seed expects NAME=INT, got '{pair}'")
        try:
            overrides[name] = int(value)
        except ValueError as exc:
            raise _UsageError(f"seed value for '{name}' is not an integer") from exc
    return overrides


def _load_config(args) -> ExperimentConfig:
    config = (
        ExperimentConfig.from_json(args.config)
        if args.config
        else ExperimentConfig.benchmark()
    )
    overrides = _parse_seed_overrides(args.seed or [])
    if overrides:
        config = config.with_seed_overrides(overrides)
    if getattr(args, "backend", None):
        config = replace(config, solver=replace(config.solver, backend=args.backend))
    return config


def _status_exit(status: SolverStatus) -> int:
    if status is SolverStatus.OPTIMAL:
        return EXIT_OK
    if status is SolverStatus.INFEASIBLE:
        return EXIT_INFEASIBLE
    return EXIT_SOLVER_FAILURE


def _cmd_generate(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state = prepare_pipeline(config)
    state.data.to_csv(out / "historical.csv")
    window = generate_recent_window(
        config.system,
        state.x_end,
        config.T_ini,
        state.model,
        config.amplitude,
        config.seeds["recent"],
        config.seeds["noise"],
    )
    window.to_csv(out / "recent.csv", config.system.m, config.system.p)
    print(f"wrote {out / 'historical.csv'} and {out / 'recent.csv'}")
    return EXIT_OK


def _resolve_inputs(args, config):
    """Pipeline state and measured window from files, or regenerated from seeds."""
    state = prepare_pipeline(config)
    if args.data:
        data = TrajectoryData.from_csv(args.data)
        part = partition(data, config.T_ini, config.T_e, system_order=config.system.n)
        state = replace(state, data=data, part=part, selection=select_rows(part))
    if args.recent:
        recent = TrajectoryData.from_csv(args.recent)
        if recent.T_d != config.T_ini:
            raise DdtrackError(
                f"recent window has {recent.T_d} samples, expected T_ini={config.T_ini}"
            )
        return state, stack_window(recent.u), stack_window(recent.y)
    window = generate_recent_window(
        config.system,
        state.x_end,
        config.T_ini,
        state.model,
        config.amplitude,
        config.seeds["recent"],
        config.seeds["noise"],
    )
    return state, window.u_ini, window.y_ini


def _cmd_synthesize(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    state, u_ini, y_ini = _resolve_inputs(args, config)
    _, _, result = synthesize_for_window(state, u_ini, y_ini, config.solver)
    result.save(out / "result.json")
    print(f"status={result.status.value} gamma_star={result.gamma_star}")
    return _status_exit(result.status)


def _cmd_validate(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = SynthesisResult.from_json(args.result)
    if result.status is not SolverStatus.OPTIMAL or result.u_star is None:
        print("result is not optimal; nothing to validate", file=sys.stderr)
        return _status_exit(result.status)
    state, u_ini, y_ini = _resolve_inputs(args, config)
    param = build_parameterization(state.part, u_ini, y_ini, state.model)
    pred = build_predictor(state.part, param, selection=state.selection)
    gws = sample_feasible_gw(param, config.n_samples, config.seeds["validation"])
    costs = [lqte(state.problem, result.u_star, predict(pred, result.u_star, gw)) for gw in gws]

    costs_path = out / "costs.csv"
    with open(costs_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["realization", "cost", "gamma_star"])
        for idx, cost in enumerate(costs):
            writer.writerow([idx, repr(float(cost)), repr(result.gamma_star)])
    print(f"wrote {costs_path} ({len(costs)} realizations)")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = _load_config(args)
    report = run_experiment(config)
    written = emit_plots(report, args.out, svg=args.svg)
    for path in written:
        print(f"wrote {path}")
    print(
        f"status={report.status.value} gamma_star={report.gamma_star} "
        f"worst_case={report.worst_case_gamma}"
    )
    return _status_exit(report.status)


def _cmd_rhc(args) -> int:
    config = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    log = run_receding_horizon(
        config.system, config, steps=args.steps, seed=args.rhc_seed
    )
    log.to_csv(out / "rhc.csv")
    print(f"wrote {out / 'rhc.csv'} ({log.steps} steps)")
    if log.aborted_at is not None:
        print(f"aborted at step {log.aborted_at}: {log.statuses[-1]}", file=sys.stderr)
        return (
            EXIT_INFEASIBLE
            if log.statuses[-1] == SolverStatus.INFEASIBLE.value
            else EXIT_SOLVER_FAILURE
        )
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="ddtrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="experiment configuration JSON")
        p.add_argument(
            "--seed",
            action="append",
            metavar="NAME=INT",
            help="override one named seed (repeatable)",
        )
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--backend", help="conic solver backend (clarabel, cvxopt)")

    p_gen = sub.add_parser("generate", help="write historical and recent data CSVs")
    add_common(p_gen)
    p_gen.set_defaults(func=_cmd_generate)

    p_syn = sub.add_parser("synthesize", help="solve the synthesis problem")
    add_common(p_syn)
    p_syn.add_argument("--data", help="historical trajectory CSV (default: generate)")
    p_syn.add_argument("--recent", help="recent window CSV (default: generate)")
    p_syn.set_defaults(func=_cmd_synthesize)

    p_val = sub.add_parser("validate", help="Monte-Carlo check of a synthesis result")
    add_common(p_val)
    p_val.add_argument("--result", required=True, help="result JSON from 'synthesize'")
    p_val.add_argument("--data", help="historical trajectory CSV (default: generate)")
    p_val.add_argument("--recent", help="recent window CSV (default: generate)")
    p_val.set_defaults(func=_cmd_validate)

    p_run = sub.add_parser("run", help="full pipeline with report emission")
    add_common(p_run)
    p_run.add_argument("--svg", action="store_true", help="also write SVG charts")
    p_run.set_defaults(func=_cmd_run)

    p_rhc = sub.add_parser("rhc", help="closed-loop receding-horizon run")
    add_common(p_rhc)
    p_rhc.add_argument("--steps", type=int, required=True, help="number of steps")
    p_rhc.add_argument(
        "--rhc-seed", type=int, default=0, help="seed of the measurement-noise stream"
    )
    p_rhc.set_defaults(func=_cmd_rhc)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER
    except InfeasibleNoiseSetError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverBackendError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE
    except DdtrackError as exc:
        # stage wrappers keep their root cause in the chain
        cause = exc.__cause__
        while cause is not None:
            if isinstance(cause, InfeasibleNoiseSetError):
                print(f"infeasible: {exc}", file=sys.stderr)
                return EXIT_INFEASIBLE
            if isinstance(cause, SolverBackendError):
                print(f"solver failure: {exc}", file=sys.stderr)
                return EXIT_SOLVER_FAILURE
            cause = cause.__cause__
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
