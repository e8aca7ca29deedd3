import numpy as np
import pytest

from ddtrack import (
    ExperimentConfig,
    NoiseModel,
    TrackingProblem,
    assemble_lmi,
    benchmark_system,
    build_parameterization,
    build_predictor,
    generate_historical,
    partition,
    select_rows,
    simulate,
    solve,
    stack_window,
)


@pytest.fixture(scope="session")
def bench_sys():
    return benchmark_system()


@pytest.fixture(scope="session")
def bench_data(bench_sys):
    data, x_end = generate_historical(
        bench_sys, 100, amplitude=1.0, seed=0, return_final_state=True
    )
    return data, x_end


@pytest.fixture(scope="session")
def bench_part(bench_sys, bench_data):
    data, _ = bench_data
    return partition(data, T_ini=4, T_e=20, system_order=bench_sys.n)


@pytest.fixture(scope="session")
def bench_window(bench_sys, bench_data):
    """Exact recent window continuing the historical run, plus a noisy copy."""
    _, x_end = bench_data
    rng = np.random.default_rng(1)
    u_ini = rng.uniform(-1.0, 1.0, size=(bench_sys.m, 4))
    y_true = simulate(bench_sys, x_end, u_ini)
    rng_noise = np.random.default_rng(2)
    direction = rng_noise.standard_normal(4)
    direction /= np.linalg.norm(direction)
    w = np.sqrt(0.004) * rng_noise.uniform() ** 0.25 * direction
    u_v, y_v = stack_window(u_ini), stack_window(y_true)
    return u_v, y_v, y_v + w, w


@pytest.fixture(scope="session")
def bench_noise_model():
    return NoiseModel.energy_bound(0.001, t_ini=4, p=1)


@pytest.fixture(scope="session")
def bench_param(bench_part, bench_window, bench_noise_model):
    u_v, _, y_meas, _ = bench_window
    return build_parameterization(bench_part, u_v, y_meas, bench_noise_model)


@pytest.fixture(scope="session")
def bench_pred(bench_part, bench_param):
    return build_predictor(bench_part, bench_param)


@pytest.fixture(scope="session")
def bench_prob():
    return TrackingProblem.regulation(T_e=20, Q=1.0, R=1.0)


@pytest.fixture(scope="session")
def bench_solution(bench_pred, bench_prob, bench_param):
    lmi = assemble_lmi(bench_pred, bench_prob, bench_param)
    result = solve(lmi)
    assert result.status.value == "optimal"
    return lmi, result


@pytest.fixture(scope="session")
def bench_config():
    return ExperimentConfig.benchmark()
