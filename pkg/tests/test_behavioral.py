import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ddtrack import (
    InconsistentInitialConditionError,
    TrajectoryData,
    build_hankel,
    is_persistently_exciting,
    is_trajectory,
    partition,
    simulate,
    simulate_ddriven,
    stack_window,
)
from ddtrack.errors import DimensionError, PersistentExcitationError

from helpers import recursion_oracle, rank_oracle


class TestBuildHankel:
    def test_scalar_sequence_depth_two(self):
        h = build_hankel(np.array([1.0, 2.0, 3.0, 4.0]), 2)
        np.testing.assert_array_equal(h, [[1, 2, 3], [2, 3, 4]])

    def test_depth_equals_length_gives_single_column(self):
        h = build_hankel(np.array([1.0, 2.0, 3.0, 4.0]), 4)
        np.testing.assert_array_equal(h, [[1], [2], [3], [4]])

    def test_shape_for_long_window(self):
        rng = np.random.default_rng(0)
        h = build_hankel(rng.uniform(-1, 1, (1, 100)), 24)
        assert h.shape == (24, 77)

    @pytest.mark.parametrize("depth", [0, 5, -1])
    def test_depth_out_of_range(self, depth):
        with pytest.raises(DimensionError):
            build_hankel(np.ones((1, 4)), depth)

    def test_multichannel_blocks(self):
        seq = np.arange(8.0).reshape(2, 4, order="F")
        h = build_hankel(seq, 2)
        # block (i, j) equals column i + j of the sequence
        for i in range(2):
            for j in range(3):
                np.testing.assert_array_equal(h[2 * i : 2 * i + 2, j], seq[:, i + j])

    @settings(max_examples=30, deadline=None)
    @given(
        seed=st.integers(0, 10**6),
        q=st.integers(1, 3),
        t_len=st.integers(2, 15),
        data=st.data(),
    )
    def test_shift_structure(self, seed, q, t_len, data):
        depth = data.draw(st.integers(1, t_len))
        seq = np.random.default_rng(seed).standard_normal((q, t_len))
        h = build_hankel(seq, depth)
        for i in range(1, depth):
            for j in range(h.shape[1] - 1):
                np.testing.assert_array_equal(
                    h[q * i : q * (i + 1), j], h[q * (i - 1) : q * i, j + 1]
                )


class TestPersistentExcitation:
    def test_constant_sequence_is_not_exciting(self):
        assert not is_persistently_exciting(np.ones((1, 10)), 2)

    def test_random_sequence_high_order(self):
        rng = np.random.default_rng(7)
        seq = rng.uniform(-1, 1, (1, 100))
        # independent oracle: generic numpy rank of the same Hankel matrix
        assert rank_oracle(build_hankel(seq, 27)) == 27
        assert is_persistently_exciting(seq, 27)

    def test_more_rows_than_columns_fails(self):
        rng = np.random.default_rng(3)
        seq = rng.uniform(-1, 1, (2, 10))
        # m * L = 12 > T_d - L + 1 = 5
        assert not is_persistently_exciting(seq, 6)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 10**6), order=st.integers(2, 10))
    def test_monotone_in_order(self, seed, order):
        seq = np.random.default_rng(seed).uniform(-1, 1, (1, 40))
        if is_persistently_exciting(seq, order):
            for lower in range(1, order):
                assert is_persistently_exciting(seq, lower)


class TestPartition:
    def test_benchmark_shapes(self, bench_part):
        assert bench_part.U_p.shape == (4, 77)
        assert bench_part.Y_p.shape == (4, 77)
        assert bench_part.U_f.shape == (20, 77)
        assert bench_part.Y_f.shape == (20, 77)

    def test_window_equal_to_data_gives_one_column(self):
        rng = np.random.default_rng(5)
        data = TrajectoryData(u=rng.uniform(-1, 1, (1, 6)), y=rng.standard_normal((1, 6)))
        part = partition(data, T_ini=2, T_e=4)
        assert part.N_c == 1

    def test_window_longer_than_data_fails(self):
        rng = np.random.default_rng(5)
        data = TrajectoryData(u=rng.uniform(-1, 1, (1, 6)), y=rng.standard_normal((1, 6)))
        with pytest.raises(DimensionError):
            partition(data, T_ini=3, T_e=4)

    def test_blocks_split_the_hankel_matrix(self, bench_part, bench_data):
        data, _ = bench_data
        hu = build_hankel(data.u, 24)
        np.testing.assert_array_equal(np.vstack([bench_part.U_p, bench_part.U_f]), hu)
        hy = build_hankel(data.y, 24)
        np.testing.assert_array_equal(np.vstack([bench_part.Y_p, bench_part.Y_f]), hy)

    def test_excitation_check_when_order_supplied(self):
        data = TrajectoryData(u=np.ones((1, 30)), y=np.zeros((1, 30)))
        with pytest.raises(PersistentExcitationError):
            partition(data, T_ini=2, T_e=3, system_order=2)


class TestIsTrajectory:
    def test_historical_windows_are_trajectories(self, bench_part, bench_data):
        data, _ = bench_data
        for start in (0, 13, 40):
            u_ini = stack_window(data.u[:, start : start + 4])
            y_ini = stack_window(data.y[:, start : start + 4])
            assert is_trajectory(bench_part, u_ini, y_ini)

    def test_zero_window_is_a_trajectory(self, bench_part):
        assert is_trajectory(bench_part, np.zeros(4), np.zeros(4))

    def test_orthogonal_perturbation_is_rejected(self, bench_part, bench_data):
        data, _ = bench_data
        u_ini = stack_window(data.u[:, 10:14])
        y_ini = stack_window(data.y[:, 10:14])
        stack = bench_part.past_stack()
        # residual direction outside the span of the past blocks
        q, _ = np.linalg.qr(stack)
        probe = np.random.default_rng(11).standard_normal(stack.shape[0])
        resid = probe - q @ (q.T @ probe)
        resid -= q @ (q.T @ resid)
        tol = 1e-6
        v = resid * (10 * tol / np.abs(resid).max())
        assert is_trajectory(bench_part, u_ini, y_ini, tol=tol)
        assert not is_trajectory(bench_part, u_ini + v[:4], y_ini + v[4:], tol=tol)


class TestSimulateDdriven:
    def test_zero_everything_gives_zero_output(self, bench_part):
        y = simulate_ddriven(bench_part, np.zeros(4), np.zeros(4), np.zeros(20))
        np.testing.assert_allclose(y, 0.0, atol=1e-9)

    def test_matches_state_space_oracle(self, bench_sys, bench_part):
        rng = np.random.default_rng(21)
        x0 = rng.standard_normal(3)
        u_all = rng.uniform(-1, 1, (1, 24))
        y_all, _ = recursion_oracle(
            bench_sys.A, bench_sys.B, bench_sys.C, bench_sys.D, x0, u_all
        )
        y = simulate_ddriven(
            bench_part,
            stack_window(u_all[:, :4]),
            stack_window(y_all[:, :4]),
            stack_window(u_all[:, 4:]),
        )
        np.testing.assert_allclose(y, stack_window(y_all[:, 4:]), atol=1e-8)

    def test_inconsistent_window_raises(self, bench_part, bench_data):
        data, _ = bench_data
        y_bad = stack_window(data.y[:, 10:14]) + 0.5
        with pytest.raises(InconsistentInitialConditionError):
            simulate_ddriven(bench_part, stack_window(data.u[:, 10:14]), y_bad, np.zeros(20))

    def test_output_unique_across_solutions(self, bench_part, bench_sys):
        # two different g solving the first three blocks give the same output
        rng = np.random.default_rng(33)
        x0 = rng.standard_normal(3)
        u_all = rng.uniform(-1, 1, (1, 24))
        y_all = simulate(bench_sys, x0, u_all)
        stack = np.vstack([bench_part.U_p, bench_part.Y_p, bench_part.U_f])
        rhs = np.concatenate(
            [
                stack_window(u_all[:, :4]),
                stack_window(y_all[:, :4]),
                stack_window(u_all[:, 4:]),
            ]
        )
        g_min, *_ = np.linalg.lstsq(stack, rhs, rcond=None)
        _, _, vt = np.linalg.svd(stack)
        null = vt[np.linalg.matrix_rank(stack) :].T
        g_other = g_min + null @ rng.standard_normal(null.shape[1])
        assert np.abs(stack @ g_other - rhs).max() < 1e-8
        np.testing.assert_allclose(
            bench_part.Y_f @ g_min, bench_part.Y_f @ g_other, atol=1e-8
        )


class TestCsvRoundTrip:
    def test_header_and_values(self, tmp_path):
        rng = np.random.default_rng(4)
        data = TrajectoryData(u=rng.uniform(-1, 1, (2, 7)), y=rng.standard_normal((1, 7)))
        path = tmp_path / "traj.csv"
        data.to_csv(path)
        assert path.read_text().splitlines()[0] == "k,u_1,u_2,y_1"
        loaded = TrajectoryData.from_csv(path)
        np.testing.assert_array_equal(loaded.u, data.u)
        np.testing.assert_array_equal(loaded.y, data.y)
