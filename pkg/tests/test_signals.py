import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rkhsid import (
    BoundaryError,
    Dataset,
    LinearSystem,
    Signal,
    UndefinedFitError,
    benchmark_nonlinearity,
    convolve,
    fit_metric,
    make_dataset,
    make_regressors,
    random_linear_system,
    read_dataset,
    read_signal_csv,
    sample_past_trajectory,
    simulate_s1,
    simulate_s2,
    write_dataset,
    write_signal_csv,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


class TestSignal:
    def test_rejects_empty_and_nonfinite(self):
        with pytest.raises(ValueError):
            Signal([])
        with pytest.raises(ValueError):
            Signal([1.0, np.nan])

    def test_samples_are_read_only(self):
        u = Signal([1.0, 2.0])
        with pytest.raises(ValueError):
            u.samples[0] = 5.0

    def test_at_outside_support(self):
        u = Signal([1.0, 2.0, 3.0], start_index=1)
        assert u.at(3) == 3.0
        with pytest.raises(BoundaryError):
            u.at(0)

    def test_interpolation(self):
        u = Signal([0.0, 1.0, 4.0], sample_period=0.5)
        assert u(0.25) == pytest.approx(0.5)
        assert u(-1.0, causal_zero=True) == 0.0
        with pytest.raises(BoundaryError):
            u(-1.0)


class TestMakeRegressors:
    def test_newest_first(self):
        u = Signal([1.0, 2.0, 3.0], start_index=1)
        _, X = make_regressors(u, 2, times=[3])
        np.testing.assert_array_equal(X[0], [3.0, 2.0])

    def test_zero_input(self):
        _, X = make_regressors(Signal(np.zeros(10)), 4)
        assert not X.any()

    def test_impulse(self):
        u = Signal(np.eye(1, 10, 5).ravel())
        _, X = make_regressors(u, 3, times=[6])
        np.testing.assert_array_equal(X[0], [0.0, 1.0, 0.0])

    def test_boundary_names_first_valid(self):
        u = Signal(np.arange(10.0), start_index=3)
        with pytest.raises(BoundaryError) as exc:
            make_regressors(u, 4, times=[4])
        assert exc.value.first_valid == 6

    def test_zero_pad(self):
        u = Signal([1.0, 2.0])
        times, X = make_regressors(u, 3, zero_pad=True)
        np.testing.assert_array_equal(times, [0, 1])
        np.testing.assert_array_equal(X, [[1, 0, 0], [2, 1, 0]])

    def test_infinite_memory_needs_horizon(self):
        with pytest.raises(ValueError):
            make_regressors(Signal(np.ones(5)), None)
        _, X = make_regressors(Signal(np.arange(6.0)), None, horizon=4)
        assert X.shape == (3, 4)

    @settings(max_examples=50, deadline=None)
    @given(
        arrays(float, st.integers(10, 40), elements=finite),
        arrays(float, st.integers(1, 6), elements=finite),
    )
    def test_matches_convolution(self, u, theta):
        sig = Signal(u)
        times, X = make_regressors(sig, theta.size)
        y = convolve(theta, sig).at(times)
        np.testing.assert_allclose(X @ theta, y, rtol=1e-10, atol=1e-9)


class TestPastTrajectory:
    def test_linear_input(self):
        loc = sample_past_trajectory(lambda s: s, 2.0, [0.0, 1.0])
        np.testing.assert_allclose(loc.values, [2.0, 1.0])
        assert loc.kind == "trajectory"

    def test_window_zeroing(self):
        loc = sample_past_trajectory(lambda s: np.ones_like(s), 5.0, [0.0, 1.0, 2.0], window=1.0)
        np.testing.assert_array_equal(loc.values, [1.0, 1.0, 0.0])

    def test_sine(self):
        loc = sample_past_trajectory(np.sin, 0.0, [0.0, math.pi / 2])
        np.testing.assert_allclose(loc.values, [0.0, -1.0], atol=1e-15)

    def test_before_signal_start(self):
        u = Signal(np.arange(5.0))
        with pytest.raises(BoundaryError):
            sample_past_trajectory(u, 1.0, [0.0, 2.0])
        loc = sample_past_trajectory(u, 1.0, [0.0, 2.0], causal_zero=True)
        np.testing.assert_array_equal(loc.values, [1.0, 0.0])

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            sample_past_trajectory(np.sin, 0.0, [1.0, 0.5])


class TestSimulators:
    def test_s1_zero(self):
        y = simulate_s1(Signal(np.zeros(20)), 0.0, 0)
        assert not y.samples.any()
        assert y.start_index == 6

    def test_s1_ones(self):
        y = simulate_s1(Signal(np.ones(20)), 0.0, 0)
        np.testing.assert_allclose(y.samples, 4.85, rtol=1e-14)

    def test_nonlinearity_reads_lag_two(self):
        x = np.zeros(7)
        x[2] = 1.0
        # 0.35 u_{t-2} + 0.75 u_{t-2}^3
        assert benchmark_nonlinearity(x)[0] == pytest.approx(1.1)

    def test_s1_burn_in(self):
        with pytest.raises(BoundaryError):
            simulate_s1(Signal(np.ones(6)), 0.0)

    def test_s2_zero_theta_matches_s1(self):
        u = Signal(np.random.default_rng(1).normal(size=50))
        y1 = simulate_s1(u, 4.0, 7)
        y2 = simulate_s2(u, LinearSystem(np.zeros(3)), 4.0, 7)
        np.testing.assert_array_equal(y1.samples, y2.samples)

    def test_s2_zero_input_is_noise(self):
        u = Signal(np.zeros(30))
        y = simulate_s2(u, LinearSystem([1.0, 0.5]), 2.0, 3)
        e = np.random.default_rng(3).normal(0.0, math.sqrt(2.0), size=len(y))
        np.testing.assert_array_equal(y.samples, e)

    def test_s2_unit_delay(self):
        u = Signal(np.random.default_rng(2).normal(size=40))
        y1, y2 = simulate_s1(u, 0.0), simulate_s2(u, LinearSystem([0.0, 1.0]), 0.0)
        np.testing.assert_allclose(y2.samples - y1.samples, u.at(y1.indices - 1), rtol=1e-12)


class TestRandomLinearSystem:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31))
    def test_constraints(self, seed):
        sys = random_linear_system(rng_seed=seed)
        assert abs(sys.l2_norm - 10.0) <= 1e-6
        assert sys.pole_moduli.max() <= 0.95
        assert sys.order == 10

    def test_deterministic(self):
        a, b = random_linear_system(rng_seed=5), random_linear_system(rng_seed=5)
        np.testing.assert_array_equal(a.impulse_response, b.impulse_response)

    def test_strictly_proper_and_small_tail(self):
        sys = random_linear_system(rng_seed=11)
        assert sys.impulse_response[0] == 0.0
        # the discarded tail continues geometrically below the kept response
        from scipy import signal as sps

        b = np.real(np.poly(sys.zeros))
        a = np.real(np.poly(sys.poles))
        full = sps.lfilter(np.r_[0.0, b], a, np.eye(1, 20 * sys.impulse_response.size, 0).ravel())
        full *= sys.impulse_response[1] / full[1]
        n = sys.impulse_response.size
        assert full[n:] @ full[n:] < 1e-8 * (full @ full)

    def test_order_validation(self):
        with pytest.raises(ValueError):
            random_linear_system(order=0)


class TestConvolve:
    def test_delay(self):
        u = Signal([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(convolve([0.0, 1.0], u).samples, [0.0, 1.0, 2.0])

    def test_identity(self):
        u = Signal([4.0, -1.0, 2.5])
        np.testing.assert_array_equal(convolve([1.0], u).samples, u.samples)

    def test_hand_example(self):
        np.testing.assert_array_equal(convolve([1.0, 1.0], Signal([1.0, 2.0, 3.0])).samples, [1.0, 3.0, 5.0])


class TestFitMetric:
    def test_hand_example(self):
        assert fit_metric([1, 2, 3], [1, 2, 4]) == pytest.approx(100 * (1 - 1 / math.sqrt(2)))
        assert fit_metric([1, 2, 3], [1, 2, 4]) == pytest.approx(29.289321881345)

    def test_constant_reference(self):
        with pytest.raises(UndefinedFitError):
            fit_metric([2.0, 2.0], [1.0, 2.0])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            fit_metric([1.0, 2.0], [1.0])

    @settings(max_examples=100)
    @given(arrays(float, st.integers(2, 30), elements=finite))
    def test_endpoints(self, y):
        if np.ptp(y) < 1e-6:
            return
        assert fit_metric(y, y) == 100.0
        assert fit_metric(y, np.full_like(y, y.mean())) == pytest.approx(0.0, abs=1e-9)

    @settings(max_examples=100)
    @given(
        arrays(float, 12, elements=finite),
        arrays(float, 12, elements=finite),
        st.floats(-100, 100),
    )
    def test_shift_invariance(self, y, yh, c):
        if np.ptp(y) < 1e-3:
            return
        assert fit_metric(y + c, yh + c) == pytest.approx(fit_metric(y, yh), rel=1e-7, abs=1e-7)


class TestIO:
    def test_signal_round_trip(self, tmp_path):
        u = Signal([0.1, -2.0, 1e-17], start_index=4)
        write_signal_csv(u, tmp_path / "u.csv")
        v = read_signal_csv(tmp_path / "u.csv")
        np.testing.assert_array_equal(u.samples, v.samples)
        assert v.start_index == 4

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("time,x\n0,1\n")
        with pytest.raises(ValueError):
            read_signal_csv(p)

    def test_dataset_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        u = Signal(rng.normal(size=30))
        y = simulate_s1(u, 1.0, rng)
        sub = tmp_path / "data"
        sub.mkdir()
        write_signal_csv(u, tmp_path / "u.csv")
        write_dataset(sub / "y.csv", y, tmp_path / "u.csv", memory=7)
        data, side = read_dataset(sub / "y.csv")
        ref = make_dataset(u, y, memory=7)
        assert side["input"] == "../u.csv"
        np.testing.assert_array_equal(data.locations, ref.locations)
        np.testing.assert_array_equal(data.outputs, ref.outputs)


class TestDataset:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), np.zeros(2))

    def test_location_view(self):
        d = Dataset(np.arange(6.0).reshape(3, 2), [1, 2, 3])
        np.testing.assert_array_equal(d.location(1).values, [2.0, 3.0])
