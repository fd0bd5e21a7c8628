import json
import math

import numpy as np
import pytest
from scipy import linalg as la

from rkhsid import (
    NSS,
    ConditioningError,
    Dataset,
    Gaussian,
    HyperPoint,
    LinearIIR,
    Scaled,
    Signal,
    StableSplineDiscrete,
    TuningFailedError,
    convolve,
    make_regressors,
    nll,
    oracle_select_m,
    tune_ml,
)


def _fir_dataset(seed, n=200, m=10, noise=0.3):
    rng = np.random.default_rng(seed)
    theta = 0.7 ** np.arange(m) * rng.normal(size=m)
    u = Signal(rng.normal(size=n + m - 1))
    times, X = make_regressors(u, m)
    y = convolve(theta, u).at(times) + noise * rng.normal(size=n)
    return Dataset(X, y, timestamps=times, kind="truncated")


@pytest.fixture(scope="module")
def nss_data():
    rng = np.random.default_rng(3)
    u = Signal(rng.normal(size=160))
    times, X = make_regressors(u, 8)
    y = np.tanh(X[:, 0] + 0.5 * X[:, 1]) + 0.3 * X[:, 2] + 0.1 * rng.normal(size=times.size)
    return Dataset(X, y, timestamps=times, kind="truncated")


class TestNLL:
    def test_scalar(self):
        assert nll([0.0], [[1.0]], 1.0, 1.0) == pytest.approx(0.5 * math.log(2) + 0.5 * math.log(2 * math.pi))
        assert nll([0.0], [[1.0]], 1.0, 1.0) == pytest.approx(1.26552, abs=1e-5)

    def test_dense_formula(self):
        rng = np.random.default_rng(0)
        A = rng.normal(size=(6, 6))
        G, Y = A @ A.T, rng.normal(size=6)
        Z = 0.7 * G + 0.2 * np.eye(6)
        ref = 0.5 * np.linalg.slogdet(Z)[1] + 0.5 * Y @ np.linalg.solve(Z, Y) + 3 * math.log(2 * math.pi)
        assert nll(Y, G, 0.7, 0.2) == pytest.approx(ref, rel=1e-12)

    def test_isotropic_minimizer(self):
        Y = np.random.default_rng(1).normal(scale=2.0, size=40)
        target = Y @ Y / Y.size
        grid = np.linspace(0.2 * target, 3 * target, 2001)
        vals = [nll(Y, np.eye(40), s / 2, s / 2) for s in grid]
        assert grid[int(np.argmin(vals))] == pytest.approx(target, rel=2e-3)
        # only the sum lam + sigma2 matters
        assert nll(Y, np.eye(40), 0.3, 0.9) == pytest.approx(nll(Y, np.eye(40), 0.9, 0.3))

    def test_not_positive_definite(self):
        with pytest.raises(ConditioningError):
            nll([1.0, 1.0], -np.eye(2), 1.0, 0.5)

    def test_positive_parameters(self):
        with pytest.raises(ValueError):
            nll([1.0], [[1.0]], 0.0, 1.0)


class TestTune:
    def test_matches_truth(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(500, 3))
        k = Gaussian(2.0)
        G = k.gram(X)
        lam, s2 = 2.0, 0.25
        L = la.cholesky(lam * G + s2 * np.eye(500), lower=True)
        Y = L @ rng.normal(size=500)
        res = tune_ml(k, Dataset(X, Y), starts=4)
        assert res.nll_value <= nll(Y, G, lam, s2) + 1e-9
        assert res.best.noise == pytest.approx(s2, rel=0.3)

    def test_more_starts_never_worse(self, nss_data):
        one = tune_ml("nss", nss_data, starts=1, rng_seed=7)
        eight = tune_ml("nss", nss_data, starts=8, rng_seed=7)
        assert eight.nll_value <= one.nll_value
        assert eight.starts_tried == 8

    def test_noiseless_hits_noise_bound(self):
        data = _fir_dataset(5, noise=0.0)
        res = tune_ml("stable_spline", data, starts=3)
        assert res.boundary["noise"]
        assert res.at_boundary
        assert res.best.noise == pytest.approx(1e-6, rel=0.05)

    def test_best_is_min_over_trace(self, nss_data):
        res = tune_ml("nss", nss_data, starts=4, rng_seed=1)
        assert res.nll_value == pytest.approx(min(r["nll"] for r in res.trace), rel=1e-12)

    def test_trace_monotone(self, nss_data):
        res = tune_ml("nss", nss_data, starts=4, rng_seed=2)
        for rec in res.trace:
            h = np.array(rec["history"])
            assert np.all(np.diff(h) <= 0)

    def test_rn_mapping_identity(self, nss_data):
        res = tune_ml("nss", nss_data, starts=2)
        kernel, gamma = res.rn_config(nss_data)
        assert isinstance(kernel, Scaled)
        assert gamma == res.best.noise / len(nss_data)
        model = res.fit(nss_data)
        base = NSS(res.best.kernel_params["alpha"], res.best.kernel_params["eta"], truncation=8)
        Z = res.best.scale * base.gram(nss_data.locations) + res.best.noise * np.eye(len(nss_data))
        np.testing.assert_allclose(model.coefficients, np.linalg.solve(Z, nss_data.outputs), rtol=1e-7)

    def test_profiled_matches_full(self, nss_data):
        a = tune_ml("gaussian", nss_data, starts=4, profile=True)
        b = tune_ml("gaussian", nss_data, starts=4, profile=False, maxiter=2000, xatol=1e-6, fatol=1e-9)
        assert a.nll_value <= b.nll_value + 1e-3

    def test_output_scaling(self, nss_data):
        c = 3.0
        scaled = Dataset(nss_data.locations, c * nss_data.outputs, kind=nss_data.kind)
        kw = dict(starts=4, xatol=1e-8, fatol=1e-10, maxiter=2000)
        a, b = tune_ml("gaussian", nss_data, **kw), tune_ml("gaussian", scaled, **kw)
        assert b.best.scale == pytest.approx(c**2 * a.best.scale, rel=1e-3)
        assert b.best.noise == pytest.approx(c**2 * a.best.noise, rel=1e-3)
        assert b.best.kernel_params["eta"] == pytest.approx(a.best.kernel_params["eta"], rel=1e-3)
        assert b.nll_value == pytest.approx(a.nll_value + len(nss_data) * math.log(c), rel=1e-6)

    def test_deterministic(self, nss_data):
        a = tune_ml("nss", nss_data, starts=3, rng_seed=11)
        b = tune_ml("nss", nss_data, starts=3, rng_seed=11)
        assert a.to_dict() == b.to_dict()

    def test_warm_start(self, nss_data):
        first = tune_ml("nss", nss_data, starts=3)
        again = tune_ml("nss", nss_data, starts=0, initial=[first.best])
        assert again.starts_tried == 1
        assert again.nll_value <= first.nll_value + 1e-6

    def test_all_starts_fail(self):
        data = Dataset(np.ones((4, 2)), [np.nan, 1.0, 2.0, 3.0])
        with pytest.raises(TuningFailedError) as exc:
            tune_ml("gaussian", data, starts=2)
        assert len(exc.value.trace) == 2

    def test_validation(self, nss_data):
        with pytest.raises(ValueError):
            tune_ml("spline", nss_data)
        with pytest.raises(ValueError):
            tune_ml("nss", nss_data, starts=0)
        with pytest.raises(ValueError):
            tune_ml("nss", nss_data, bounds={"eta": (1.0, 0.5)})

    def test_stable_spline_family(self):
        data = _fir_dataset(6)
        res = tune_ml("stable_spline", data, starts=3)
        assert isinstance(res.kernel(data).kernel, LinearIIR)
        assert 0.05 <= res.best.kernel_params["alpha"] <= 0.999

    def test_json(self, nss_data):
        res = tune_ml("nss", nss_data, starts=1)
        d = json.loads(json.dumps(res.to_dict()))
        assert HyperPoint.from_dict(d["best"]) == res.best

    def test_hyperpoint_positive(self):
        with pytest.raises(ValueError):
            HyperPoint({"eta": -1.0}, 1.0, 1.0)


def _fir3_signals(seed, n, noise):
    rng = np.random.default_rng(seed)
    theta = np.array([1.0, -0.8, 0.5])
    out = []
    for var in (noise, 0.0):
        u = Signal(rng.normal(size=n + 20))
        y = convolve(theta, u)
        y = Signal(y.samples + np.sqrt(var) * rng.normal(size=len(y)))
        out += [u, y]
    return out


class TestOracle:
    def test_single_m(self):
        u, y, ut, yt = _fir3_signals(0, 100, 0.1)
        res = oracle_select_m(u, y, ut, yt, m_grid=[5], starts=2)
        assert res.m_best == 5
        assert set(res.fits) == {5}
        assert "not implementable in practice" in res.label

    def test_table_per_m(self):
        u, y, ut, yt = _fir3_signals(1, 100, 0.1)
        res = oracle_select_m(u, y, ut, yt, m_grid=range(1, 7), starts=2)
        assert sorted(res.fits) == list(range(1, 7))
        assert res.fits[res.m_best] == max(res.fits.values())

    def test_small_m_selected_for_short_memory(self):
        picks = []
        for seed in range(10):
            u, y, ut, yt = _fir3_signals(seed, 200, 0.25)
            picks.append(oracle_select_m(u, y, ut, yt, m_grid=range(1, 11), starts=2, later_starts=0).m_best)
        assert np.median(picks) <= 5
        assert min(picks) >= 3  # fewer lags than the true memory cannot fit well

    def test_empty_grid(self):
        u, y, ut, yt = _fir3_signals(2, 50, 0.1)
        with pytest.raises(ValueError):
            oracle_select_m(u, y, ut, yt, m_grid=[])

    def test_failures_recorded(self):
        u, y, ut, yt = _fir3_signals(3, 60, 0.1)
        times = np.arange(30, 70)
        res = oracle_select_m(u, y, ut, yt, m_grid=[2, 3], starts=1, train_times=times, test_times=times)
        assert not res.failures
        # m = 200 needs history before the signal start, so every m fails
        with pytest.raises(TuningFailedError):
            oracle_select_m(u, y, ut, yt, m_grid=[200], starts=1, train_times=times, test_times=times)
