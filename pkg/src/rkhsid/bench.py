"""Monte Carlo benchmark: Gaussian kernel with an m-oracle versus the NSS kernel.

Each run draws fresh white inputs and noise (and, for scenario S2, a fresh
random linear system), builds identification data with noisy outputs and a
test set with noiseless outputs, fits every estimator and records its
percentage fit on the test set.
"""

import json
import logging
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._errors import ConfigError
from .hyper import oracle_select_m, tune_ml
from .signals import Dataset, Signal, fit_metric, make_regressors, random_linear_system, simulate_s1, simulate_s2

__all__ = [
    "BenchmarkConfig",
    "BenchmarkReport",
    "ESTIMATORS",
    "run_benchmark",
    "emit_report",
    "summarize",
]

log = logging.getLogger(__name__)

ESTIMATORS = {
    "gaussian-oracle": "Gaussian kernel, m chosen by a test-set oracle (not implementable in practice)",
    "nss": "NSS kernel, all hyperparameters by marginal likelihood on identification data",
}


@dataclass
class BenchmarkConfig:
    scenario: str = "S2"
    runs: int = 20
    n_train: int = 500
    n_test: int = 500
    estimators: tuple = ("gaussian-oracle", "nss")
    m_grid: tuple = tuple(range(1, 26))
    nss_horizon: int = 50
    input_variance: float = 4.0
    noise_variance: float = 4.0
    nss_starts: int = 3
    oracle_starts: int = 3
    oracle_later_starts: int = 0
    maxiter: int = 400
    xatol: float = 1e-2
    fatol: float = 1e-3
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.estimators = tuple(self.estimators)
        self.m_grid = tuple(int(m) for m in self.m_grid)
        if self.scenario not in ("S1", "S2"):
            raise ConfigError(f"scenario must be S1 or S2, got {self.scenario!r}")
        if self.runs < 1:
            raise ConfigError("runs must be at least 1")
        if self.n_test < 2 or self.n_train < 2:
            raise ConfigError("n_train and n_test must be at least 2")
        if not self.estimators:
            raise ConfigError("estimators must be nonempty")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigError(f"unknown estimators {sorted(unknown)}; choose from {sorted(ESTIMATORS)}")
        if not self.m_grid or min(self.m_grid) < 1:
            raise ConfigError("m_grid must hold positive integers")
        if self.nss_horizon < 1 or self.workers < 1:
            raise ConfigError("nss_horizon and workers must be positive")

    @classmethod
    def full_scale(cls, **overrides):
        """100 runs, 1000 identification / test samples, oracle over m = 1..50."""
        base = dict(runs=100, n_train=1000, n_test=1000, m_grid=tuple(range(1, 51)))
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, d):
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown benchmark config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self):
        d = asdict(self)
        d["estimators"], d["m_grid"] = list(self.estimators), list(self.m_grid)
        return d


def summarize(fits):
    """Boxplot statistics of a list of fits."""
    f = np.asarray(fits, dtype=float)
    q1, med, q3 = np.percentile(f, [25, 50, 75])
    return {
        "n": int(f.size),
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(f.min()),
        "max": float(f.max()),
    }


@dataclass
class BenchmarkReport:
    config: dict
    records: list
    failures: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)

    def fits(self, estimator):
        return [r["fit"] for r in self.records if r["estimator"] == estimator]

    @property
    def summary(self):
        names = [e for e in self.config["estimators"] if self.fits(e)]
        return {e: summarize(self.fits(e)) for e in names}

    def to_dict(self):
        return {
            "config": self.config,
            "labels": self.labels,
            "records": self.records,
            "failures": self.failures,
            "summary": self.summary,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["config"], d["records"], d.get("failures", []), d.get("labels", {}))

    def __eq__(self, other):
        if not isinstance(other, BenchmarkReport):
            return NotImplemented
        strip = lambda recs: [{k: v for k, v in r.items() if k != "seconds"} for r in recs]  # noqa: E731
        return (
            self.config == other.config
            and strip(self.records) == strip(other.records)
            and self.failures == other.failures
        )


# A single run -------------------------------------------------------------------
def _estimator_seed(cfg, run, name):
    return np.random.SeedSequence([cfg.master_seed, run, zlib.crc32(name.encode())])


def _draw_data(cfg, run):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.master_seed, run]))
    sys = random_linear_system(rng_seed=rng) if cfg.scenario == "S2" else None
    burn = 6 if sys is None else max(6, sys.impulse_response.size - 1)
    lags = max(max(cfg.m_grid), cfg.nss_horizon) - 1
    sd = np.sqrt(cfg.input_variance)
    out = {}
    for part, n, noise in (("train", cfg.n_train, cfg.noise_variance), ("test", cfg.n_test, 0.0)):
        u = Signal(rng.normal(0.0, sd, size=burn + lags + n))
        y = simulate_s1(u, noise, rng) if sys is None else simulate_s2(u, sys, noise, rng)
        times = np.arange(u.stop_index - n, u.stop_index)
        out[part] = (u, y, times)
    return out


def _fit_oracle(cfg, data, seed):
    (u, y, t), (ut, yt, tt) = data["train"], data["test"]
    res = oracle_select_m(
        u,
        y,
        ut,
        yt,
        m_grid=cfg.m_grid,
        family="gaussian",
        starts=cfg.oracle_starts,
        later_starts=cfg.oracle_later_starts,
        rng_seed=seed,
        maxiter=cfg.maxiter,
        xatol=cfg.xatol,
        fatol=cfg.fatol,
        train_times=t,
        test_times=tt,
    )
    hp = res.hyper[res.m_best]
    return res.fits[res.m_best], {"m": res.m_best, "hyper": hp.to_dict(), "skipped_m": sorted(res.failures)}


def _fit_nss(cfg, data, seed):
    (u, y, t), (ut, yt, tt) = data["train"], data["test"]
    _, X = make_regressors(u, None, horizon=cfg.nss_horizon, times=t)
    _, Xt = make_regressors(ut, None, horizon=cfg.nss_horizon, times=tt)
    train = Dataset(X, y.at(t), timestamps=t, kind="truncated")
    res = tune_ml(
        "nss", train, starts=cfg.nss_starts, rng_seed=seed, maxiter=cfg.maxiter, xatol=cfg.xatol, fatol=cfg.fatol
    )
    model = res.fit(train)
    return fit_metric(yt.at(tt), model.predict(Xt)), {"hyper": res.best.to_dict(), "at_boundary": res.at_boundary}


_FITTERS = {"gaussian-oracle": _fit_oracle, "nss": _fit_nss}


def _run_one(cfg, run):
    data = _draw_data(cfg, run)
    records, failures = [], []
    for name in cfg.estimators:
        t0 = time.perf_counter()
        try:
            fit, detail = _FITTERS[name](cfg, data, _estimator_seed(cfg, run, name))
        except (ArithmeticError, ValueError) as exc:
            failures.append({"run": run, "estimator": name, "reason": f"{type(exc).__name__}: {exc}"})
            log.warning("run %d, %s failed: %s", run, name, exc)
            continue
        records.append(
            {
                "run": run,
                "estimator": name,
                "fit": float(fit),
                "seconds": time.perf_counter() - t0,
                "detail": detail,
            }
        )
        log.info("%s run %d %s: fit %.2f", cfg.scenario, run, name, fit)
    return records, failures


def run_benchmark(cfg):
    """Run the Monte Carlo study described by ``cfg``.

    Run ``i`` draws its data from a stream seeded by ``(master_seed, i)``
    and each estimator tunes with its own stream keyed by its name, so
    dropping an estimator leaves the others' fits unchanged.
    """
    runs = range(cfg.runs)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_one, [cfg] * cfg.runs, runs))
    else:
        results = [_run_one(cfg, r) for r in runs]
    records = [rec for recs, _ in results for rec in recs]
    failures = [f for _, fails in results for f in fails]
    labels = {e: ESTIMATORS[e] for e in cfg.estimators}
    return BenchmarkReport(cfg.to_dict(), records, failures, labels)


# Report output ------------------------------------------------------------------
def emit_report(report, fmt, path):
    """Write ``report`` as ``json``, ``csv`` (``run,estimator,fit``) or ``svg`` boxplot."""
    if not report.records:
        raise ValueError("report holds no fits")
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
    elif fmt == "csv":
        with open(path, "w") as fh:
            fh.write("run,estimator,fit\n")
            for r in report.records:
                fh.write(f"{r['run']},{r['estimator']},{r['fit']!r}\n")
    elif fmt == "svg":
        _boxplot(report, path)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def _boxplot(report, path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    summary = report.summary
    stats = [
        {"label": name, "med": s["median"], "q1": s["q1"], "q3": s["q3"], "whislo": s["min"], "whishi": s["max"]}
        for name, s in summary.items()
    ]
    fig, ax = plt.subplots(figsize=(4.5, 4))
    art = ax.bxp(stats, showfliers=False)
    for name, box in zip(summary, art["boxes"]):
        box.set_gid(f"box-{name}")
    ax.set_ylabel("test fit [%]")
    ax.set_title(f"scenario {report.config['scenario']}, {report.config['runs']} runs")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
