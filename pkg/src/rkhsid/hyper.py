"""Marginal-likelihood hyperparameter tuning.

Outputs are modelled as ``Y ~ N(0, Z)`` with ``Z = lam * K + sigma2 * I``,
``K`` the Gram matrix of the unscaled kernel.  The posterior mean of this
model is the regularization network with kernel ``lam * k`` and
``gamma = sigma2 / N``, which is how a tuned point is handed to
:func:`rkhsid.rn.fit_rn`.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import linalg as la
from scipy import optimize
from scipy.stats import qmc

from ._errors import ConditioningError, TuningFailedError
from .kernels import (
    NSS,
    DiagonalSS,
    Gaussian,
    Kernel,
    Laplacian,
    LinearCT,
    LinearIIR,
    Scaled,
    StableSplineCT,
    StableSplineDiscrete,
    UniformGrid,
    _decay,
    _sq_dists,
)
from .rn import fit_rn
from .signals import Dataset, fit_metric, make_regressors

__all__ = [
    "HyperPoint",
    "TuneResult",
    "OracleResult",
    "nll",
    "tune_ml",
    "oracle_select_m",
    "DEFAULT_BOUNDS",
    "FAMILIES",
]

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)

DEFAULT_BOUNDS = {
    "scale": (1e-6, 1e9),
    "noise": (1e-6, 1e4),
    "eta": (1e-4, 1e6),
    "alpha": (0.05, 0.999),
    "beta": (1e-2, 1e2),
}


def nll(Y, gram, lam, sigma2):
    """Negative log marginal likelihood of ``Y`` under ``N(0, lam*K + sigma2*I)``."""
    Y = np.asarray(Y, dtype=float).reshape(-1)
    if not (lam > 0 and sigma2 > 0):
        raise ValueError("lam and sigma2 must be positive")
    Z = lam * np.asarray(gram) + sigma2 * np.eye(Y.size)
    try:
        c, low = la.cho_factor(Z, lower=True, check_finite=False)
    except la.LinAlgError as exc:
        raise ConditioningError("marginal-likelihood covariance is not positive definite") from exc
    a = la.cho_solve((c, low), Y, check_finite=False)
    logdet = 2.0 * np.log(np.diag(c)).sum()
    return float(0.5 * logdet + 0.5 * Y @ a + 0.5 * Y.size * _LOG_2PI)


# Kernel families -----------------------------------------------------------------
def _grid_of(data):
    g = np.asarray(data.grid, dtype=float)
    return UniformGrid(stop=float(g[-1]), num=g.size, start=float(g[0]))


class Family(NamedTuple):
    """Tunable kernel family: parameter names, a builder and an optional Gram shortcut.

    ``gram_factory(data)`` may precompute parameter-free quantities (for
    radial kernels the pairwise distances) and return ``params -> Gram``.
    """

    params: tuple
    build: Callable
    gram_factory: Callable | None = None


def _radial_factory(power):
    def factory(data):
        X = data.locations
        D = _sq_dists(X, X)
        if power != 1:
            D = D**power
        return lambda p: _decay(D / p["eta"])

    return factory


FAMILIES = {
    "nss": Family(("alpha", "eta"), lambda p, data: NSS(p["alpha"], p["eta"], truncation=data.locations.shape[1])),
    "gaussian": Family(("eta",), lambda p, data: Gaussian(p["eta"]), _radial_factory(1)),
    "laplacian": Family(("eta",), lambda p, data: Laplacian(p["eta"]), _radial_factory(0.5)),
    "stable_spline": Family(
        ("alpha",),
        lambda p, data: LinearIIR(StableSplineDiscrete(p["alpha"]), data.locations.shape[1]),
    ),
    "diagonal_ss": Family(
        ("alpha",), lambda p, data: LinearIIR(DiagonalSS(p["alpha"]), data.locations.shape[1])
    ),
    "stable_spline_ct": Family(
        ("beta",), lambda p, data: LinearCT(StableSplineCT(p["beta"]), _grid_of(data))
    ),
}


def _family(kernel_family):
    if isinstance(kernel_family, Kernel):
        return Family((), lambda p, data: kernel_family)
    try:
        return FAMILIES[kernel_family]
    except KeyError:
        raise ValueError(f"unknown kernel family {kernel_family!r}; choose from {sorted(FAMILIES)}") from None


@dataclass(frozen=True)
class HyperPoint:
    """Kernel hyperparameters, kernel scale ``lam`` and noise variance ``sigma2``."""

    kernel_params: dict
    scale: float
    noise: float

    def __post_init__(self):
        vals = list(self.kernel_params.values()) + [self.scale, self.noise]
        if not all(v > 0 for v in vals):
            raise ValueError("hyperparameters must be strictly positive")

    def gamma(self, n):
        """Regularization parameter of the equivalent network on ``n`` samples."""
        return self.noise / n

    def to_dict(self):
        return {"kernel_params": dict(self.kernel_params), "scale": self.scale, "noise": self.noise}

    @classmethod
    def from_dict(cls, d):
        return cls(dict(d["kernel_params"]), float(d["scale"]), float(d["noise"]))


@dataclass
class TuneResult:
    best: HyperPoint
    nll_value: float
    starts_tried: int
    trace: list
    family: object
    boundary: dict = field(default_factory=dict)

    @property
    def at_boundary(self):
        return any(self.boundary.values())

    def kernel(self, data):
        """Scaled kernel ``lam * k`` for the tuned point."""
        base = _family(self.family).build(self.best.kernel_params, data)
        return Scaled(base, self.best.scale)

    def rn_config(self, data):
        """``(kernel, gamma)`` for :func:`~rkhsid.rn.fit_rn` on ``data``."""
        return self.kernel(data), self.best.gamma(len(data))

    def fit(self, data, check_psd=False):
        kernel, gamma = self.rn_config(data)
        return fit_rn(kernel, data, gamma, check_psd=check_psd)

    def to_dict(self):
        fam = self.family if isinstance(self.family, str) else self.family.to_dict()
        return {
            "family": fam,
            "best": self.best.to_dict(),
            "nll": self.nll_value,
            "starts_tried": self.starts_tried,
            "boundary": self.boundary,
            "trace": self.trace,
        }


def _log_bounds(names, bounds):
    b = dict(DEFAULT_BOUNDS)
    if bounds:
        b.update(bounds)
    lo = np.log([b[n][0] for n in names])
    hi = np.log([b[n][1] for n in names])
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and np.all(lo < hi)):
        raise ValueError("bounds must be finite, positive and ordered")
    return lo, hi


def _profiled(Y, G, r, lam_lo, lam_hi):
    """Minimize the NLL over the scale for fixed noise ratio ``r = sigma2 / lam``.

    For ``Z = lam (G + r I)`` the optimal scale is ``Y^T (G + r I)^{-1} Y / N``,
    clipped to the feasible interval (the NLL is unimodal in ``lam``).
    """
    N = Y.size
    c, low = la.cho_factor(G + r * np.eye(N), lower=True, check_finite=False)
    q = float(Y @ la.cho_solve((c, low), Y, check_finite=False))
    logdet = 2.0 * np.log(np.diag(c)).sum()
    lam = min(max(q / N, lam_lo), lam_hi)
    return 0.5 * (N * math.log(lam) + logdet + q / lam + N * _LOG_2PI), lam


def tune_ml(
    kernel_family,
    data,
    bounds=None,
    starts=8,
    rng_seed=0,
    maxiter=400,
    xatol=1e-3,
    fatol=1e-4,
    initial=(),
    profile=True,
):
    """Multi-start Nelder-Mead minimization of the negative log marginal likelihood.

    Parameters
    ----------
    kernel_family : str or Kernel
        A key of :data:`FAMILIES` or a fixed kernel (then only the scale and
        noise variance are tuned).
    data : Dataset
    bounds : dict, optional
        ``name -> (low, high)`` overrides of :data:`DEFAULT_BOUNDS`.
    starts : int
        Number of starting points drawn from a scrambled Halton sequence in
        the log-box.
    initial : sequence of HyperPoint, optional
        Extra starting points tried before the Halton ones (warm starts).
    profile : bool
        Eliminate the scale in closed form and search over the kernel
        parameters and the ratio ``noise / scale`` only.  The optimum is the
        same; the search has one dimension fewer.

    Returns
    -------
    TuneResult
    """
    if starts < 0 or starts + len(initial) < 1:
        raise ValueError("need at least one starting point")
    kparams, build, factory = _family(kernel_family)
    names = tuple(kparams) + ("scale", "noise")
    lo, hi = _log_bounds(names, bounds)
    Y = data.outputs
    nk = len(kparams)
    lam_lo, lam_hi = math.exp(lo[nk]), math.exp(hi[nk])
    s2_lo, s2_hi = math.exp(lo[nk + 1]), math.exp(hi[nk + 1])
    if profile:
        # search space: kernel params and log(noise / scale)
        slo = np.append(lo[:nk], lo[nk + 1] - hi[nk])
        shi = np.append(hi[:nk], hi[nk + 1] - lo[nk])
    else:
        slo, shi = lo, hi

    fast = factory(data) if factory else None
    cached = {}

    def gram_for(z):
        key = tuple(np.round(z[:nk], 14))
        if key not in cached:
            if len(cached) > 64:
                cached.clear()
            params = dict(zip(kparams, np.exp(z[:nk])))
            cached[key] = fast(params) if fast else build(params, data).gram(data.locations)
        return cached[key]

    def evaluate(z):
        """``(nll, scale, noise)`` at search point ``z``."""
        z = np.clip(z, slo, shi)
        G = gram_for(z)
        if not profile:
            lam, s2 = math.exp(z[nk]), math.exp(z[nk + 1])
            return nll(Y, G, lam, s2), lam, s2
        r = math.exp(z[nk])
        a, b = max(lam_lo, s2_lo / r), min(lam_hi, s2_hi / r)
        if a > b:
            return np.inf, np.nan, np.nan
        f, lam = _profiled(Y, G, r, a, b)
        return f, lam, r * lam

    def objective(z):
        try:
            return evaluate(z)[0]
        except (la.LinAlgError, ConditioningError, ValueError, FloatingPointError):
            return np.inf

    def to_search(point):
        kz = np.log([point.kernel_params[k] for k in kparams])
        tail = [math.log(point.noise / point.scale)] if profile else [math.log(point.scale), math.log(point.noise)]
        return np.clip(np.concatenate([kz, tail]), slo, shi)

    z0s = [to_search(p) for p in initial]
    if starts:
        sampler = qmc.Halton(d=slo.size, scramble=True, seed=np.random.default_rng(rng_seed))
        z0s += list(qmc.scale(sampler.random(starts), slo, shi))

    trace = []
    best = None
    for k, z0 in enumerate(z0s):
        history = []

        def callback(intermediate_result):
            history.append(float(intermediate_result.fun))

        res = optimize.minimize(
            objective,
            z0,
            method="Nelder-Mead",
            bounds=list(zip(slo, shi)),
            callback=callback,
            options={"maxiter": maxiter, "xatol": xatol, "fatol": fatol},
        )
        z = np.clip(res.x, slo, shi)
        f = float(res.fun)
        record = {"start": k, "nll": f, "nit": int(res.nit), "nfev": int(res.nfev), "success": bool(res.success)}
        if np.isfinite(f):
            f, lam, s2 = evaluate(z)
            vals = np.concatenate([np.exp(z[:nk]), [lam, s2]])
            record["x"] = dict(zip(names, vals.tolist()))
            if best is None or f < best[0]:
                best = (f, vals)
        record["history"] = history
        trace.append(record)
        log.debug("start %d: nll=%.6g after %d iterations", k, f, res.nit)

    if best is None:
        raise TuningFailedError("no start produced a finite negative log likelihood", trace=trace)

    f, vals = best
    point = HyperPoint(dict(zip(kparams, vals[:nk].tolist())), float(vals[nk]), float(vals[nk + 1]))
    zb, span = np.log(vals), hi - lo
    boundary = {n: bool(z - l < 1e-3 * s or h - z < 1e-3 * s) for n, z, l, h, s in zip(names, zb, lo, hi, span)}
    return TuneResult(point, float(f), len(z0s), trace, kernel_family, boundary)


# Oracle regressor-dimension selection ---------------------------------------------
@dataclass
class OracleResult:
    """Result of the test-set oracle over regressor dimensions.

    The oracle uses test data to choose ``m`` and is therefore not
    implementable in practice; it is a benchmark device only.
    """

    m_best: int
    fits: dict
    hyper: dict
    failures: dict = field(default_factory=dict)
    label: str = "oracle (uses test data; not implementable in practice)"


def _common_times(u, y, max_m):
    lo = max(u.start_index + max_m - 1, y.start_index)
    hi = min(u.stop_index, y.stop_index)
    return np.arange(lo, hi)


def oracle_select_m(
    u_train,
    y_train,
    u_test,
    y_test,
    m_grid=range(1, 51),
    family="gaussian",
    starts=8,
    rng_seed=0,
    bounds=None,
    maxiter=400,
    warm_start=True,
    later_starts=None,
    xatol=1e-3,
    fatol=1e-4,
    train_times=None,
    test_times=None,
):
    """Pick the regressor dimension maximizing the test fit.

    For each ``m`` the kernel hyperparameters, scale and noise variance are
    tuned by marginal likelihood on the training data only; the noiseless
    test outputs ``y_test`` are then used to score each ``m``.  All ``m``
    share the same training and test time instants (by default every
    instant where the largest ``m`` is available).  With ``warm_start``
    the optimum found for the previous ``m`` is an extra starting point,
    and ``later_starts`` (if given) replaces ``starts`` once such a warm
    start exists.
    """
    m_grid = [int(m) for m in m_grid]
    if not m_grid:
        raise ValueError("m_grid must be nonempty")
    max_m = max(m_grid)
    t_train = _common_times(u_train, y_train, max_m) if train_times is None else np.asarray(train_times)
    t_test = _common_times(u_test, y_test, max_m) if test_times is None else np.asarray(test_times)
    Ytr, Yte = y_train.at(t_train), y_test.at(t_test)
    fits, hyper, failures = {}, {}, {}
    for m in m_grid:
        try:
            _, Xtr = make_regressors(u_train, m, times=t_train)
            _, Xte = make_regressors(u_test, m, times=t_test)
            train = Dataset(Xtr, Ytr, timestamps=t_train)
            prev = [hyper[max(hyper)]] if warm_start and hyper else []
            n_starts = starts if not prev or later_starts is None else later_starts
            res = tune_ml(
                family,
                train,
                bounds=bounds,
                starts=n_starts,
                rng_seed=rng_seed,
                maxiter=maxiter,
                initial=prev,
                xatol=xatol,
                fatol=fatol,
            )
            model = res.fit(train)
            fits[m] = fit_metric(Yte, model.predict(Xte))
            hyper[m] = res.best
        except (ArithmeticError, ValueError) as exc:
            failures[m] = f"{type(exc).__name__}: {exc}"
            log.warning("oracle: m=%d skipped (%s)", m, exc)
    if not fits:
        raise TuningFailedError(f"every regressor dimension failed: {failures}")
    m_best = max(fits, key=lambda m: fits[m])
    return OracleResult(m_best, fits, hyper, failures)
