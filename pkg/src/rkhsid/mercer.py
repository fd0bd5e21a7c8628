"""Mercer expansions, lagged cross-covariances ``c_k`` and the consistency experiment.

The continuous-time stable spline kernel ``exp(-beta max(t, s))`` equals
``min(x, y)`` in the variable ``x = exp(-beta t)``.  Its eigenexpansion in
that variable is the Brownian-motion one, which gives closed-form
eigenpairs orthonormal under ``x ~ U[0, 1]`` (``t ~ Exp(beta)``).
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from ._errors import ConfigError, StructuralError
from .kernels import LinearCT, StableSplineCT, UniformGrid, psd_check
from .rn import fit_rn
from .signals import Dataset, Signal, sample_past_trajectories

__all__ = [
    "EigenPair",
    "ss_eigenpairs",
    "truncated_ss_kernel",
    "EmpiricalMercer",
    "empirical_mercer",
    "EigenData",
    "linear_kernel_eigen",
    "nystrom_eigen",
    "CkSequence",
    "estimate_ck",
    "white_regressors",
    "long_memory_gaussian",
    "ConsistencyConfig",
    "ConsistencyCurve",
    "consistency_experiment",
]

SQRT2 = math.sqrt(2.0)


# Closed-form stable-spline eigenpairs -------------------------------------------
def _zeta(ell):
    return 1.0 / ((np.asarray(ell, dtype=float) - 0.5) * np.pi) ** 2


@dataclass(frozen=True)
class EigenPair:
    """``zeta`` and ``psi(t) = sqrt(2) sin(exp(-beta t) / sqrt(zeta))``."""

    index: int
    zeta: float
    beta: float

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        return SQRT2 * np.sin(np.exp(-self.beta * t) / math.sqrt(self.zeta))


def ss_eigenpairs(beta, L):
    """Eigenpairs ``l = 1..L`` of the continuous-time stable spline kernel."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    if L < 1:
        raise ValueError("L must be at least 1")
    return [EigenPair(ell, float(_zeta(ell)), float(beta)) for ell in range(1, int(L) + 1)]


def truncated_ss_kernel(beta, L, t, s, chunk=256):
    """``sum_{l <= L} zeta_l psi_l(t) psi_l(s)``, broadcasting over ``t`` and ``s``."""
    if not beta > 0 or L < 1:
        raise ValueError("need beta > 0 and L >= 1")
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    if np.any(t < 0) or np.any(s < 0):
        raise ValueError("t and s must be nonnegative")
    x, y = np.exp(-beta * t).reshape(-1, 1), np.exp(-beta * s).reshape(-1, 1)
    out = np.zeros(x.shape[0])
    for lo in range(1, int(L) + 1, chunk):
        ell = np.arange(lo, min(lo + chunk, int(L) + 1))
        freq = (ell - 0.5) * np.pi
        out += (2.0 * _zeta(ell) * np.sin(x * freq) * np.sin(y * freq)).sum(axis=1)
    out = out.reshape(t.shape)
    return float(out) if out.ndim == 0 else out


# Empirical Mercer decomposition ---------------------------------------------------
@dataclass(frozen=True, eq=False)
class EmpiricalMercer:
    """Eigenvalues of ``gram / N`` (descending) and eigenfunctions at the samples.

    ``rho[:, i]`` holds ``rho_i(x_k)`` normalized so ``mean_k rho_i(x_k)^2 = 1``.
    """

    zeta: np.ndarray
    rho: np.ndarray


def empirical_mercer(gram, N=None, tol=1e-8):
    G = np.asarray(gram, dtype=float)
    N = G.shape[0] if N is None else int(N)
    rep = psd_check(G, tol=tol)
    if not rep.ok:
        raise StructuralError(f"Gram matrix is not PSD (min eigenvalue {rep.min_eigenvalue:.3g})")
    zeta, vecs = np.linalg.eigh(G / N)
    order = np.argsort(zeta)[::-1]
    zeta = np.clip(zeta[order], 0.0, None)
    return EmpiricalMercer(zeta, vecs[:, order] * math.sqrt(N))


# Eigen data for c_k estimation ----------------------------------------------------
@dataclass(frozen=True, eq=False)
class EigenData:
    """Eigenvalues ``zeta`` and a map ``features(X) -> (n, L)`` of ``rho_l(x)``."""

    zeta: np.ndarray
    features: object
    description: str = ""

    def truncate(self, ell_max):
        z = self.zeta[:ell_max]
        f = self.features
        return EigenData(z, lambda X: f(X)[:, : z.size], f"{self.description}[:{z.size}]")


def linear_kernel_eigen(K, input_variance=1.0):
    """Mercer data of ``k(a, x) = a^T K x`` for i.i.d. locations ``x ~ N(0, s^2 I)``.

    With ``K = V diag(lam) V^T`` the functions ``rho_j(x) = v_j^T x / s`` are
    orthonormal under the location measure and ``zeta_j = s^2 lam_j``.
    """
    K = np.asarray(K, dtype=float)
    lam, V = np.linalg.eigh(K)
    order = np.argsort(lam)[::-1]
    lam, V = np.clip(lam[order], 0.0, None), V[:, order]
    sd = math.sqrt(input_variance)
    return EigenData(input_variance * lam, lambda X: np.asarray(X, float) @ V / sd, "linear")


def nystrom_eigen(kernel, X_ref, ell_max=None):
    """Mercer data estimated from reference locations and extended by Nystrom.

    ``rho_i(x) = sum_k k(x, x_k) rho_i(x_k) / (N zeta_i)``.
    """
    X_ref = np.asarray(X_ref, dtype=float)
    em = empirical_mercer(kernel.gram(X_ref))
    keep = em.zeta > 1e-12 * max(em.zeta[0], 1e-300)
    if ell_max is not None:
        keep[ell_max:] = False
    zeta, rho = em.zeta[keep], em.rho[:, keep]
    W = rho / (X_ref.shape[0] * zeta)
    return EigenData(zeta, lambda X: kernel.cross(np.asarray(X, float), X_ref) @ W, "nystrom")


@dataclass(frozen=True, eq=False)
class CkSequence:
    """Estimates of ``c_0 .. c_kmax`` with Monte Carlo standard errors."""

    values: np.ndarray
    stderr: np.ndarray
    ell_truncation: int
    metadata: dict = field(default_factory=dict)

    @property
    def partial_abs_sums(self):
        return np.cumsum(np.abs(self.values))

    def within(self, lags, n_se=3.0):
        """True when ``|c_k| <= n_se * stderr_k`` at every lag in ``lags``."""
        lags = np.asarray(lags, dtype=int)
        return bool(np.all(np.abs(self.values[lags]) <= n_se * self.stderr[lags]))


def estimate_ck(
    f,
    eigen,
    input_generator,
    noise_generator,
    k_max=50,
    sample_count=2000,
    rng_seed=0,
    ell_max=200,
    replications=20,
):
    """Monte Carlo estimate of ``c_k = sum_l zeta_l Cov(v_{l,i}, v_{l,i+k})``.

    ``v_{l,i} = (f(x_i) + e_i) rho_l(x_i)``.  Each replication draws a fresh
    stationary stretch of ``sample_count`` locations and forms sample
    cross-covariances; estimates are averaged over replications and the
    standard error is their spread divided by ``sqrt(replications)``.

    Parameters
    ----------
    f : callable
        ``f(X) -> (n,)`` predictor on an ``(n, d)`` location array.
    eigen : EigenData
    input_generator : callable
        ``input_generator(rng, n) -> (n, d)`` consecutive locations of a
        stationary process.
    noise_generator : callable
        ``noise_generator(rng, n) -> (n,)``.
    """
    if k_max < 1 or ell_max < 1:
        raise ValueError("k_max and ell_max must be at least 1")
    if replications < 2:
        raise ValueError("need at least two replications for a standard error")
    if sample_count <= k_max + 1:
        raise ValueError("sample_count must exceed k_max + 1")
    eig = eigen.truncate(ell_max)
    rng = np.random.default_rng(rng_seed)
    est = np.empty((replications, k_max + 1))
    degenerate = True
    for r in range(replications):
        X = input_generator(rng, sample_count)
        e = np.asarray(noise_generator(rng, sample_count), dtype=float)
        V = (np.asarray(f(X), dtype=float) + e)[:, None] * eig.features(X)
        V = V - V.mean(axis=0)
        if np.any(V.var(axis=0) > 0):
            degenerate = False
        n = V.shape[0]
        for k in range(k_max + 1):
            cov = np.einsum("ij,ij->j", V[: n - k], V[k:]) / n
            est[r, k] = cov @ eig.zeta
    if degenerate:
        warnings.warn("all v sequences are constant; c_k is identically zero", RuntimeWarning, stacklevel=2)
    meta = {
        "sample_count": sample_count,
        "replications": replications,
        "rng_seed": rng_seed,
        "k_max": k_max,
        "ell_max": int(eig.zeta.size),
        "eigen": eig.description,
    }
    return CkSequence(est.mean(axis=0), est.std(axis=0, ddof=1) / math.sqrt(replications), int(eig.zeta.size), meta)


def white_regressors(memory, variance=1.0):
    """Input generator of consecutive lagged windows of white Gaussian noise."""

    def gen(rng, n):
        u = rng.normal(0.0, math.sqrt(variance), size=n + memory - 1)
        return np.lib.stride_tricks.sliding_window_view(u, memory)[:, ::-1].copy()

    return gen


# Long-memory Gaussian input -----------------------------------------------------
def long_memory_gaussian(rng, n, step=0.1, delta=0.5, taps=4000):
    """Unit-variance stationary Gaussian signal with covariance decay ``~ 1/tau^(1+delta)``.

    A moving average of white noise with coefficients ``(1 + j)^-(1 + delta)``;
    for such coefficients the autocovariance at lag ``j`` decays like
    ``j^-(1 + delta)``.  Samples are ``step`` time units apart.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    b = (1.0 + np.arange(taps)) ** (-(1.0 + delta))
    b /= np.linalg.norm(b)
    w = rng.standard_normal(n + taps - 1)
    u = sps.fftconvolve(w, b, mode="valid")
    return Signal(u, start_index=0, sample_period=step)


# Consistency experiment -----------------------------------------------------------
def _default_theta(tau):
    return tau * np.exp(-tau)


@dataclass
class ConsistencyConfig:
    """Continuous-time linear stable-spline consistency setup.

    ``theta`` is the true impulse response on ``[0, support]``; locations are
    past input trajectories sampled on a uniform grid of ``grid_num`` lags and
    observed at ``t_i = i * spacing + delta_i`` with ``delta_i ~ U[0, spacing]``.
    """

    beta: float = 1.0
    support: float = 8.0
    grid_num: int = 81
    theta: object = _default_theta
    noise_std: float = 0.5
    input_delta: float = 0.5
    input_step: float = 0.1
    spacing: float = 1.0
    N_grid: tuple = (200, 500, 1000, 2000)
    alpha: float = 0.25
    gamma0: float = 1e-4
    test_draws: int = 1000
    test_spacing: float = 50.0
    seeds: tuple = tuple(range(20))

    def __post_init__(self):
        if not 0 < self.alpha < 0.5:
            raise ConfigError(f"alpha must lie in (0, 1/2), got {self.alpha}")
        N = list(self.N_grid)
        if not N or any(n < 1 for n in N) or any(b <= a for a, b in zip(N, N[1:])):
            raise ConfigError("N_grid must be increasing positive integers")
        if not (self.beta > 0 and self.gamma0 > 0 and self.support > 0 and self.spacing > 0):
            raise ConfigError("beta, gamma0, support and spacing must be positive")
        if self.noise_std < 0 or self.test_draws < 2 or self.grid_num < 2 or not self.seeds:
            raise ConfigError("invalid noise_std / test_draws / grid_num / seeds")
        self.N_grid = tuple(int(n) for n in N)
        self.seeds = tuple(int(s) for s in self.seeds)

    @classmethod
    def from_dict(cls, d):
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__ and k != "theta"}
        unknown = set(d) - set(known) - {"theta"}
        if unknown:
            raise ConfigError(f"unknown consistency config keys: {sorted(unknown)}")
        if "theta" in d:
            raise ConfigError("the true impulse response cannot be set from a config file")
        return cls(**known)

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "theta"}
        d["N_grid"], d["seeds"] = list(self.N_grid), list(self.seeds)
        return d

    @property
    def grid(self):
        return UniformGrid(stop=self.support, num=self.grid_num)

    def kernel(self):
        return LinearCT(StableSplineCT(self.beta), self.grid)


@dataclass
class ConsistencyCurve:
    N_grid: np.ndarray
    seeds: np.ndarray
    errors: np.ndarray  # (seeds, N); NaN where the fit failed
    stderr: np.ndarray
    alpha: float
    failures: dict = field(default_factory=dict)

    @property
    def medians(self):
        return np.nanmedian(self.errors, axis=0)

    @property
    def spread(self):
        q1, q3 = np.nanpercentile(self.errors, [25, 75], axis=0)
        return q3 - q1

    def monotone_fraction(self):
        """Fraction of seeds whose error is nonincreasing along ``N_grid``."""
        ok = np.all(np.diff(self.errors, axis=1) <= 0, axis=1)
        return float(np.mean(ok))

    def rows(self):
        for i, s in enumerate(self.seeds):
            for j, n in enumerate(self.N_grid):
                yield int(n), int(s), float(self.errors[i, j])

    def summary(self):
        return {
            "N_grid": self.N_grid.tolist(),
            "median_error": self.medians.tolist(),
            "iqr": self.spread.tolist(),
            "monotone_fraction": self.monotone_fraction(),
            "alpha": self.alpha,
            "seeds": len(self.seeds),
            "failures": {f"{k[0]},{k[1]}": v for k, v in self.failures.items()},
        }


def _draw_locations(cfg, rng, n, spacing=None):
    """``n`` sampled past trajectories and their noiseless outputs."""
    spacing = cfg.spacing if spacing is None else spacing
    tau = cfg.grid.points
    first = cfg.support + spacing
    t = first + np.arange(n) * spacing + rng.uniform(0.0, spacing, size=n)
    length = int(math.ceil((t[-1] + spacing) / cfg.input_step)) + 2
    u = long_memory_gaussian(rng, length, step=cfg.input_step, delta=cfg.input_delta)
    X = sample_past_trajectories(u, t, tau)
    f = X @ (cfg.grid.weights * np.asarray(cfg.theta(tau), dtype=float))
    return X, f


def consistency_experiment(cfg):
    """Error ``||g_N - f_rho||_x`` of the network along ``cfg.N_grid`` for each seed.

    Per seed one training stream of length ``max(N_grid)`` is drawn and its
    prefixes are used, so the curve follows a single growing data record.
    The norm is estimated on ``test_draws`` fresh locations from an
    independent stretch of the same process.  ``gamma = gamma0 / N^alpha``.
    """
    kernel = cfg.kernel()
    n_max = cfg.N_grid[-1]
    errors = np.full((len(cfg.seeds), len(cfg.N_grid)), np.nan)
    stderr = np.full_like(errors, np.nan)
    failures = {}
    for i, seed in enumerate(cfg.seeds):
        rng = np.random.default_rng([seed, 0])
        X, f = _draw_locations(cfg, rng, n_max)
        y = f + cfg.noise_std * rng.standard_normal(n_max)
        Xt, ft = _draw_locations(cfg, np.random.default_rng([seed, 1]), cfg.test_draws, cfg.test_spacing)
        for j, n in enumerate(cfg.N_grid):
            data = Dataset(X[:n], y[:n], kind="trajectory", grid=cfg.grid.points)
            try:
                model = fit_rn(kernel, data, cfg.gamma0 / n**cfg.alpha, check_psd=False)
            except ArithmeticError as exc:
                failures[(int(n), int(seed))] = f"{type(exc).__name__}: {exc}"
                continue
            d2 = (kernel.cross(Xt, model.locations) @ model.coefficients - ft) ** 2
            m = d2.mean()
            errors[i, j] = math.sqrt(m)
            stderr[i, j] = d2.std(ddof=1) / math.sqrt(d2.size) / (2.0 * math.sqrt(m)) if m > 0 else 0.0
    return ConsistencyCurve(np.array(cfg.N_grid), np.array(cfg.seeds), errors, stderr, cfg.alpha, failures)
