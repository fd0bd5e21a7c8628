"""Signals, regressor construction, benchmark simulators and the fit metric.

Discrete-time conventions
-------------------------
A :class:`Signal` with ``start_index = s`` holds ``u_s, u_{s+1}, ...``.
Regressors are stored newest-first, so the location at time ``t`` with
memory ``m`` is ``[u_t, u_{t-1}, ..., u_{t-m+1}]``.  Impulse responses are
indexed by lag: ``theta[k]`` multiplies ``u_{t-k}``.
"""

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sps

from ._errors import BoundaryError, UndefinedFitError

__all__ = [
    "Signal",
    "InputLocation",
    "LinearSystem",
    "Dataset",
    "make_regressors",
    "make_dataset",
    "sample_past_trajectory",
    "sample_past_trajectories",
    "benchmark_nonlinearity",
    "simulate_s1",
    "simulate_s2",
    "random_linear_system",
    "convolve",
    "fit_metric",
    "read_signal_csv",
    "write_signal_csv",
    "read_dataset",
    "write_dataset",
]

LOCATION_KINDS = ("finite", "truncated", "trajectory")


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _frozen(values, ndim=1):
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Signal:
    """Real-valued sequence sampled at ``(start_index + k) * sample_period``."""

    samples: np.ndarray
    start_index: int = 0
    sample_period: float = 1.0

    def __post_init__(self):
        samples = _frozen(self.samples)
        if samples.size < 1:
            raise ValueError("a signal needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("signal samples must be finite")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "start_index", int(self.start_index))
        object.__setattr__(self, "sample_period", float(self.sample_period))

    def __len__(self):
        return self.samples.size

    @property
    def stop_index(self):
        """One past the last integer time index."""
        return self.start_index + self.samples.size

    @property
    def indices(self):
        return np.arange(self.start_index, self.stop_index)

    @property
    def times(self):
        return self.indices * self.sample_period

    def at(self, t):
        """Sample(s) at integer time index ``t``."""
        t = np.asarray(t)
        k = t - self.start_index
        if np.any(k < 0) or np.any(k >= self.samples.size):
            raise BoundaryError(
                f"time index outside [{self.start_index}, {self.stop_index})",
                first_valid=self.start_index,
            )
        return self.samples[k]

    def __call__(self, s, causal_zero=False):
        """Linearly interpolated value at continuous time(s) ``s``.

        Times before the first sample raise :class:`BoundaryError` unless
        ``causal_zero`` is set, in which case the input is taken as zero there.
        """
        s = np.asarray(s, dtype=float)
        t0 = self.start_index * self.sample_period
        t1 = (self.stop_index - 1) * self.sample_period
        eps = 1e-9 * self.sample_period
        early = s < t0 - eps
        if np.any(early) and not causal_zero:
            raise BoundaryError(
                f"continuous time {float(np.min(s)):g} precedes signal start {t0:g}",
                first_valid=t0,
            )
        if np.any(s > t1 + eps):
            raise BoundaryError(f"continuous time {float(np.max(s)):g} beyond signal end {t1:g}")
        out = np.interp(s, self.times, self.samples)
        return np.where(early, 0.0, out)

    def to_csv(self, path):
        write_signal_csv(self, path)


@dataclass(frozen=True, eq=False)
class InputLocation:
    """A single input location (lagged regressor or sampled past trajectory)."""

    values: np.ndarray
    kind: str = "finite"
    grid: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in LOCATION_KINDS:
            raise ValueError(f"unknown location kind {self.kind!r}")
        object.__setattr__(self, "values", _frozen(self.values))
        if self.grid is not None:
            grid = _frozen(self.grid)
            if grid.shape != self.values.shape:
                raise ValueError("grid and values must have the same length")
            object.__setattr__(self, "grid", grid)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Impulse response indexed by lag, plus generation metadata."""

    impulse_response: np.ndarray
    poles: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))
    zeros: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=complex))

    def __post_init__(self):
        theta = _frozen(self.impulse_response)
        if not np.all(np.isfinite(theta)):
            raise ValueError("impulse response must be finite")
        object.__setattr__(self, "impulse_response", theta)

    @property
    def order(self):
        return self.poles.size

    @property
    def pole_moduli(self):
        return np.abs(self.poles)

    @property
    def l2_norm(self):
        return float(np.linalg.norm(self.impulse_response))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Paired input locations and outputs.

    ``locations`` is an ``(N, d)`` array, one location per row.  For
    sampled trajectories ``grid`` holds the lags the columns refer to.
    """

    locations: np.ndarray
    outputs: np.ndarray
    timestamps: np.ndarray | None = None
    kind: str = "finite"
    grid: np.ndarray | None = None

    def __post_init__(self):
        X = np.array(self.locations, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        Y = np.array(self.outputs, dtype=float).reshape(-1)
        if X.shape[0] != Y.size or Y.size < 1:
            raise ValueError(
                f"need as many locations as outputs (got {X.shape[0]} and {Y.size})"
            )
        ts = np.arange(Y.size) if self.timestamps is None else np.asarray(self.timestamps)
        if ts.shape != Y.shape:
            raise ValueError("timestamps must match outputs")
        if self.kind not in LOCATION_KINDS:
            raise ValueError(f"unknown location kind {self.kind!r}")
        object.__setattr__(self, "locations", X)
        object.__setattr__(self, "outputs", Y)
        object.__setattr__(self, "timestamps", ts)
        if self.grid is not None:
            object.__setattr__(self, "grid", np.asarray(self.grid, dtype=float))

    def __len__(self):
        return self.outputs.size

    def location(self, i):
        return InputLocation(self.locations[i], kind=self.kind, grid=self.grid)


# Regressors -----------------------------------------------------------------
def make_regressors(u, memory=None, horizon=None, times=None, zero_pad=False):
    """Stack lagged input windows, newest sample first.

    Parameters
    ----------
    u : Signal
    memory : int or None
        Finite system memory ``m``.  ``None`` means infinite memory, in which
        case ``horizon`` gives the truncation length ``p``.
    horizon : int, optional
        Truncation length for infinite-memory locations.
    times : array-like of int, optional
        Integer time indices at which to build locations.  Defaults to every
        time for which all lags are available (or every sample when
        ``zero_pad`` is set).
    zero_pad : bool
        Treat the input as zero before its first sample instead of raising.

    Returns
    -------
    times : (N,) int ndarray
    X : (N, d) ndarray
        Row ``i`` is ``[u_t, u_{t-1}, ..., u_{t-d+1}]`` for ``t = times[i]``.
    """
    if memory is None:
        if horizon is None:
            raise ValueError("infinite-memory regressors need a truncation horizon")
        d = int(horizon)
    else:
        d = int(memory)
    if d < 1:
        raise ValueError("memory/horizon must be a positive integer")
    first_valid = u.start_index if zero_pad else u.start_index + d - 1
    if times is None:
        times = np.arange(first_valid, u.stop_index)
        if times.size == 0:
            raise BoundaryError(
                f"signal of length {len(u)} is too short for {d} lags",
                first_valid=first_valid,
            )
    else:
        times = np.atleast_1d(np.asarray(times, dtype=int))
        if times.min() < first_valid:
            raise BoundaryError(
                f"time {times.min()} needs samples before the signal start; "
                f"first valid t is {first_valid}",
                first_valid=first_valid,
            )
        if times.max() >= u.stop_index:
            raise BoundaryError(f"time {times.max()} is beyond the signal end")
    padded = np.concatenate([np.zeros(d - 1), u.samples]) if zero_pad else u.samples
    offset = d - 1 if zero_pad else 0
    windows = np.lib.stride_tricks.sliding_window_view(padded, d)[:, ::-1]
    rows = times - u.start_index + offset - (d - 1)
    return times, np.ascontiguousarray(windows[rows])


def make_dataset(u, y, memory=None, horizon=None, zero_pad=False):
    """Pair regressors built from ``u`` with the outputs of ``y`` at common times."""
    d = memory if memory is not None else horizon
    lo = max(y.start_index, u.start_index if zero_pad else u.start_index + int(d) - 1)
    hi = min(y.stop_index, u.stop_index)
    if hi <= lo:
        raise BoundaryError("input and output share no valid time instants", first_valid=lo)
    times = np.arange(lo, hi)
    times, X = make_regressors(u, memory, horizon, times=times, zero_pad=zero_pad)
    kind = "finite" if memory is not None else "truncated"
    return Dataset(X, y.at(times), timestamps=times, kind=kind)


def sample_past_trajectory(u, t, grid, window=None, causal_zero=False):
    """Continuous-time location ``x_t(tau) = u(t - tau)`` sampled on ``grid``.

    ``u`` is a callable of continuous time or a :class:`Signal` (linearly
    interpolated).  With ``window = T`` lags beyond ``T`` are zeroed.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or grid[0] < 0 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing lags starting at or after 0")
    values = _past_values(u, t - grid, causal_zero)
    if window is not None:
        values = np.where(grid <= window, values, 0.0)
    return InputLocation(values, kind="trajectory", grid=grid)


def sample_past_trajectories(u, times, grid, window=None, causal_zero=False):
    """Batch version of :func:`sample_past_trajectory`; returns an ``(N, G)`` array."""
    grid = np.asarray(grid, dtype=float)
    times = np.asarray(times, dtype=float)
    values = _past_values(u, times[:, None] - grid[None, :], causal_zero)
    if window is not None:
        values = np.where(grid[None, :] <= window, values, 0.0)
    return values


def _past_values(u, s, causal_zero):
    if isinstance(u, Signal):
        return u(s, causal_zero=causal_zero)
    return np.asarray(u(s), dtype=float) * np.ones_like(s)


# Benchmark systems ----------------------------------------------------------
BENCHMARK_MEMORY = 7


def benchmark_nonlinearity(X):
    """Nonlinear FIR map of the benchmark; ``X`` columns are ``u_t, ..., u_{t-6}``."""
    X = np.atleast_2d(X)
    u0, u1, u2, u3, u4, u5, u6 = (X[:, k] for k in range(BENCHMARK_MEMORY))
    return (
        u0
        + 0.6 * u1
        + 0.35 * (u2 + u4)
        - 0.25 * u3**2
        + 0.2 * (u5 + u6)
        + 0.9 * u3
        + 0.25 * u0 * u1
        + 0.75 * u2**3
        - u1 * u2
        + 0.5 * (u0**2 + u0 * u2 + u1 * u3)
    )


def simulate_s1(u, noise_variance, rng_seed=None):
    """Output of the nonlinear FIR benchmark plus white Gaussian noise.

    The returned signal starts once six past inputs are available.
    """
    return _simulate(u, None, noise_variance, rng_seed)


def simulate_s2(u, sys, noise_variance, rng_seed=None):
    """Linear system ``sys`` in parallel with the nonlinear FIR benchmark."""
    theta = sys.impulse_response if isinstance(sys, LinearSystem) else np.asarray(sys, float)
    return _simulate(u, theta, noise_variance, rng_seed)


def _simulate(u, theta, noise_variance, rng_seed):
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    burn = BENCHMARK_MEMORY - 1
    if theta is not None:
        burn = max(burn, theta.size - 1)
    if len(u) <= burn:
        raise BoundaryError(
            f"input of length {len(u)} cannot cover a burn-in of {burn} samples",
            first_valid=u.start_index + burn,
        )
    times, X = make_regressors(u, BENCHMARK_MEMORY, times=np.arange(u.start_index + burn, u.stop_index))
    y = benchmark_nonlinearity(X)
    if theta is not None:
        y = y + convolve(theta, u).at(times)
    rng = _as_rng(rng_seed)
    e = rng.normal(0.0, np.sqrt(noise_variance), size=y.size)
    return Signal(y + e, start_index=int(times[0]), sample_period=u.sample_period)


def random_linear_system(order=10, pole_radius=0.95, target_l2=10.0, rng_seed=None, tail_tol=1e-8):
    """Random stable, strictly proper rational system scaled to a given l2 norm.

    Poles are drawn uniformly in the disk of radius ``pole_radius`` (in
    conjugate pairs), zeros uniformly in the unit disk.  The impulse response
    is truncated once the remaining energy is below ``tail_tol`` times the
    total.
    """
    if order < 1:
        raise ValueError("order must be at least 1")
    rng = _as_rng(rng_seed)
    while True:
        poles = _conjugate_points(rng, order, pole_radius)
        zeros = _conjugate_points(rng, order - 1, 1.0)
        gain = rng.choice([-1.0, 1.0])
        b = gain * np.real(np.poly(zeros)) if zeros.size else np.array([gain])
        a = np.real(np.poly(poles))
        theta = _impulse_response(b, a, tail_tol)
        energy = float(theta @ theta)
        if np.isfinite(energy) and energy > 1e-12:
            break
    theta = theta * (target_l2 / np.sqrt(energy))
    return LinearSystem(theta, poles=poles, zeros=zeros)


def _conjugate_points(rng, n, radius):
    pts = []
    for _ in range(n // 2):
        r = radius * np.sqrt(rng.uniform())
        phi = rng.uniform(0.0, np.pi)
        z = r * np.exp(1j * phi)
        pts += [z, np.conj(z)]
    if n % 2:
        pts.append(complex(rng.uniform(-radius, radius)))
    return np.array(pts, dtype=complex)


def _impulse_response(b, a, tail_tol):
    # strictly proper: y_t = sum b_k u_{t-1-k} - sum a_k y_{t-k}
    n = 512
    while True:
        imp = np.zeros(n)
        imp[0] = 1.0
        h = sps.lfilter(np.concatenate([[0.0], b]), a, imp)
        tail = np.cumsum((h**2)[::-1])[::-1]
        total = tail[0]
        if total == 0:
            return h[:1]
        ok = np.nonzero(tail < tail_tol * total)[0]
        if ok.size and ok[0] < n - 1 and tail[-1] < 1e-3 * tail_tol * total:
            return h[: ok[0]]
        n *= 2
        if n > 2**20:
            raise RuntimeError("impulse response does not decay")


def convolve(theta, u):
    """Causal convolution ``y_t = sum_k theta_k u_{t-k}`` with zero initial input."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    y = sps.lfilter(theta, [1.0], u.samples)
    return Signal(y, start_index=u.start_index, sample_period=u.sample_period)


def fit_metric(y_test, y_hat):
    """Percentage fit ``100 (1 - |y - y_hat| / |y - mean(y)|)``."""
    y_test = np.asarray(y_test, dtype=float).reshape(-1)
    y_hat = np.asarray(y_hat, dtype=float).reshape(-1)
    if y_test.shape != y_hat.shape or y_test.size < 2:
        raise ValueError("fit_metric needs two vectors of equal length >= 2")
    denom = np.linalg.norm(y_test - y_test.mean())
    if denom == 0:
        raise UndefinedFitError("fit is undefined for a constant reference signal")
    return 100.0 * (1.0 - np.linalg.norm(y_test - y_hat) / denom)


# CSV / JSON I/O ---------------------------------------------------------------
def write_signal_csv(sig, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "value"])
        for t, v in zip(sig.indices, sig.samples):
            w.writerow([int(t), repr(float(v))])


def read_signal_csv(path, sample_period=1.0):
    t, v = _read_two_columns(path, ("t", "value"))
    t = t.astype(int)
    if t.size > 1 and np.any(np.diff(t) != 1):
        raise ValueError(f"{path}: time column must be consecutive integers")
    return Signal(v, start_index=int(t[0]), sample_period=sample_period)


def _read_two_columns(path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0][: len(header)]] != list(header):
        raise ValueError(f"{path}: expected header {','.join(header)}")
    body = np.array([[float(c) for c in r[: len(header)]] for r in rows[1:] if r], dtype=float)
    if body.size == 0:
        raise ValueError(f"{path}: no data rows")
    return body[:, 0], body[:, 1]


def write_dataset(path, y, input_path, memory=None, horizon=None, zero_pad=False):
    """Write outputs as ``t,y`` CSV plus a JSON sidecar naming the input signal."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "y"])
        for t, v in zip(y.indices, y.samples):
            w.writerow([int(t), repr(float(v))])
    sidecar = {
        "input": os.path.relpath(Path(input_path).resolve(), path.resolve().parent),
        "memory": memory,
        "horizon": horizon,
        "zero_pad": zero_pad,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2))


def read_dataset(path):
    """Read a ``t,y`` CSV and build its locations from the JSON sidecar.

    Returns ``(dataset, sidecar)``.  The ``y`` column may be absent, in which
    case outputs are NaN (useful for prediction-only files).
    """
    path = Path(path)
    sidecar = json.loads(path.with_suffix(".json").read_text())
    u = read_signal_csv(path.parent / sidecar["input"])
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = [c.strip() for c in rows[0]]
    if header[:1] != ["t"]:
        raise ValueError(f"{path}: expected a leading 't' column")
    body = [r for r in rows[1:] if r]
    times = np.array([int(float(r[0])) for r in body])
    if "y" in header:
        k = header.index("y")
        y = np.array([float(r[k]) for r in body])
    else:
        y = np.full(times.size, np.nan)
    times, X = make_regressors(
        u,
        sidecar.get("memory"),
        sidecar.get("horizon"),
        times=times,
        zero_pad=bool(sidecar.get("zero_pad", False)),
    )
    kind = "finite" if sidecar.get("memory") is not None else "truncated"
    return Dataset(X, y, timestamps=times, kind=kind), sidecar
