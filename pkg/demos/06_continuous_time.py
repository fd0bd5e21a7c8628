"""
Continuous-time impulse response from sampled trajectories
==========================================================

Input locations are past trajectories u(t - tau) sampled on a lag grid.
The linear kernel built on exp(-beta max(tau, s)) is integrated with the
trapezoidal rule, and the estimated impulse response is read back as a
function of continuous lag.
"""

import numpy as np
import matplotlib.pyplot as plt

from _common import OUT
from rkhsid import (
    Dataset,
    LinearCT,
    Signal,
    StableSplineCT,
    UniformGrid,
    extract_ir_ct,
    fit_rn,
    sample_past_trajectories,
)

rng = np.random.default_rng(4)
dt = 0.05
grid = UniformGrid(6.0, 121)


def g_true(tau):
    return np.exp(-tau) * np.sin(2 * tau)


# a smooth input: white noise through a short moving average
u = Signal(np.convolve(rng.normal(size=6000), np.ones(10) / np.sqrt(10), mode="same"), sample_period=dt)
times = np.sort(rng.uniform(10.0, u.stop_index * dt - 1, size=300))
X = sample_past_trajectories(u, times, grid.points)
y = X @ (grid.weights * g_true(grid.points)) + 0.05 * rng.normal(size=times.size)

model = fit_rn(LinearCT(StableSplineCT(1.0), grid), Dataset(X, y, kind="trajectory", grid=grid.points), 1e-4)
tau = np.linspace(0, 6, 301)
est = extract_ir_ct(model, tau)
err = np.sqrt(np.trapezoid((est.coefficients - g_true(tau)) ** 2, tau) / np.trapezoid(g_true(tau) ** 2, tau))
print(f"relative L2 error of the impulse response: {100 * err:.1f}%")

fig, ax = plt.subplots(figsize=(7, 3))
ax.plot(tau, g_true(tau), "k", label="true")
ax.plot(tau, est.coefficients, "C0--", label="estimate")
ax.set_xlabel("lag")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "continuous_time.png", dpi=120)
