"""
Linear impulse-response identification
======================================

A short, noisy record of a stable linear system is identified three ways:
plain least squares on a long FIR, the same FIR regularized with a stable
spline prior, and a regularization network with the matching linear kernel.
The last two are the same estimator written in primal and dual form.
"""

import numpy as np
import matplotlib.pyplot as plt

from _common import OUT
from rkhsid import (
    Dataset,
    LinearIIR,
    Signal,
    StableSplineDiscrete,
    convolve,
    extract_impulse_response,
    fit_fir_regularized,
    fit_rn,
    make_regressors,
    random_linear_system,
    tune_ml,
)

rng = np.random.default_rng(1)

# a random 10th order system with poles inside radius 0.95
system = random_linear_system(rng_seed=rng)
theta_true = system.impulse_response
m = 60
print(f"true impulse response: {theta_true.size} taps, l2 norm {np.linalg.norm(theta_true):.2f}")

# 300 input samples after burn-in, noise variance 4
u = Signal(rng.normal(size=theta_true.size + m + 300))
times = np.arange(u.stop_index - 300, u.stop_index)
_, X = make_regressors(u, m, times=times)
Y = convolve(theta_true, u).at(times) + 2.0 * rng.normal(size=times.size)

data = Dataset(X, Y, kind="truncated")

# %% hyperparameters by marginal likelihood: decay rate, prior scale, noise
tuned = tune_ml("stable_spline", data, starts=4)
alpha = tuned.best.kernel_params["alpha"]
gamma = tuned.best.noise / (tuned.best.scale * len(Y))
print(f"tuned alpha {alpha:.3f}, noise variance {tuned.best.noise:.2f} (true 4), gamma {gamma:.2e}")

# %% least squares and the regularized FIR
K = StableSplineDiscrete(alpha).matrix(m)
theta_ls = fit_fir_regularized(X, Y, np.eye(m), 0.0)
theta_reg = fit_fir_regularized(X, Y, K, gamma * len(Y))

# %% the regularization network with the linear stable-spline kernel
model = fit_rn(LinearIIR(StableSplineDiscrete(alpha), truncation=m), data, gamma)
theta_rn = extract_impulse_response(model).coefficients
print(f"representer residual {model.residual:.1e}")
print(f"primal vs dual impulse response gap {np.abs(theta_rn - theta_reg).max():.1e}")

truth = np.zeros(m)
k = min(m, theta_true.size)
truth[:k] = theta_true[:k]
for name, est in (("least squares", theta_ls), ("stable spline", theta_rn)):
    err = np.linalg.norm(est - truth) / np.linalg.norm(truth)
    print(f"{name:>14}: relative error {100 * err:5.1f}%")

fig, ax = plt.subplots(figsize=(7, 3.5))
ax.plot(truth, "k", lw=2, label="true")
ax.plot(theta_ls, color="0.6", lw=0.8, label="least squares")
ax.plot(theta_rn, "C0", label="stable spline network")
ax.set_xlabel("lag")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "fir_identification.png", dpi=120)
