"""
A nonlinear system with unknown memory
======================================

The benchmark nonlinearity depends on six past inputs, but the estimator is
not told so.  The NSS kernel works on long input windows and lets its stable
spline factor decide how fast the past is forgotten.  A Gaussian kernel on a
guessed window length is shown for comparison.
"""

import numpy as np
import matplotlib.pyplot as plt

from _common import OUT
from rkhsid import Dataset, Signal, fit_metric, make_regressors, simulate_s1, tune_ml

rng = np.random.default_rng(3)
n_train, n_test, horizon = 400, 400, 40


def record(n, noise):
    u = Signal(rng.normal(0.0, 2.0, size=n + horizon + 6))
    y = simulate_s1(u, noise, rng)
    times = np.arange(u.stop_index - n, u.stop_index)
    return u, y, times


u, y, t = record(n_train, 4.0)
ut, yt, tt = record(n_test, 0.0)  # noiseless test outputs

# %% NSS: all hyperparameters from the marginal likelihood of the training data
_, X = make_regressors(u, None, horizon=horizon, times=t)
_, Xt = make_regressors(ut, None, horizon=horizon, times=tt)
train = Dataset(X, y.at(t), kind="truncated")
nss = tune_ml("nss", train, starts=4, rng_seed=0)
print("NSS hyperparameters:", {k: round(v, 4) for k, v in nss.best.kernel_params.items()})
print("  at a search bound:", [k for k, hit in nss.boundary.items() if hit] or "none")
fit_nss = fit_metric(yt.at(tt), nss.fit(train).predict(Xt))

# %% Gaussian kernel with a few guessed window lengths
fits = {}
for m in (2, 6, 15):
    _, Xm = make_regressors(u, m, times=t)
    _, Xmt = make_regressors(ut, m, times=tt)
    data = Dataset(Xm, y.at(t))
    res = tune_ml("gaussian", data, starts=4, rng_seed=0)
    fits[m] = fit_metric(yt.at(tt), res.fit(data).predict(Xmt))

print(f"NSS fit on test data: {fit_nss:.1f}%")
for m, f in fits.items():
    print(f"Gaussian, m = {m:>2}:     {f:.1f}%")

fig, ax = plt.subplots(figsize=(7, 3))
k = np.arange(80)
ax.plot(tt[k], yt.at(tt)[k], "k", label="true (noiseless)")
ax.plot(tt[k], nss.fit(train).predict(Xt)[k], "C0--", label="NSS prediction")
ax.set_xlabel("t")
ax.legend()
fig.tight_layout()
fig.savefig(OUT / "nonlinear_nss.png", dpi=120)
