"""
Does the network converge to the regression function?
=====================================================

A continuous-time linear system is driven by a long-memory Gaussian input,
and the network uses the stable spline kernel with gamma shrinking like
N^(-1/4).  The error in the input-induced norm is tracked along one growing
data record per seed.  A separate check estimates the lagged covariances c_k
for a memory-3 FIR predictor: they vanish beyond the memory.

This is a reduced version of the full experiment (see the CLI
``consistency`` subcommand for the default configuration).
"""

import numpy as np
import matplotlib.pyplot as plt

from _common import OUT
from rkhsid import ConsistencyConfig, consistency_experiment, estimate_ck, linear_kernel_eigen, white_regressors

cfg = ConsistencyConfig(N_grid=(100, 200, 400, 800), seeds=tuple(range(6)), test_draws=1000)
curve = consistency_experiment(cfg)
summary = curve.summary()
for n, med in zip(summary["N_grid"], summary["median_error"]):
    print(f"N = {n:>4}: median error {med:.4f}")
print(f"nonincreasing in {100 * summary['monotone_fraction']:.0f}% of seeds")

# %% c_k for y_t = u_t - 0.6 u_{t-1} + 0.3 u_{t-2} + e_t
theta = np.array([1.0, -0.6, 0.3])
ck = estimate_ck(
    lambda X: X[:, :3] @ theta,
    linear_kernel_eigen(np.eye(3)),
    white_regressors(3),
    lambda r, n: 0.5 * r.standard_normal(n),
    k_max=10,
    sample_count=4000,
)
for k, (v, se) in enumerate(zip(ck.values, ck.stderr)):
    print(f"c_{k:<2} = {v:+.4f}  (SE {se:.4f})")

fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
axes[0].loglog(curve.N_grid, curve.errors.T, color="0.7", lw=0.8)
axes[0].loglog(curve.N_grid, curve.medians, "C0o-", lw=2)
axes[0].set_xlabel("N")
axes[0].set_ylabel("error")
axes[1].errorbar(np.arange(ck.values.size), ck.values, yerr=3 * ck.stderr, fmt="o")
axes[1].axhline(0, color="k", lw=0.5)
axes[1].set_xlabel("k")
axes[1].set_ylabel("c_k")
fig.tight_layout()
fig.savefig(OUT / "consistency.png", dpi=120)
