"""
Eigenexpansion of the continuous-time stable spline kernel
==========================================================

Under an exponential measure on the lag axis the kernel exp(-beta max(t, s))
has closed-form eigenfunctions.  The truncated expansion converges slowly at
the origin, where the eigenfunctions all have modulus sqrt(2).  The Gram
matrix of a large sample recovers the leading eigenvalues.
"""

import numpy as np
import matplotlib.pyplot as plt

from _common import OUT
from rkhsid import StableSplineCT, empirical_mercer, ss_eigenpairs, truncated_ss_kernel

beta = 1.0
pairs = ss_eigenpairs(beta, 5)
print("leading eigenvalues:", " ".join(f"{p.zeta:.5f}" for p in pairs))

g = np.linspace(0.0, 5.0, 100)
T, S = np.meshgrid(g, g, indexing="ij")
exact = np.exp(-beta * np.maximum(T, S))
Ls = [10, 30, 100, 300, 1000, 2000]
errors = [np.abs(truncated_ss_kernel(beta, L, T, S) - exact).max() for L in Ls]
for L, e in zip(Ls, errors):
    print(f"L = {L:>4}: max error {e:.2e}")

# %% the sample Gram matrix / N as an estimate of the operator spectrum
rng = np.random.default_rng(0)
t = rng.exponential(1 / beta, size=1500)
em = empirical_mercer(StableSplineCT(beta)(t[:, None], t[None, :]))
print("empirical eigenvalues:", " ".join(f"{z:.5f}" for z in em.zeta[:5]))

fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
axes[0].loglog(Ls, errors, "o-")
axes[0].set_xlabel("terms L")
axes[0].set_ylabel("max |error|")
for p in pairs[:4]:
    axes[1].plot(g, p.psi(g), label=f"zeta = {p.zeta:.3f}")
axes[1].set_xlabel("t")
axes[1].legend(fontsize=8)
fig.tight_layout()
fig.savefig(OUT / "mercer_expansion.png", dpi=120)
