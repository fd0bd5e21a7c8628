"""
Which kernels only contain stable systems?
==========================================

Certificates for a handful of impulse-response kernels and composite
location kernels.  Nonnegative kernels are decided by the sum of their
entries; composites inherit stability from their parts.
"""

import numpy as np

from rkhsid import (
    NSS,
    DiagonalSS,
    FunctionIR,
    Gaussian,
    GaussianIR,
    LaplacianIR,
    LinearIIR,
    Product,
    StableSplineDiscrete,
    Sum,
    certify,
    sign_probe_bound,
)

ir_kernels = {
    "stable spline, alpha=0.5": StableSplineDiscrete(0.5),
    "stable spline, alpha=0.95": StableSplineDiscrete(0.95),
    "diagonal stable spline": DiagonalSS(0.8),
    "gaussian radial (as IR kernel)": GaussianIR(2.0),
    "laplacian radial (as IR kernel)": LaplacianIR(2.0),
    "1/(1+|i-j|)": FunctionIR(lambda i, j: 1.0 / (1.0 + np.abs(i - j)), name="toeplitz"),
    "1/((1+i)(1+j))^2": FunctionIR(lambda i, j: 1.0 / ((1.0 + i) * (1.0 + j)) ** 2, name="separable"),
}

print("impulse-response kernels")
for name, K in ir_kernels.items():
    v = certify(K)
    total = v.evidence.get("total_bound")
    extra = f"  sum = {total:.6g}" if total is not None else ""
    print(f"  {name:<32} {v.verdict:<12}{extra}")

composites = {
    "NSS (alpha=0.8)": NSS(0.8, 1.0, truncation=40),
    "linear SS + linear SS": Sum(
        LinearIIR(StableSplineDiscrete(0.7), truncation=40), LinearIIR(StableSplineDiscrete(0.9), truncation=40)
    ),
    "linear SS x gaussian": Product(LinearIIR(StableSplineDiscrete(0.7), truncation=40), Gaussian(1.0)),
    "gaussian alone": Gaussian(1.0),
}

print("\nlocation kernels")
for name, k in composites.items():
    v = certify(k)
    print(f"  {name:<24} {v.verdict:<12} {v.rule}")

# the worst bounded input for an impulse response is its sign pattern
theta = 0.8 ** np.arange(30) * np.cos(np.arange(30))
print(f"\nworst-case response of a bounded input: {sign_probe_bound(theta):.4f}")
