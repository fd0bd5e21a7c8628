"""Stability certificates for kernels of dynamic systems.

A verdict is ``"stable"`` or ``"unstable"`` only when an analytic rule fires
and its hypothesis is checked numerically; everything else is
``"inconclusive"``.
"""

from dataclasses import dataclass, field

import numpy as np

from .kernels import (
    NSS,
    Gaussian,
    IRKernel,
    Laplacian,
    LinearCT,
    LinearFIR,
    LinearIIR,
    Product,
    Scaled,
    Sum,
)

__all__ = [
    "StabilityVerdict",
    "summability_test",
    "diagonal_bound_test",
    "composed_stability",
    "certify",
    "sign_probe_bound",
    "diagonal_bound",
]

STABLE, UNSTABLE, INCONCLUSIVE = "stable", "unstable", "inconclusive"
DEFAULT_PROBES = 32
DEFAULT_SEED = 0


@dataclass
class StabilityVerdict:
    verdict: str
    rule: str
    evidence: dict = field(default_factory=dict)

    @property
    def stable(self):
        return self.verdict == STABLE

    def to_dict(self):
        return {"verdict": self.verdict, "rule": self.rule, "evidence": _jsonable(self.evidence)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _default_P(K):
    """Truncation at which the analytic tail drops below 1e-13, else 256."""
    if K.abs_tail(1) is None:
        return 256
    P = 1
    while K.abs_tail(P) > 1e-13 and P < 100_000:
        P *= 2
    lo, hi = P // 2, P
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if K.abs_tail(mid) > 1e-13:
            lo = mid
        else:
            hi = mid
    return max(hi, 1)


def _dyadic_abs_sums(K, P, levels=3):
    sums, Ps = [], [P * 2**k for k in range(levels)]
    for Q in Ps:
        sums.append(float(np.abs(K.matrix(Q)).sum()))
    return Ps, sums


def _increments_do_not_decay(sums):
    inc = np.diff(sums)
    # For nonnegative terms, dyadic blocks of a convergent series must shrink.
    return inc[0] > 0 and np.all(inc[1:] >= inc[:-1] * (1 - 1e-9))


def summability_test(K, P=None, probes=DEFAULT_PROBES, rng_seed=DEFAULT_SEED):
    """Certify stability of the IIR kernel induced by impulse-response kernel ``K``.

    Nonnegative kernels are stable iff ``sum_{i,j} K(i,j)`` is finite.  The
    partial sum over ``[1, P]^2`` is combined with a closed-form tail when the
    family provides one.  Sign-indefinite kernels are probed with random sign
    vectors ``a``: a probe whose response ``sum_i |(K a)_i|`` keeps growing
    over dyadic truncations witnesses instability.
    """
    if P is None:
        P = _default_P(K)
    if P < 1:
        raise ValueError("P must be at least 1")
    M = K.matrix(P)
    partial = float(np.abs(M).sum())
    nonneg = K.nonnegative if K.nonnegative is not None else bool(np.all(M >= 0))
    ev = {"truncation": P, "partial_sum": partial}

    if nonneg:
        tail = K.abs_tail(P)
        if tail is not None:
            ev.update(tail_bound=tail, total_bound=partial + tail)
            return StabilityVerdict(STABLE, "absolute summability (nonnegative kernel, closed-form tail)", ev)
        if K.stationary:
            h0 = float(K.entry(1, 1))
            ev.update(row_sum_lower_bound=h0, growth="linear in P")
            if h0 > 0:
                return StabilityVerdict(
                    UNSTABLE,
                    "nonnegative stationary kernel: every row sum >= h(0) > 0, so the total sum diverges",
                    ev,
                )
        Ps, sums = _dyadic_abs_sums(K, P)
        ev.update(dyadic_truncations=Ps, dyadic_sums=sums)
        if _increments_do_not_decay(sums):
            return StabilityVerdict(UNSTABLE, "nonnegative kernel with non-decaying dyadic increments", ev)
        return StabilityVerdict(INCONCLUSIVE, "nonnegative kernel, partial sums bounded so far", ev)

    rng = np.random.default_rng(rng_seed)
    Ps = [P, 2 * P, 4 * P]
    big = K.matrix(Ps[-1])
    worst = []
    diverging = None
    for n in range(probes):
        a = rng.choice([-1.0, 1.0], size=Ps[-1])
        resp = [float(np.abs(big[:Q, :Q] @ a[:Q]).sum()) for Q in Ps]
        worst.append(resp)
        if diverging is None and _increments_do_not_decay(resp):
            diverging = n
    ev.update(probe_truncations=Ps, probe_responses=worst, probes=probes)
    if diverging is not None:
        ev["diverging_probe"] = diverging
        return StabilityVerdict(UNSTABLE, "sign probe with growing l1 response", ev)
    return StabilityVerdict(INCONCLUSIVE, "sign-indefinite kernel; no diverging probe found", ev)


def diagonal_bound(kernel, r):
    """Analytic ``C_r >= sup_{|x|_inf <= r} k(x, x)`` or ``None`` if unknown."""
    if isinstance(kernel, (Gaussian, Laplacian)):
        return 1.0
    if isinstance(kernel, NSS):
        s = kernel.ir_kernel.abs_sum()
        return r**2 * s
    if isinstance(kernel, LinearFIR):
        return r**2 * float(np.abs(kernel.K).sum())
    if isinstance(kernel, LinearIIR):
        s = kernel.generator.abs_sum()
        return None if s is None else r**2 * s
    if isinstance(kernel, LinearCT):
        w = kernel.grid.weights
        return r**2 * float(w @ np.abs(kernel.grid_matrix) @ w)
    if isinstance(kernel, Scaled):
        c = diagonal_bound(kernel.kernel, r)
        return None if c is None else kernel.scale * c
    if isinstance(kernel, (Sum, Product)):
        a, b = diagonal_bound(kernel.left, r), diagonal_bound(kernel.right, r)
        if a is None or b is None:
            return None
        return a + b if isinstance(kernel, Sum) else a * b
    return None


def _probe_dim(kernel, default=10):
    return kernel.dim if kernel.dim is not None else default


def diagonal_bound_test(kernel, radii=(1.0,), samples_per_radius=200, rng_seed=DEFAULT_SEED, dim=None):
    """Check ``sup k(x, x)`` over infinity-norm balls of the given radii.

    Samples uniform points and all-``+-r`` corner points in each ball and
    reports the empirical supremum.  The verdict is ``stable`` when an
    analytic bound exists for the family and the samples respect it.
    """
    rng = np.random.default_rng(rng_seed)
    d = dim or _probe_dim(kernel)
    records = []
    verdict = STABLE
    for r in radii:
        U = rng.uniform(-r, r, size=(samples_per_radius, d))
        S = r * rng.choice([-1.0, 1.0], size=(samples_per_radius, d))
        X = np.vstack([U, S, np.full((1, d), r)])
        emp = float(np.max(kernel.diag(X)))
        bound = diagonal_bound(kernel, r)
        records.append({"radius": r, "empirical_sup": emp, "analytic_bound": bound})
        if bound is None or emp > bound * (1 + 1e-9) + 1e-12:
            verdict = INCONCLUSIVE
    rule = "bounded diagonal on every ball" if verdict == STABLE else "no analytic diagonal bound"
    return StabilityVerdict(verdict, rule, {"balls": records, "dim": d})


def _leaf(kernel):
    if isinstance(kernel, LinearIIR):
        v = summability_test(kernel.generator)
        return StabilityVerdict(v.verdict, "linear IIR kernel: " + v.rule, v.evidence)
    if isinstance(kernel, LinearFIR):
        return StabilityVerdict(STABLE, "finite-memory linear kernel", {"dim": kernel.dim})
    if isinstance(kernel, LinearCT):
        T = kernel.grid.stop
        closed = kernel.generator.abs_integral(T)
        w = kernel.grid.weights
        quad = float(w @ np.abs(kernel.grid_matrix) @ w)
        ev = {"support": T, "abs_integral_quadrature": quad, "abs_integral_closed_form": closed}
        return StabilityVerdict(STABLE, "compactly supported continuous-time kernel with finite |K| integral", ev)
    if isinstance(kernel, NSS):
        lin = summability_test(kernel.ir_kernel)
        diag = diagonal_bound_test(kernel, radii=(1.0,), samples_per_radius=50)
        ok = lin.stable and diag.stable
        return StabilityVerdict(
            STABLE if ok else INCONCLUSIVE,
            "product of a stable linear stable-spline kernel and a bounded radial factor",
            {"linear_factor": lin.to_dict(), "diagonal": diag.to_dict()},
        )
    return diagonal_bound_test(kernel, radii=(1.0, 10.0), samples_per_radius=50)


def composed_stability(kernel):
    """Certify a sum / product of kernels from certificates of its operands.

    Stable operands give a stable composition; no conclusion is drawn
    otherwise.
    """
    if isinstance(kernel, Scaled):
        inner = composed_stability(kernel.kernel)
        return StabilityVerdict(inner.verdict, "positive scaling: " + inner.rule, inner.evidence)
    if not isinstance(kernel, (Sum, Product)):
        return _leaf(kernel)
    left, right = composed_stability(kernel.left), composed_stability(kernel.right)
    verdict = STABLE if left.stable and right.stable else INCONCLUSIVE
    rule = f"{kernel.family} of stable kernels" if verdict == STABLE else f"{kernel.family}: no rule fires"
    return StabilityVerdict(verdict, rule, {"left": left.to_dict(), "right": right.to_dict()})


def certify(kernel):
    """Stability verdict for a location kernel or an impulse-response kernel."""
    if isinstance(kernel, IRKernel):
        return summability_test(kernel)
    return composed_stability(kernel)


def sign_probe_bound(theta, P=None):
    """Response ``theta^T sign(theta) = ||theta||_1`` to the worst bounded input."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if P is not None:
        theta = theta[:P]
    return float(theta @ np.sign(theta))
