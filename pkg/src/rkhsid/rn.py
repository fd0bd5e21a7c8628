"""Regularization networks: fitting, prediction and impulse-response extraction.

The network minimizes ``sum_i (y_i - f(x_i))^2 / N + gamma ||f||^2`` over the
RKHS of a kernel.  By the representer theorem the minimizer is
``sum_i c_i k(x_i, .)`` with ``c = (K + gamma N I)^{-1} Y``.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg as la

from ._errors import ConditioningError, KindMismatchError, RankError, UnsupportedExtractionError
from .kernels import (
    IRKernel,
    LinearCT,
    LinearFIR,
    LinearIIR,
    Scaled,
    _stack,
    kernel_from_dict,
    psd_check,
)
from .signals import Dataset, InputLocation

__all__ = [
    "RNModel",
    "ImpulseEstimate",
    "fit_rn",
    "predict",
    "fit_fir_regularized",
    "extract_impulse_response",
    "extract_ir_ct",
    "solve_regularized",
    "rkhs_norm_squared",
]

RESIDUAL_TOL = 1e-10
_JITTER_LADDER = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


@dataclass(frozen=True, eq=False)
class RNModel:
    """A fitted regularization network."""

    kernel: object
    locations: np.ndarray
    coefficients: np.ndarray
    gamma: float
    gram: np.ndarray | None = None
    residual: float = 0.0

    @property
    def n(self):
        return self.coefficients.size

    def predict(self, X):
        return predict(self, X)

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "gamma": self.gamma,
            "locations": self.locations.tolist(),
            "coefficients": self.coefficients.tolist(),
            "residual": self.residual,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            kernel_from_dict(d["kernel"]),
            np.asarray(d["locations"], dtype=float),
            np.asarray(d["coefficients"], dtype=float),
            float(d["gamma"]),
            residual=float(d.get("residual", 0.0)),
        )


@dataclass(frozen=True, eq=False)
class ImpulseEstimate:
    """Estimated impulse response; ``grid`` is set for continuous-time estimates."""

    coefficients: np.ndarray
    grid: np.ndarray | None = None
    source: RNModel | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.coefficients)):
            raise ValueError("impulse response estimate is not finite")
        if self.grid is not None and np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")

    def __len__(self):
        return self.coefficients.size


def solve_regularized(G, Y, shift, residual_tol=RESIDUAL_TOL):
    """Solve ``(G + shift I) c = Y`` by Cholesky with jitter escalation.

    The factorization is retried with jitter ``1e-12 * trace`` up to
    ``1e-8 * trace``.  If needed, iterative refinement against the
    unjittered matrix, with residuals computed in extended precision, then
    brings the relative residual below ``residual_tol``.

    Returns
    -------
    c : ndarray
    residual : float
        ``||(G + shift I) c - Y|| / ||Y||``.
    """
    A = G + shift * np.eye(G.shape[0])
    tr = max(float(np.trace(A)), np.finfo(float).tiny)
    factor = None
    for jitter in (0.0,) + _JITTER_LADDER:
        try:
            factor = la.cho_factor(A + jitter * tr * np.eye(A.shape[0]), lower=True, check_finite=False)
            break
        except la.LinAlgError:
            continue
    if factor is None:
        ev = np.linalg.eigvalsh(A)
        cond = np.inf if ev[0] <= 0 else ev[-1] / ev[0]
        raise ConditioningError(
            f"Cholesky factorization failed after jitter escalation (condition ~ {cond:.3g})",
            condition=cond,
        )
    c = la.cho_solve(factor, Y, check_finite=False)
    ynorm = np.linalg.norm(Y)
    if ynorm == 0:
        return np.zeros_like(c), 0.0
    res = np.linalg.norm(A @ c - Y) / ynorm
    if res > residual_tol * 1e-2:
        # refine with residuals accumulated in extended precision
        A_ext, Y_ext = A.astype(np.longdouble), Y.astype(np.longdouble)

        def ext_residual(c):
            r = Y_ext - A_ext @ c.astype(np.longdouble)
            return r.astype(float), float(np.linalg.norm(r.astype(float)) / ynorm)

        r, res = ext_residual(c)
        for _ in range(5):
            if res <= residual_tol * 1e-2:
                break
            c_new = c + la.cho_solve(factor, r, check_finite=False)
            r_new, res_new = ext_residual(c_new)
            if res_new >= res:
                break
            c, r, res = c_new, r_new, res_new
    if res > residual_tol:
        raise ConditioningError(
            f"representer system solved only to relative residual {res:.3g}",
            condition=float(np.linalg.cond(A)),
        )
    return c, float(res)


def fit_rn(kernel, data, gamma, check_psd=True, residual_tol=RESIDUAL_TOL):
    """Fit a regularization network.

    Parameters
    ----------
    kernel : Kernel
    data : Dataset
    gamma : float
        Regularization parameter (> 0).
    check_psd : bool
        Verify the Gram matrix with :func:`~rkhsid.kernels.psd_check` first.
        This costs one symmetric eigendecomposition.

    Returns
    -------
    RNModel
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    if not isinstance(data, Dataset):
        raise TypeError("fit_rn expects a Dataset")
    X = data.locations
    kernel.check(X, data.kind)
    G = kernel.gram(X)
    if check_psd:
        rep = psd_check(G)
        if not rep.ok:
            raise ValueError(f"Gram matrix is not PSD (min eigenvalue {rep.min_eigenvalue:.3g})")
    N = X.shape[0]
    c, res = solve_regularized(G, data.outputs, gamma * N, residual_tol)
    return RNModel(kernel, X, c, float(gamma), G, res)


def predict(model, x):
    """Network output ``sum_i c_i k(x_i, x)`` at one or several locations."""
    single = isinstance(x, InputLocation) or (isinstance(x, np.ndarray) and x.ndim == 1)
    X, kind = (x.locations, x.kind) if isinstance(x, Dataset) else _stack(x)
    model.kernel.check(X, kind)
    if X.shape[1] != model.locations.shape[1]:
        raise KindMismatchError(
            f"query locations have length {X.shape[1]}, training locations {model.locations.shape[1]}"
        )
    out = model.kernel.cross(X, model.locations) @ model.coefficients
    return float(out[0]) if single else out


def rkhs_norm_squared(model):
    """``c^T K c``, the squared RKHS norm of the fitted function."""
    G = model.gram if model.gram is not None else model.kernel.gram(model.locations)
    return float(model.coefficients @ G @ model.coefficients)


def fit_fir_regularized(Phi, Y, K, gamma):
    """Regularized FIR estimate ``argmin ||Y - Phi theta||^2 + gamma theta^T K^{-1} theta``.

    Solved in the primal: with ``K = L L^T`` and ``theta = L b`` the problem
    becomes a ridge regression in ``b``, solved as a stacked least-squares
    problem so ``K^{-1}`` is never formed.  ``gamma = 0`` gives ordinary
    least squares.
    """
    Phi = np.asarray(Phi, dtype=float)
    Y = np.asarray(Y, dtype=float).reshape(-1)
    K = K.matrix(Phi.shape[1]) if isinstance(K, IRKernel) else np.asarray(K, dtype=float)
    m = Phi.shape[1]
    if K.shape != (m, m) or Phi.shape[0] != Y.size:
        raise ValueError("inconsistent dimensions")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    try:
        L = la.cholesky(K, lower=True)
    except la.LinAlgError:
        L = None
    if L is None or np.min(np.abs(np.diag(L))) <= 1e-10 * np.sqrt(np.abs(np.diag(K)).max()):
        ev = np.linalg.eigvalsh(K)
        rank = int(np.sum(ev > m * np.finfo(float).eps * max(ev.max(), 1e-300)))
        raise RankError(f"kernel matrix is rank deficient: rank {rank} < dimension {m}", rank=rank, dim=m)
    A = np.vstack([Phi @ L, np.sqrt(gamma) * np.eye(m)])
    rhs = np.concatenate([Y, np.zeros(m)])
    b = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return L @ b


def _linear_matrix(kernel):
    scale = 1.0
    while isinstance(kernel, Scaled):
        scale *= kernel.scale
        kernel = kernel.kernel
    if isinstance(kernel, (LinearFIR, LinearIIR)):
        return scale * kernel.matrix
    raise UnsupportedExtractionError(
        f"impulse responses can only be extracted from discrete linear kernels, not {kernel.family!r}"
    )


def extract_impulse_response(model, p=None):
    """``theta = sum_i c_i K x_i`` for a linear FIR/IIR model, truncated to ``p`` lags."""
    M = _linear_matrix(model.kernel)
    theta = M @ (model.locations.T @ model.coefficients)
    if p is not None:
        theta = theta[:p] if p <= theta.size else np.concatenate([theta, np.zeros(p - theta.size)])
    return ImpulseEstimate(theta, source=model)


def extract_ir_ct(model, grid=None):
    """Continuous-time estimate ``theta(tau) = sum_i c_i int K(tau, t) x_i(t) dt``.

    The integral uses the kernel's own trapezoidal rule.  Lags outside the
    kernel's support ``[grid.start, grid.stop]`` get zero.
    """
    kernel, scale = model.kernel, 1.0
    while isinstance(kernel, Scaled):
        scale *= kernel.scale
        kernel = kernel.kernel
    if not isinstance(kernel, LinearCT):
        raise UnsupportedExtractionError("extract_ir_ct needs a continuous-time linear kernel")
    kg = kernel.grid
    tau_k = kg.points
    weighted = (model.locations * kg.weights).T @ model.coefficients
    tau = tau_k if grid is None else np.asarray(grid, dtype=float)
    vals = scale * (kernel.generator(tau[:, None], tau_k[None, :]) @ weighted)
    inside = (tau >= kg.start - 1e-12) & (tau <= kg.stop + 1e-12)
    return ImpulseEstimate(np.where(inside, vals, 0.0), grid=tau, source=model)

