"""Kernels over input locations of dynamic systems.

Two layers live here:

* impulse-response kernels (``IR*`` / stable spline classes) define a kernel
  ``K`` over lags, either as an (infinite) matrix indexed by ``1, 2, ...`` or
  as a function of two continuous lags;
* location kernels (:class:`Kernel` subclasses) act on input locations and
  are what the regularization network sees.  Linear location kernels are
  built from an impulse-response kernel, ``k(a, x) = a^T K x``.

Locations are passed as 2-d arrays with one location per row.
"""

import math
from dataclasses import dataclass
from typing import Callable, ClassVar

import numpy as np
from scipy import linalg as la

from ._errors import KindMismatchError, RankError, StructuralError
from .signals import InputLocation

__all__ = [
    "IRKernel",
    "StableSplineDiscrete",
    "DiagonalSS",
    "StableSplineCT",
    "ExplicitMatrix",
    "GaussianIR",
    "LaplacianIR",
    "FunctionIR",
    "Kernel",
    "LinearFIR",
    "LinearIIR",
    "LinearCT",
    "Gaussian",
    "Laplacian",
    "NSS",
    "Sum",
    "Product",
    "Scaled",
    "UniformGrid",
    "default_truncation",
    "evaluate",
    "gram",
    "psd_check",
    "PSDReport",
    "quadratic_norm",
    "kernel_from_dict",
    "ir_kernel_from_dict",
]

TRUNCATION_TOL = 1e-12


def default_truncation(alpha, tol=TRUNCATION_TOL):
    """Smallest ``p`` with ``alpha**p < tol``."""
    return int(math.floor(math.log(tol) / math.log(alpha))) + 1


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _check_positive(name, value):
    if not value > 0:
        raise ValueError(f"{name} must be strictly positive, got {value}")


# Impulse-response kernels -------------------------------------------------------
class IRKernel:
    """Kernel over lags.  Discrete families index lags from 1."""

    family: ClassVar[str]
    #: True / False when the sign of every entry is known analytically.
    nonnegative: ClassVar[bool | None] = None
    #: True for kernels of the form h(|i - j|).
    stationary: ClassVar[bool] = False

    def entry(self, i, j):
        raise NotImplementedError

    def matrix(self, p):
        idx = np.arange(1, p + 1, dtype=float)
        return self.entry(idx[:, None], idx[None, :])

    def __call__(self, t, s):
        """Continuous-lag evaluation (same formula as :meth:`entry`)."""
        return self.entry(np.asarray(t, float), np.asarray(s, float))

    def abs_sum(self):
        """Closed-form ``sum_{i,j>=1} |K(i,j)|`` or ``None``."""
        return None

    def abs_tail(self, P):
        """Closed-form ``sum |K(i,j)|`` over pairs with ``max(i,j) > P`` or ``None``."""
        return None

    def abs_integral(self, T=math.inf):
        """Closed-form ``int int_{[0,T]^2} |K(t,s)|`` or ``None``."""
        return None

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class StableSplineDiscrete(IRKernel):
    """``K(i, j) = alpha ** max(i, j)``."""

    alpha: float
    family: ClassVar[str] = "stable_spline"
    nonnegative: ClassVar[bool] = True

    def __post_init__(self):
        _check_alpha(self.alpha)

    def entry(self, i, j):
        return self.alpha ** np.maximum(i, j)

    def abs_sum(self):
        a = self.alpha
        return a * (1 + a) / (1 - a) ** 2

    def abs_tail(self, P):
        # sum_{k>P} (2k - 1) a^k
        a = self.alpha
        aP1 = a ** (P + 1)
        return 2 * aP1 * (P + 1 - P * a) / (1 - a) ** 2 - aP1 / (1 - a)

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha}


@dataclass(frozen=True)
class DiagonalSS(IRKernel):
    """Diagonal stable spline variant ``K(i, i) = alpha ** i``."""

    alpha: float
    family: ClassVar[str] = "diagonal_ss"
    nonnegative: ClassVar[bool] = True

    def __post_init__(self):
        _check_alpha(self.alpha)

    def entry(self, i, j):
        i, j = np.broadcast_arrays(i, j)
        return np.where(i == j, self.alpha ** np.asarray(i, float), 0.0)

    def matrix(self, p):
        return np.diag(self.alpha ** np.arange(1, p + 1, dtype=float))

    def abs_sum(self):
        return self.alpha / (1 - self.alpha)

    def abs_tail(self, P):
        return self.alpha ** (P + 1) / (1 - self.alpha)

    def to_dict(self):
        return {"family": self.family, "alpha": self.alpha}


@dataclass(frozen=True)
class StableSplineCT(IRKernel):
    """Continuous-time stable spline ``K(t, s) = exp(-beta max(t, s))``."""

    beta: float
    family: ClassVar[str] = "stable_spline_ct"
    nonnegative: ClassVar[bool] = True

    def __post_init__(self):
        _check_positive("beta", self.beta)

    def entry(self, t, s):
        return np.exp(-self.beta * np.maximum(t, s))

    def abs_integral(self, T=math.inf):
        b = self.beta
        if math.isinf(T):
            return 2.0 / b**2
        return 2.0 * (1.0 - math.exp(-b * T) * (1.0 + b * T)) / b**2

    def to_dict(self):
        return {"family": self.family, "beta": self.beta}


@dataclass(frozen=True, eq=False)
class ExplicitMatrix(IRKernel):
    """A finite symmetric matrix, zero outside its block."""

    K: np.ndarray
    family: ClassVar[str] = "matrix"

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("explicit IR kernel must be a square matrix")
        if not np.allclose(K, K.T, rtol=0, atol=1e-12 * max(1.0, np.abs(K).max())):
            raise StructuralError("explicit IR kernel must be symmetric")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @property
    def nonnegative(self):
        return bool(np.all(self.K >= 0))

    def matrix(self, p):
        n = self.K.shape[0]
        out = np.zeros((p, p))
        q = min(p, n)
        out[:q, :q] = self.K[:q, :q]
        return out

    def entry(self, i, j):
        i, j = np.broadcast_arrays(np.asarray(i, int), np.asarray(j, int))
        n = self.K.shape[0]
        inside = (i >= 1) & (j >= 1) & (i <= n) & (j <= n)
        return np.where(inside, self.K[np.clip(i - 1, 0, n - 1), np.clip(j - 1, 0, n - 1)], 0.0)

    def abs_sum(self):
        return float(np.abs(self.K).sum())

    def abs_tail(self, P):
        return float(np.abs(self.K).sum() - np.abs(self.K[:P, :P]).sum())

    def to_dict(self):
        return {"family": self.family, "K": self.K.tolist()}


@dataclass(frozen=True)
class GaussianIR(IRKernel):
    """Radial ``K(i, j) = exp(-(i - j)^2 / eta)`` used as an impulse-response kernel."""

    eta: float
    family: ClassVar[str] = "gaussian_ir"
    nonnegative: ClassVar[bool] = True
    stationary: ClassVar[bool] = True

    def __post_init__(self):
        _check_positive("eta", self.eta)

    def entry(self, i, j):
        return np.exp(-((np.asarray(i, float) - j) ** 2) / self.eta)

    def to_dict(self):
        return {"family": self.family, "eta": self.eta}


@dataclass(frozen=True)
class LaplacianIR(IRKernel):
    """Radial ``K(i, j) = exp(-|i - j| / eta)``."""

    eta: float
    family: ClassVar[str] = "laplacian_ir"
    nonnegative: ClassVar[bool] = True
    stationary: ClassVar[bool] = True

    def __post_init__(self):
        _check_positive("eta", self.eta)

    def entry(self, i, j):
        return np.exp(-np.abs(np.asarray(i, float) - j) / self.eta)

    def to_dict(self):
        return {"family": self.family, "eta": self.eta}


@dataclass(frozen=True, eq=False)
class FunctionIR(IRKernel):
    """User-supplied entry function ``fn(i, j)``; nothing is known analytically."""

    fn: Callable
    name: str = "function"
    family: ClassVar[str] = "function"

    def entry(self, i, j):
        i, j = np.broadcast_arrays(i, j)
        return np.asarray(self.fn(i, j), dtype=float)

    def to_dict(self):
        raise TypeError("function-defined kernels are not serializable")


_IR_FAMILIES = {
    cls.family: cls
    for cls in (StableSplineDiscrete, DiagonalSS, StableSplineCT, ExplicitMatrix, GaussianIR, LaplacianIR)
}


def ir_kernel_from_dict(d):
    d = dict(d)
    cls = _IR_FAMILIES.get(d.pop("family", None))
    if cls is None:
        raise ValueError(f"unknown impulse-response kernel family in {d}")
    return cls(**d)


# Location kernels ------------------------------------------------------------------
def _as_rows(x):
    if isinstance(x, InputLocation):
        return x.values[None, :], x.kind
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise KindMismatchError(f"locations must be 1-d or 2-d, got shape {arr.shape}")
    return arr, None


def _stack(locations):
    if isinstance(locations, (np.ndarray, InputLocation)):
        return _as_rows(locations)
    if len(locations) and isinstance(locations[0], InputLocation):
        kinds = {loc.kind for loc in locations}
        if len(kinds) > 1:
            raise KindMismatchError(f"heterogeneous location kinds {sorted(kinds)}")
        return np.vstack([loc.values for loc in locations]), kinds.pop()
    return _as_rows(locations)


def _symmetrize_upper(G):
    return np.triu(G) + np.triu(G, 1).T


class Kernel:
    """Base class of kernels over input locations.

    Subclasses implement :meth:`cross`, returning the ``(n, k)`` matrix of
    kernel values between the rows of ``A`` and ``B``.
    """

    family: ClassVar[str]
    #: Location kinds accepted (``None`` means any).
    kinds: ClassVar[tuple | None] = None

    @property
    def dim(self):
        """Required location length, or ``None`` if any length works."""
        return None

    def check(self, X, kind=None):
        if kind is not None and self.kinds is not None and kind not in self.kinds:
            raise KindMismatchError(f"{self.family} kernel does not accept {kind!r} locations")
        if self.dim is not None and X.shape[1] != self.dim:
            raise KindMismatchError(
                f"{self.family} kernel expects locations of length {self.dim}, got {X.shape[1]}"
            )

    def cross(self, A, B):
        raise NotImplementedError

    def diag(self, A):
        return np.array([self.cross(a[None, :], a[None, :])[0, 0] for a in A])

    def gram(self, X):
        return _symmetrize_upper(self.cross(X, X))

    def __call__(self, a, x):
        return evaluate(self, a, x)

    def __add__(self, other):
        return Sum(self, other)

    def __mul__(self, other):
        if isinstance(other, Kernel):
            return Product(self, other)
        return Scaled(self, float(other))

    __rmul__ = __mul__

    def to_dict(self):
        raise NotImplementedError


class _LinearKernel(Kernel):
    """``k(a, x) = a^T K x`` for a symmetric matrix ``K``."""

    @property
    def matrix(self):
        raise NotImplementedError

    @property
    def dim(self):
        return self.matrix.shape[0]

    def cross(self, A, B):
        return (A @ self.matrix) @ B.T

    def diag(self, A):
        return np.einsum("ij,ij->i", A @ self.matrix, A)


@dataclass(frozen=True, eq=False)
class LinearFIR(_LinearKernel):
    """Linear kernel on ``R^m`` with an ``m x m`` PSD matrix."""

    K: np.ndarray
    family: ClassVar[str] = "linear_fir"
    kinds: ClassVar[tuple] = ("finite", "truncated")

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError("FIR kernel matrix must be square")
        scale = max(1.0, np.abs(K).max())
        if np.abs(K - K.T).max() > 1e-12 * scale:
            raise StructuralError("FIR kernel matrix must be symmetric")
        K = (K + K.T) / 2
        lam_min = np.linalg.eigvalsh(K)[0] if K.size else 0.0
        if lam_min < -1e-10 * max(np.trace(K), 1e-300):
            raise ValueError(f"FIR kernel matrix is not PSD (min eigenvalue {lam_min:g})")
        K.setflags(write=False)
        object.__setattr__(self, "K", K)

    @property
    def matrix(self):
        return self.K

    def to_dict(self):
        return {"family": self.family, "K": self.K.tolist()}


@dataclass(frozen=True, eq=False)
class LinearIIR(_LinearKernel):
    """Linear kernel over sequences truncated at ``truncation`` lags."""

    generator: IRKernel
    truncation: int | None = None
    family: ClassVar[str] = "linear_iir"
    kinds: ClassVar[tuple] = ("truncated", "finite")

    def __post_init__(self):
        p = self.truncation
        if p is None:
            alpha = getattr(self.generator, "alpha", None)
            if alpha is None:
                raise ValueError("truncation is required for this generator")
            p = default_truncation(alpha)
        if int(p) < 1:
            raise ValueError("truncation must be positive")
        object.__setattr__(self, "truncation", int(p))
        M = self.generator.matrix(int(p))
        M.setflags(write=False)
        object.__setattr__(self, "_matrix", M)

    @property
    def matrix(self):
        return self._matrix

    def to_dict(self):
        return {"family": self.family, "generator": self.generator.to_dict(), "truncation": self.truncation}


@dataclass(frozen=True)
class UniformGrid:
    """Uniform lag grid ``0 = tau_0 < ... < tau_{n-1} = stop``."""

    stop: float
    num: int
    start: float = 0.0

    def __post_init__(self):
        if self.num < 2 or not self.stop > self.start or self.start < 0:
            raise ValueError("grid needs num >= 2 and 0 <= start < stop")

    @property
    def points(self):
        return np.linspace(self.start, self.stop, self.num)

    @property
    def step(self):
        return (self.stop - self.start) / (self.num - 1)

    @property
    def weights(self):
        """Trapezoidal quadrature weights."""
        w = np.full(self.num, self.step)
        w[[0, -1]] *= 0.5
        return w

    def to_dict(self):
        return {"start": self.start, "stop": self.stop, "num": self.num}


@dataclass(frozen=True, eq=False)
class LinearCT(Kernel):
    """Continuous-time linear kernel ``int int K(t, s) x(t) a(s) dt ds``.

    Locations are past trajectories sampled on ``grid``; the double integral
    is evaluated with the trapezoidal rule, so the kernel acts on the support
    ``[grid.start, grid.stop]`` only.
    """

    generator: IRKernel
    grid: UniformGrid
    family: ClassVar[str] = "linear_ct"
    kinds: ClassVar[tuple] = ("trajectory",)

    def __post_init__(self):
        if isinstance(self.grid, dict):
            object.__setattr__(self, "grid", UniformGrid(**self.grid))
        tau = self.grid.points
        Kg = self.generator(tau[:, None], tau[None, :])
        Kg.setflags(write=False)
        object.__setattr__(self, "_kgrid", Kg)

    @property
    def dim(self):
        return self.grid.num

    @property
    def grid_matrix(self):
        return self._kgrid

    def cross(self, A, B):
        w = self.grid.weights
        return ((A * w) @ self._kgrid) @ (B * w).T

    def diag(self, A):
        Aw = A * self.grid.weights
        return np.einsum("ij,ij->i", Aw @ self._kgrid, Aw)

    def to_dict(self):
        return {"family": self.family, "generator": self.generator.to_dict(), "grid": self.grid.to_dict()}


def _decay(arg):
    """``exp(-arg)`` with results below 1e-150 set to zero.

    Such entries are far below rounding error next to the unit diagonal, and
    leaving them in lets factorizations wander into subnormal arithmetic,
    which is orders of magnitude slower.
    """
    out = np.exp(-arg)
    out[out < 1e-150] = 0.0
    return out


def _sq_dists(A, B):
    d = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * (A @ B.T)
    return np.maximum(d, 0.0)


@dataclass(frozen=True)
class Gaussian(Kernel):
    """``exp(-|x - a|^2 / eta)`` with the squared Euclidean norm."""

    eta: float
    family: ClassVar[str] = "gaussian"
    kinds: ClassVar[tuple] = ("finite", "truncated")

    def __post_init__(self):
        _check_positive("eta", self.eta)

    def cross(self, A, B):
        if A.shape[0] == 1 or B.shape[0] == 1:
            d = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
        else:
            d = _sq_dists(A, B)
        return _decay(d / self.eta)

    def diag(self, A):
        return np.ones(A.shape[0])

    def to_dict(self):
        return {"family": self.family, "eta": self.eta}


@dataclass(frozen=True)
class Laplacian(Kernel):
    """``exp(-|x - a| / eta)`` with the (unsquared) Euclidean norm."""

    eta: float
    family: ClassVar[str] = "laplacian"
    kinds: ClassVar[tuple] = ("finite", "truncated")

    def __post_init__(self):
        _check_positive("eta", self.eta)

    def cross(self, A, B):
        if A.shape[0] == 1 or B.shape[0] == 1:
            d = np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1))
        else:
            d = np.sqrt(_sq_dists(A, B))
        return _decay(d / self.eta)

    def diag(self, A):
        return np.ones(A.shape[0])

    def to_dict(self):
        return {"family": self.family, "eta": self.eta}


@dataclass(frozen=True, eq=False)
class NSS(Kernel):
    """Nonlinear stable spline kernel.

    ``k(a, x) = (a^T K x) * exp(-(a - x)^T K (a - x) / eta)`` where ``K`` is
    the stable spline matrix ``alpha ** max(i, j)`` (or its diagonal variant)
    truncated at ``truncation`` lags.
    """

    alpha: float
    eta: float
    truncation: int | None = None
    variant: str = "full"
    family: ClassVar[str] = "nss"
    kinds: ClassVar[tuple] = ("truncated", "finite")

    def __post_init__(self):
        _check_alpha(self.alpha)
        _check_positive("eta", self.eta)
        if self.variant not in ("full", "diagonal"):
            raise ValueError("variant must be 'full' or 'diagonal'")
        p = default_truncation(self.alpha) if self.truncation is None else int(self.truncation)
        object.__setattr__(self, "truncation", p)
        gen = StableSplineDiscrete(self.alpha) if self.variant == "full" else DiagonalSS(self.alpha)
        M = gen.matrix(p)
        M.setflags(write=False)
        object.__setattr__(self, "_gen", gen)
        object.__setattr__(self, "_matrix", M)

    @property
    def dim(self):
        return self.truncation

    @property
    def ir_kernel(self):
        return self._gen

    @property
    def matrix(self):
        return self._matrix

    def cross(self, A, B):
        AK = A @ self._matrix
        lin = AK @ B.T
        if A.shape[0] == 1 or B.shape[0] == 1:
            D = A[:, None, :] - B[None, :, :]
            dist = np.einsum("ijk,kl,ijl->ij", D, self._matrix, D)
        else:
            qa = np.einsum("ij,ij->i", AK, A)
            qb = np.einsum("ij,ij->i", B @ self._matrix, B)
            dist = np.maximum(qa[:, None] + qb[None, :] - 2.0 * lin, 0.0)
        return lin * _decay(dist / self.eta)

    def diag(self, A):
        return np.einsum("ij,ij->i", A @ self._matrix, A)

    def to_dict(self):
        d = {"family": self.family, "alpha": self.alpha, "eta": self.eta, "truncation": self.truncation}
        if self.variant != "full":
            d["variant"] = self.variant
        return d


def _combined_dim(left, right):
    dl, dr = left.dim, right.dim
    if dl is not None and dr is not None and dl != dr:
        raise KindMismatchError(f"operands expect locations of length {dl} and {dr}")
    return dl if dl is not None else dr


def _combined_kinds(left, right):
    if left.kinds is None:
        return right.kinds
    if right.kinds is None:
        return left.kinds
    common = tuple(k for k in left.kinds if k in right.kinds)
    if not common:
        raise KindMismatchError(f"{left.family} and {right.family} accept no common location kind")
    return common


@dataclass(frozen=True, eq=False)
class Sum(Kernel):
    left: Kernel
    right: Kernel
    family: ClassVar[str] = "sum"

    def __post_init__(self):
        _combined_dim(self.left, self.right)
        _combined_kinds(self.left, self.right)

    @property
    def dim(self):
        return _combined_dim(self.left, self.right)

    @property
    def kinds(self):
        return _combined_kinds(self.left, self.right)

    def cross(self, A, B):
        return self.left.cross(A, B) + self.right.cross(A, B)

    def gram(self, X):
        return self.left.gram(X) + self.right.gram(X)

    def diag(self, A):
        return self.left.diag(A) + self.right.diag(A)

    def to_dict(self):
        return {"family": self.family, "left": self.left.to_dict(), "right": self.right.to_dict()}


@dataclass(frozen=True, eq=False)
class Product(Kernel):
    left: Kernel
    right: Kernel
    family: ClassVar[str] = "product"

    def __post_init__(self):
        _combined_dim(self.left, self.right)
        _combined_kinds(self.left, self.right)

    @property
    def dim(self):
        return _combined_dim(self.left, self.right)

    @property
    def kinds(self):
        return _combined_kinds(self.left, self.right)

    def cross(self, A, B):
        return self.left.cross(A, B) * self.right.cross(A, B)

    def gram(self, X):
        return self.left.gram(X) * self.right.gram(X)

    def diag(self, A):
        return self.left.diag(A) * self.right.diag(A)

    def to_dict(self):
        return {"family": self.family, "left": self.left.to_dict(), "right": self.right.to_dict()}


@dataclass(frozen=True, eq=False)
class Scaled(Kernel):
    """``scale * kernel``; how a marginal-likelihood scale enters the network."""

    kernel: Kernel
    scale: float
    family: ClassVar[str] = "scaled"

    def __post_init__(self):
        _check_positive("scale", self.scale)

    @property
    def dim(self):
        return self.kernel.dim

    @property
    def kinds(self):
        return self.kernel.kinds

    def cross(self, A, B):
        return self.scale * self.kernel.cross(A, B)

    def gram(self, X):
        return self.scale * self.kernel.gram(X)

    def diag(self, A):
        return self.scale * self.kernel.diag(A)

    def to_dict(self):
        return {"family": self.family, "scale": self.scale, "kernel": self.kernel.to_dict()}


def kernel_from_dict(d):
    """Rebuild a location kernel from its JSON form."""
    d = dict(d)
    fam = d.pop("family", None)
    if fam in ("sum", "product"):
        cls = Sum if fam == "sum" else Product
        return cls(kernel_from_dict(d["left"]), kernel_from_dict(d["right"]))
    if fam == "scaled":
        return Scaled(kernel_from_dict(d["kernel"]), float(d["scale"]))
    if fam == "linear_fir":
        return LinearFIR(np.array(d["K"], dtype=float))
    if fam == "linear_iir":
        return LinearIIR(ir_kernel_from_dict(d["generator"]), d.get("truncation"))
    if fam == "linear_ct":
        return LinearCT(ir_kernel_from_dict(d["generator"]), UniformGrid(**d["grid"]))
    if fam == "gaussian":
        return Gaussian(float(d["eta"]))
    if fam == "laplacian":
        return Laplacian(float(d["eta"]))
    if fam == "nss":
        return NSS(float(d["alpha"]), float(d["eta"]), d.get("truncation"), d.get("variant", "full"))
    raise ValueError(f"unknown kernel family {fam!r}")


# Module-level operations -----------------------------------------------------------
def evaluate(kernel, a, x):
    """Kernel value between two single locations."""
    A, ka = _as_rows(a)
    B, kb = _as_rows(x)
    if A.shape[0] != 1 or B.shape[0] != 1:
        raise KindMismatchError("evaluate takes single locations; use gram for batches")
    if ka is not None and kb is not None and ka != kb:
        raise KindMismatchError(f"cannot mix {ka!r} and {kb!r} locations")
    kernel.check(A, ka)
    kernel.check(B, kb)
    return float(kernel.cross(A, B)[0, 0])


def gram(kernel, locations):
    """Gram matrix ``G[i, j] = k(x_i, x_j)`` (exactly symmetric)."""
    X, kind = _stack(locations)
    if X.shape[0] == 0:
        raise ValueError("gram needs at least one location")
    kernel.check(X, kind)
    return kernel.gram(X)


@dataclass(frozen=True)
class PSDReport:
    ok: bool
    min_eigenvalue: float
    trace: float
    tol: float

    def __bool__(self):
        return self.ok


def psd_check(g, tol=1e-8):
    """Check ``lambda_min(g) >= -tol * trace(g)`` with a symmetric eigensolver."""
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise StructuralError("Gram matrix must be square")
    if np.abs(g - g.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(g).max(initial=0.0)):
        raise StructuralError("Gram matrix is not symmetric")
    lam_min = float(la.eigvalsh(g, subset_by_index=[0, 0])[0])
    tr = float(np.trace(g))
    return PSDReport(lam_min >= -tol * abs(tr), lam_min, tr, tol)


def quadratic_norm(K, theta):
    """``theta^T K^{-1} theta`` through a Cholesky factorization of ``K``.

    ``K`` is a matrix or an :class:`IRKernel`; only its leading
    ``len(theta)`` block is used.
    """
    theta = np.asarray(theta, dtype=float).reshape(-1)
    p = theta.size
    M = K.matrix(p) if isinstance(K, IRKernel) else np.asarray(K, dtype=float)[:p, :p]
    if M.shape != (p, p):
        raise ValueError(f"kernel block must be {p} x {p}, got {M.shape}")
    try:
        c, low = la.cho_factor(M, lower=True)
        ok = np.all(np.abs(np.diag(c)) > np.sqrt(np.finfo(float).eps) * np.sqrt(np.abs(np.diag(M)).max()))
    except la.LinAlgError:
        ok = False
    if not ok:
        ev = np.linalg.eigvalsh(M)
        rank = int(np.sum(ev > p * np.finfo(float).eps * max(ev.max(), 1e-300)))
        raise RankError(f"kernel block is rank deficient: rank {rank} < dimension {p}", rank=rank, dim=p)
    z = la.solve_triangular(c, theta, lower=True)
    return float(z @ z)
