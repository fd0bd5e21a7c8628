import json
import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhsid import (
    NSS,
    DiagonalSS,
    ExplicitMatrix,
    Gaussian,
    InputLocation,
    KindMismatchError,
    Laplacian,
    LinearCT,
    LinearFIR,
    LinearIIR,
    Product,
    RankError,
    Scaled,
    StableSplineCT,
    StableSplineDiscrete,
    StructuralError,
    Sum,
    UniformGrid,
    default_truncation,
    evaluate,
    gram,
    kernel_from_dict,
    psd_check,
    quadratic_norm,
)

P = 12
CT_GRID = UniformGrid(stop=4.0, num=P)


def _random_psd(rng, m):
    A = rng.normal(size=(m, m))
    return A @ A.T / m


def make_family(name, rng):
    """One kernel of each family acting on length-``P`` locations."""
    if name == "linear_fir":
        return LinearFIR(_random_psd(rng, P))
    if name == "linear_iir":
        return LinearIIR(StableSplineDiscrete(0.8), truncation=P)
    if name == "linear_ct":
        return LinearCT(StableSplineCT(1.0), CT_GRID)
    if name == "gaussian":
        return Gaussian(float(rng.uniform(0.5, 20.0)))
    if name == "laplacian":
        return Laplacian(float(rng.uniform(0.5, 20.0)))
    if name == "nss":
        return NSS(float(rng.uniform(0.5, 0.95)), float(rng.uniform(0.5, 20.0)), truncation=P)
    if name == "nss_diagonal":
        return NSS(0.8, 3.0, truncation=P, variant="diagonal")
    if name == "sum":
        return Sum(Gaussian(2.0), LinearIIR(StableSplineDiscrete(0.7), truncation=P))
    if name == "product":
        return Product(Laplacian(3.0), LinearIIR(DiagonalSS(0.6), truncation=P))
    raise KeyError(name)


FAMILIES = ["linear_fir", "linear_iir", "linear_ct", "gaussian", "laplacian", "nss", "nss_diagonal", "sum", "product"]


class TestIRKernels:
    def test_stable_spline_entries(self):
        K = StableSplineDiscrete(0.5).matrix(3)
        np.testing.assert_array_equal(K, [[0.5, 0.25, 0.125], [0.25, 0.25, 0.125], [0.125, 0.125, 0.125]])

    def test_diagonal_variant(self):
        np.testing.assert_array_equal(DiagonalSS(0.5).matrix(3), np.diag([0.5, 0.25, 0.125]))

    @pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9])
    def test_closed_form_sums(self, alpha):
        k = StableSplineDiscrete(alpha)
        p = default_truncation(alpha, 1e-16)
        assert np.abs(k.matrix(p)).sum() == pytest.approx(k.abs_sum(), rel=1e-12)
        assert k.abs_tail(10) == pytest.approx(k.abs_sum() - k.matrix(10).sum(), rel=1e-9)

    def test_truncation_rule(self):
        p = default_truncation(0.9)
        assert 0.9**p < 1e-12 <= 0.9 ** (p - 1)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5])
    def test_alpha_range(self, bad):
        with pytest.raises(ValueError):
            StableSplineDiscrete(bad)

    def test_beta_positive(self):
        with pytest.raises(ValueError):
            StableSplineCT(0.0)

    def test_explicit_matrix_asymmetric(self):
        with pytest.raises(StructuralError):
            ExplicitMatrix([[1.0, 2.0], [0.0, 1.0]])


class TestEvaluate:
    def test_gaussian_self(self):
        x = np.array([0.3, -1.0, 2.0])
        assert evaluate(Gaussian(0.7), x, x) == 1.0

    def test_stable_spline_fir(self):
        k = LinearFIR(StableSplineDiscrete(0.5).matrix(3))
        e2, e3 = np.eye(3)[1], np.eye(3)[2]
        assert evaluate(k, e2, e3) == 0.125

    def test_linear_ct_indicator(self):
        grid = UniformGrid(stop=1.0, num=2001)
        k = LinearCT(StableSplineCT(1.0), grid)
        ind = InputLocation(np.ones(grid.num), kind="trajectory", grid=grid.points)
        assert evaluate(k, ind, ind) == pytest.approx(2 - 4 / math.e, abs=1e-6)
        assert 2 - 4 / math.e == pytest.approx(0.52848, abs=1e-5)

    def test_linear_ct_quadrature_order(self):
        vals = []
        for num in (41, 81, 161):
            g = UniformGrid(stop=2.0, num=num)
            x = np.cos(g.points)[None, :]
            vals.append(LinearCT(StableSplineCT(1.0), g).cross(x, x)[0, 0])
        e1, e2 = abs(vals[0] - vals[2]), abs(vals[1] - vals[2])
        assert e2 < e1 / 3  # second-order convergence
        assert e1 < (2.0 / 40) ** 2

    def test_nss_self(self):
        k = NSS(0.8, 2.0, truncation=4)
        x = np.array([1.0, -0.5, 0.2, 0.3])
        assert evaluate(k, x, x) == pytest.approx(x @ k.matrix @ x, rel=1e-14)

    def test_nss_formula(self):
        k = NSS(0.7, 1.5, truncation=3)
        a, x = np.array([0.2, 1.0, -0.4]), np.array([0.5, 0.1, 0.9])
        M = StableSplineDiscrete(0.7).matrix(3)
        ref = (a @ M @ x) * math.exp(-((a - x) @ M @ (a - x)) / 1.5)
        assert evaluate(k, a, x) == pytest.approx(ref, rel=1e-13)

    def test_dimension_mismatch(self):
        with pytest.raises(KindMismatchError):
            evaluate(LinearFIR(np.eye(3)), np.ones(2), np.ones(2))

    def test_kind_mismatch(self):
        traj = InputLocation(np.ones(3), kind="trajectory", grid=[0.0, 1.0, 2.0])
        with pytest.raises(KindMismatchError):
            evaluate(Gaussian(1.0), traj, traj)
        fin = InputLocation(np.ones(3))
        with pytest.raises(KindMismatchError):
            evaluate(Gaussian(1.0), traj, fin)

    def test_incompatible_sum(self):
        with pytest.raises(KindMismatchError):
            Sum(LinearFIR(np.eye(2)), LinearFIR(np.eye(3)))
        with pytest.raises(KindMismatchError):
            Product(LinearCT(StableSplineCT(1.0), CT_GRID), Gaussian(1.0))

    def test_fir_matrix_validation(self):
        with pytest.raises(ValueError):
            LinearFIR([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(StructuralError):
            LinearFIR([[1.0, 0.5], [0.0, 1.0]])


class TestGram:
    def test_single_location(self):
        x = np.array([[0.5, 2.0]])
        np.testing.assert_array_equal(gram(Laplacian(1.0), x), [[1.0]])

    def test_identical_gaussian(self):
        X = np.ones((2, 3))
        np.testing.assert_array_equal(gram(Gaussian(1.0), X), np.ones((2, 2)))

    def test_identity_fir(self):
        Phi = np.random.default_rng(0).normal(size=(6, 4))
        np.testing.assert_allclose(gram(LinearFIR(np.eye(4)), Phi), Phi @ Phi.T, rtol=1e-14)

    def test_location_list(self):
        locs = [InputLocation(v) for v in np.eye(3)]
        np.testing.assert_array_equal(gram(LinearFIR(np.eye(3)), locs), np.eye(3))

    def test_heterogeneous_kinds(self):
        locs = [InputLocation(np.ones(2)), InputLocation(np.ones(2), kind="truncated")]
        with pytest.raises(KindMismatchError):
            gram(Gaussian(1.0), locs)

    def test_empty(self):
        with pytest.raises(ValueError):
            gram(Gaussian(1.0), np.empty((0, 3)))

    def test_exactly_symmetric(self):
        X = np.random.default_rng(1).normal(size=(25, P))
        for name in FAMILIES:
            G = gram(make_family(name, np.random.default_rng(2)), X)
            assert np.array_equal(G, G.T), name


class TestPSDCheck:
    def test_identity(self):
        rep = psd_check(np.eye(4))
        assert rep.ok and rep.min_eigenvalue == pytest.approx(1.0)

    def test_indefinite(self):
        rep = psd_check(np.array([[1.0, 2.0], [2.0, 1.0]]))
        assert not rep.ok
        assert rep.min_eigenvalue == pytest.approx(-1.0)

    def test_asymmetric(self):
        with pytest.raises(StructuralError):
            psd_check(np.array([[1.0, 0.1], [0.0, 1.0]]))


class TestQuadraticNorm:
    def test_identity(self):
        assert quadratic_norm(np.eye(2), [3.0, 4.0]) == pytest.approx(25.0)

    def test_diagonal(self):
        zeta = np.array([2.0, 0.5, 0.1])
        c = np.array([1.0, -3.0, 2.0])
        assert quadratic_norm(np.diag(zeta), zeta * c) == pytest.approx(np.sum(c**2 * zeta))

    def test_zero(self):
        assert quadratic_norm(StableSplineDiscrete(0.5), np.zeros(5)) == 0.0

    def test_leading_block(self):
        K = StableSplineDiscrete(0.5)
        theta = np.array([1.0, 0.5, 0.25])
        ref = theta @ np.linalg.solve(K.matrix(3), theta)
        assert quadratic_norm(K, theta) == pytest.approx(ref, rel=1e-12)

    def test_singular(self):
        with pytest.raises(RankError) as exc:
            quadratic_norm(np.ones((3, 3)), [1.0, 1.0, 1.0])
        assert exc.value.rank == 1 and exc.value.dim == 3


class TestSerialization:
    @pytest.mark.parametrize("name", FAMILIES)
    def test_round_trip(self, name):
        k = make_family(name, np.random.default_rng(3))
        k2 = kernel_from_dict(json.loads(json.dumps(k.to_dict())))
        X = np.random.default_rng(4).normal(size=(5, P))
        np.testing.assert_array_equal(k.gram(X), k2.gram(X))

    def test_interface_form(self):
        k = kernel_from_dict({"family": "nss", "alpha": 0.9, "eta": 1.0, "truncation": 200})
        assert k.dim == 200

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            kernel_from_dict({"family": "spline"})


# Property suites ---------------------------------------------------------------
seeds = st.integers(0, 2**32 - 1)


class TestProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from(FAMILIES), seeds)
    def test_symmetry(self, name, seed):
        rng = np.random.default_rng(seed)
        k = make_family(name, rng)
        a, x = rng.normal(size=P), rng.normal(size=P)
        kax, kxa = evaluate(k, a, x), evaluate(k, x, a)
        assert abs(kax - kxa) <= 1e-12 * max(abs(kax), 1e-300)

    @pytest.mark.parametrize("name", FAMILIES)
    def test_psd_on_random_sets(self, name):
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        for _ in range(20):
            k = make_family(name, rng)
            X = rng.normal(scale=rng.uniform(0.2, 3.0), size=(int(rng.integers(1, 31)), P))
            assert psd_check(gram(k, X), tol=1e-8).ok

    @settings(max_examples=30, deadline=None)
    @given(st.sampled_from(FAMILIES), st.sampled_from(FAMILIES), seeds)
    def test_composition(self, n1, n2, seed):
        rng = np.random.default_rng(seed)
        k1, k2 = make_family(n1, rng), make_family(n2, rng)
        try:
            s, p = Sum(k1, k2), Product(k1, k2)
        except KindMismatchError:
            return
        X = rng.normal(size=(8, P))
        np.testing.assert_array_equal(gram(s, X), gram(k1, X) + gram(k2, X))
        np.testing.assert_array_equal(gram(p, X), gram(k1, X) * gram(k2, X))

    def test_operators(self):
        k1, k2 = Gaussian(1.0), Laplacian(2.0)
        assert isinstance(k1 + k2, Sum) and isinstance(k1 * k2, Product)
        assert isinstance(3.0 * k1, Scaled)
        X = np.random.default_rng(0).normal(size=(4, 3))
        np.testing.assert_array_equal((3.0 * k1).gram(X), 3.0 * k1.gram(X))

    @settings(max_examples=40, deadline=None)
    @given(seeds, st.floats(1.01, 20.0), st.sampled_from(["full", "diagonal"]))
    def test_nss_diagonal_growth(self, seed, c, variant):
        rng = np.random.default_rng(seed)
        k = NSS(float(rng.uniform(0.3, 0.95)), float(rng.uniform(0.1, 10.0)), truncation=P, variant=variant)
        x0 = rng.normal(size=P)
        assert evaluate(k, c * x0, c * x0) == pytest.approx(c**2 * evaluate(k, x0, x0), rel=1e-12)
