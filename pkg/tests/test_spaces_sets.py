import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from augvi.errors import DimensionError, InvalidParameterError, UnsupportedError
from augvi.sets import (
    Ball,
    Box,
    FullSpace,
    NonnegativeCone,
    NonpositiveCone,
    Product,
    RecessionProbe,
    ZeroSet,
    distance,
    moreau_check,
    polar_residual,
    project,
)
from augvi.spaces import LUMPED_L2, OPERATOR, DiscreteSpace

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@st.composite
def boxes(draw, dim):
    a = draw(arrays(float, dim, elements=finite))
    b = draw(arrays(float, dim, elements=finite))
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    # some bounds infinite
    lo = np.where(draw(arrays(bool, dim)), -np.inf, lo)
    hi = np.where(draw(arrays(bool, dim)), np.inf, hi)
    return Box(lo, hi)


@st.composite
def set_and_space(draw):
    dim = draw(st.integers(1, 8))
    w = draw(arrays(float, dim, elements=st.floats(0.01, 10.0)))
    space = DiscreteSpace(weights=w)
    kind = draw(st.sampled_from(["box", "nonneg", "nonpos", "zero", "full", "ball", "product"]))
    if kind == "box":
        K = draw(boxes(dim))
    elif kind == "nonneg":
        K = NonnegativeCone(dim)
    elif kind == "nonpos":
        K = NonpositiveCone(dim)
    elif kind == "zero":
        K = ZeroSet(dim)
    elif kind == "full":
        K = FullSpace(dim)
    elif kind == "ball":
        c = draw(arrays(float, dim, elements=st.floats(-5, 5)))
        K = Ball(c, draw(st.floats(0.1, 10.0)), space)
    else:
        k = draw(st.integers(0, dim))
        parts = [p for p in (Box(-np.ones(k), np.ones(k)) if k else None, NonnegativeCone(dim - k) if dim - k else None) if p]
        K = Product(parts)
    return K, space


vectors = st.integers(0, 2**32 - 1)


class TestDiscreteSpace:
    def test_weights_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            DiscreteSpace(weights=[1.0, 0.0])
        with pytest.raises(InvalidParameterError):
            DiscreteSpace(weights=[])

    def test_exactly_one_metric(self):
        with pytest.raises(InvalidParameterError):
            DiscreteSpace()
        with pytest.raises(InvalidParameterError):
            DiscreteSpace(weights=[1.0], gram=np.eye(1))

    def test_gram_must_be_symmetric(self):
        with pytest.raises(InvalidParameterError):
            DiscreteSpace(gram=np.array([[2.0, 1.0], [0.0, 2.0]]))

    def test_metric_kinds(self):
        assert DiscreteSpace.euclidean(3).metric_kind == LUMPED_L2
        assert DiscreteSpace(gram=sp.identity(3)).metric_kind == OPERATOR

    def test_dimension_check(self):
        with pytest.raises(DimensionError):
            DiscreteSpace.euclidean(3).check(np.ones(4))

    @given(st.integers(0, 10_000))
    def test_symmetric_and_positive(self, seed):
        rng = np.random.default_rng(seed)
        n = 6
        M = rng.standard_normal((n, n))
        for space in (DiscreteSpace(weights=rng.uniform(0.1, 2, n)), DiscreteSpace(gram=M @ M.T + np.eye(n))):
            u, v = rng.standard_normal(n), rng.standard_normal(n)
            assert abs(space.inner(u, v) - space.inner(v, u)) <= 1e-12 * (1 + abs(space.inner(u, v)))
            assert space.norm(u) > 0

    def test_riesz_inverts_gram(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((5, 5))
        space = DiscreteSpace(gram=M @ M.T + np.eye(5))
        c = rng.standard_normal(5)
        np.testing.assert_allclose(space.apply_gram(space.riesz(c)), c, atol=1e-12)

    def test_product_keeps_blocks(self):
        a, b = DiscreteSpace.uniform(2, 0.5), DiscreteSpace(gram=2 * np.eye(3))
        prod = DiscreteSpace.product(a, b)
        assert not prod.is_diagonal
        assert prod.subspace(slice(0, 2)) is a
        assert prod.subspace(slice(2, 5)) is b
        np.testing.assert_allclose(prod.norm(np.ones(5)), np.sqrt(0.5 * 2 + 2 * 3))


class TestProjectExamples:
    def test_box_clamp(self):
        np.testing.assert_allclose(project(Box([-0.5], [0.5]), np.array([0.7])), [0.5])

    @pytest.mark.parametrize("k", [1, 2, 5, 10])
    def test_cone_projection_of_counterexample_argument(self, k):
        m = 10
        e = np.zeros(m)
        e[k - 1] = 1.0
        y = (1.0 / k**2 - 1.0) * e
        np.testing.assert_array_equal(project(NonnegativeCone(m), y), np.zeros(m))

    def test_ball_radial(self):
        y = np.array([2.0, 0.0, 0.0])
        K = Ball.centered(1.0, DiscreteSpace.euclidean(3))
        np.testing.assert_allclose(project(K, y), y / 2)

    def test_zero_and_full(self):
        y = np.array([1.0, -2.0])
        np.testing.assert_array_equal(ZeroSet(2).project(y), 0.0)
        np.testing.assert_array_equal(FullSpace(2).project(y), y)

    def test_product_recursive(self):
        K = Product([Box([-1.0], [1.0]), NonnegativeCone(2)])
        np.testing.assert_allclose(K.project(np.array([3.0, -1.0, 2.0])), [1.0, 0.0, 2.0])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            project(NonnegativeCone(3), np.ones(2))

    def test_box_with_operator_metric_unsupported(self):
        space = DiscreteSpace(gram=np.array([[2.0, 1.0], [1.0, 2.0]]))
        with pytest.raises(UnsupportedError):
            Box.uniform(2, -1, 1).project(np.ones(2), space)

    def test_ball_in_operator_metric(self):
        G = np.array([[2.0, 1.0], [1.0, 2.0]])
        space = DiscreteSpace(gram=G)
        K = Ball.centered(1.0, space)
        p = K.project(np.array([3.0, 0.0]))
        np.testing.assert_allclose(space.norm(p), 1.0)

    def test_invalid_box(self):
        with pytest.raises(InvalidParameterError):
            Box([1.0], [0.0])
        with pytest.raises(InvalidParameterError):
            Box([np.inf], [np.inf])


class TestDistanceExamples:
    def test_feasible_point(self):
        assert distance(Box.uniform(3, -1, 1), np.zeros(3)) == 0.0

    @pytest.mark.parametrize("n", [1, 4, 25])
    def test_lumped_weights(self, n):
        space = DiscreteSpace.uniform(n, 1.0 / n)
        d = distance(Box.uniform(n, -0.5, 0.5), 0.7 * np.ones(n), space)
        np.testing.assert_allclose(d, 0.2, rtol=1e-14)

    @pytest.mark.parametrize("k", range(1, 8))
    def test_cone_unit_weights(self, k):
        y = np.zeros(8)
        y[k - 1] = -1.0 / k**2
        np.testing.assert_allclose(distance(NonnegativeCone(8), y), k**-2.0, rtol=1e-15)

    def test_ball_distance(self):
        K = Ball.centered(1.0, DiscreteSpace.euclidean(2))
        np.testing.assert_allclose(K.distance(np.array([3.0, 4.0])), 4.0)


class TestProjectionProperties:
    @settings(max_examples=300, deadline=None)
    @given(set_and_space(), vectors)
    def test_idempotent_and_nonexpansive(self, Ks, seed):
        K, space = Ks
        rng = np.random.default_rng(seed)
        y = 10 * rng.standard_normal(K.dim)
        z = 10 * rng.standard_normal(K.dim)
        py, pz = K.project(y, space), K.project(z, space)
        np.testing.assert_allclose(K.project(py, space), py, atol=1e-12 * (1 + np.abs(py).max()))
        assert space.norm(py - pz) <= space.norm(y - z) * (1 + 1e-12) + 1e-12
        # y -> y - P_K(y + l) is nonexpansive too
        lam = rng.standard_normal(K.dim)
        ry = y - K.project(y + lam, space)
        rz = z - K.project(z + lam, space)
        assert space.norm(ry - rz) <= space.norm(y - z) * (1 + 1e-12) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(set_and_space(), vectors)
    def test_variational_characterization(self, Ks, seed):
        K, space = Ks
        rng = np.random.default_rng(seed)
        y = 10 * rng.standard_normal(K.dim)
        p = K.project(y, space)
        scale = 1 + space.norm(y) ** 2
        for _ in range(10):
            z = K.sample(rng, scale=10.0)
            assert space.inner(y - p, z - p) <= 1e-9 * scale

    @settings(max_examples=200, deadline=None)
    @given(set_and_space(), vectors)
    def test_distance_zero_iff_member(self, Ks, seed):
        K, space = Ks
        rng = np.random.default_rng(seed)
        z = K.sample(rng)
        assert K.distance(z, space) <= 1e-12 * (1 + space.norm(z))
        y = 10 * rng.standard_normal(K.dim)
        np.testing.assert_allclose(K.distance(y, space), space.norm(y - K.project(y, space)), atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(set_and_space(), vectors)
    def test_distance_decreasing_along_recession_cone(self, Ks, seed):
        K, space = Ks
        rng = np.random.default_rng(seed)
        probe = RecessionProbe.of(K)
        y = 5 * rng.standard_normal(K.dim)
        for d in probe.directions:
            for t in (0.1, 1.0, 10.0):
                assert K.distance(y + t * d, space) <= K.distance(y, space) + 1e-12


class TestRecessionProbe:
    def test_box_directions(self):
        K = Box([-np.inf, 0.0, 0.0], [0.0, np.inf, 1.0])
        probe = RecessionProbe.of(K)
        D = probe.directions
        assert sorted(map(tuple, D)) == [(-1.0, 0.0, 0.0), (0.0, 1.0, 0.0)]
        assert probe.verify(K, np.random.default_rng(0))

    def test_bounded_sets_have_empty_probe(self):
        assert len(RecessionProbe.of(Box.uniform(3, -1, 1))) == 0
        assert len(RecessionProbe.of(ZeroSet(3))) == 0
        assert len(RecessionProbe.of(Ball.centered(1.0, DiscreteSpace.euclidean(3)))) == 0

    def test_product_offsets(self):
        K = Product([Box.uniform(2, -1, 1), NonnegativeCone(2)])
        probe = RecessionProbe.of(K)
        np.testing.assert_array_equal(probe.indices, [2, 3])
        assert probe.verify(K, np.random.default_rng(1))


class TestPolarResidual:
    @given(arrays(float, 6, elements=finite))
    def test_nonnegative_cone(self, y):
        assert polar_residual(NonnegativeCone(6), y) <= 1e-10

    def test_bounded_box_is_zero(self):
        assert polar_residual(Box.uniform(3, -1, 1), np.array([5.0, -5.0, 0.0])) == 0.0

    @pytest.mark.parametrize("seed", range(100))
    def test_product_random(self, seed):
        rng = np.random.default_rng(seed)
        K = Product([Box([-1.0, -np.inf], [np.inf, 2.0]), NonnegativeCone(3)])
        space = DiscreteSpace(weights=rng.uniform(0.1, 3, 5))
        assert polar_residual(K, 10 * rng.standard_normal(5), space=space) <= 1e-10


class TestMoreau:
    def test_examples(self):
        K = NonnegativeCone(2)
        assert moreau_check(K, np.array([1.0, -1.0])) == 0.0
        assert moreau_check(K, np.zeros(2)) == 0.0

    @pytest.mark.parametrize("seed", range(100))
    def test_zero_times_cone_against_independent_polar(self, seed):
        rng = np.random.default_rng(seed)
        K = Product([ZeroSet(1), NonnegativeCone(3)])
        y = rng.standard_normal(4)
        assert moreau_check(K, y) <= 1e-12
        # polar of {0} x R^3_+ is R x R^3_-
        polar = Box([-np.inf] * 4, [np.inf, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(K.polar().project(y), polar.project(y), atol=0)

    def test_non_cone_rejected(self):
        with pytest.raises(UnsupportedError):
            moreau_check(Box.uniform(2, -1, 1), np.zeros(2))
        with pytest.raises(UnsupportedError):
            moreau_check(Ball.centered(1.0, DiscreteSpace.euclidean(2)), np.zeros(2))

    def test_cone_detection(self):
        assert NonpositiveCone(2).is_cone and ZeroSet(2).is_cone and FullSpace(2).is_cone
        assert not Box.uniform(2, -1, 1).is_cone


class TestProjectionDerivative:
    def test_box_kinks_count_as_clamped(self):
        D = Box.uniform(3, -1, 1).derivative(np.array([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(D.diag, [0.0, 1.0, 0.0])
        assert D.clamped == 2

    def test_ball_derivative_matches_difference_quotient(self):
        space = DiscreteSpace(weights=[1.0, 2.0, 0.5])
        K = Ball.centered(1.0, space)
        y = np.array([2.0, 1.0, -1.0])
        v = np.array([0.3, -0.2, 0.5])
        h = 1e-6
        fd = (K.project(y + h * v) - K.project(y - h * v)) / (2 * h)
        np.testing.assert_allclose(K.derivative(y).apply(v), fd, atol=1e-8)
