import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from elweight.constraints import KnownComponentwiseMedians
from elweight.errors import DegenerateSample, NonConvergence, WeightMismatch
from elweight.spatial import (
    MedianConfig,
    depth,
    el_weighted_median_pipeline,
    sign_hessian,
    spatial_sign,
    weighted_spatial_median,
)
from oracles import grid_fermat_weber

SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def test_spatial_sign():
    np.testing.assert_allclose(spatial_sign([3.0, 4.0]), [0.6, 0.8])
    np.testing.assert_array_equal(spatial_sign([0.0, 0.0]), [0.0, 0.0])
    rng = np.random.default_rng(0)
    for x in rng.normal(size=(20, 3)):
        assert np.linalg.norm(spatial_sign(x)) == pytest.approx(1.0)


def test_sign_hessian():
    np.testing.assert_allclose(sign_hessian([1.0, 0.0]), [[0.0, 0.0], [0.0, 1.0]])
    np.testing.assert_array_equal(sign_hessian([0.0, 0.0]), np.zeros((2, 2)))
    rng = np.random.default_rng(1)
    for x in rng.normal(size=(20, 3)) * 3:
        h = sign_hessian(x)
        np.testing.assert_allclose(h @ x, 0.0, atol=1e-12)
        np.testing.assert_allclose(h, h.T)
        assert np.linalg.eigvalsh(h).min() >= -1e-12
        step = 1e-6 * np.linalg.norm(x)
        fd = np.column_stack(
            [(spatial_sign(x + step * e) - spatial_sign(x - step * e)) / (2 * step) for e in np.eye(3)]
        )
        np.testing.assert_allclose(fd, h, atol=1e-5 * np.abs(h).max())


def test_depth_examples():
    cross = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    assert depth(cross, [0.0, 0.0]).depth_value == pytest.approx(1.0)
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(30, 2))
    far = 1e6 * pts.std() * np.array([0.6, 0.8])
    assert depth(pts, far).depth_value < 0.01
    assert depth(np.array([[1.0, 2.0]]), [0.0, 0.0]).depth_value == pytest.approx(0.0, abs=1e-15)


def test_depth_weight_validation():
    with pytest.raises(WeightMismatch):
        depth(SQUARE, [0.5, 0.5], weights=[0.5, 0.5])
    with pytest.raises(WeightMismatch):
        depth(SQUARE, [0.5, 0.5], weights=[0.3, 0.3, 0.3, 0.3])
    with pytest.raises(WeightMismatch):
        depth(SQUARE, [0.5, 0.5], weights=[1.0, 0.5, -0.25, -0.25])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 40))
def test_depth_bounds(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.standard_cauchy(size=(n, 2))
    w = rng.uniform(0.1, 1.0, size=n)
    w /= w.sum()
    for x in rng.normal(size=(5, 2)) * 5:
        assert 0.0 <= depth(pts, x, w).depth_value <= 1.0
    # a sample point itself contributes a zero sign
    assert 0.0 <= depth(pts, pts[0], w).depth_value <= 1.0


def test_unit_square_median():
    res = weighted_spatial_median(SQUARE)
    np.testing.assert_allclose(res.median, [0.5, 0.5], atol=1e-8)
    assert res.gradient_norm <= 1e-9


def test_fermat_point_matches_grid():
    res = weighted_spatial_median(TRIANGLE)
    np.testing.assert_allclose(res.median, grid_fermat_weber(TRIANGLE), atol=1e-2)


def test_dominant_weight():
    w = np.array([0.98, 0.01, 0.01])
    res = weighted_spatial_median(TRIANGLE, w)
    ref = grid_fermat_weber(TRIANGLE, w)
    np.testing.assert_allclose(res.median, ref, atol=1e-2)
    assert np.linalg.norm(res.median - TRIANGLE[0]) <= 0.05


def test_degenerate_inputs():
    with pytest.raises(DegenerateSample):
        weighted_spatial_median(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]))
    with pytest.raises(DegenerateSample):
        weighted_spatial_median(np.array([[1.0], [2.0], [3.0]]))
    with pytest.raises(NonConvergence):
        weighted_spatial_median(np.random.default_rng(0).normal(size=(50, 2)), max_iter=1)


def test_descent_invariant_random_runs():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(5, 120))
        pts = rng.standard_t(2, size=(n, int(rng.integers(2, 4))))
        w = rng.uniform(0.05, 1, size=n)
        res = weighted_spatial_median(pts, w / w.sum(), max_iter=5000)
        trace = np.array(res.objective_trace)
        assert np.all(np.diff(trace) <= 1e-12 * max(1.0, trace[0]))


def test_plugin_matrices():
    rng = np.random.default_rng(4)
    pts = rng.standard_cauchy(size=(200, 3))
    res = weighted_spatial_median(pts)
    J, K = res.J_hat, res.K_hat
    np.testing.assert_allclose(J, J.T, atol=1e-12)
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    assert np.trace(J) <= 1 + 1e-12
    eig = np.linalg.eigvalsh(J)
    assert eig.min() >= -1e-12 and eig.max() <= 1 + 1e-12
    assert np.linalg.eigvalsh(K).min() > 0


def test_translation_equivariance():
    rng = np.random.default_rng(5)
    pts = rng.standard_t(3, size=(80, 2))
    w = rng.uniform(0.1, 1, size=80)
    w /= w.sum()
    shift = np.array([3.5, -1.25])
    a = weighted_spatial_median(pts, w).median
    b = weighted_spatial_median(pts + shift, w).median
    np.testing.assert_allclose(b, a + shift, atol=1e-8)


def test_rotation_equivariance():
    rng = np.random.default_rng(6)
    pts = rng.standard_t(3, size=(80, 3))
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    a = weighted_spatial_median(pts, tol=1e-12, max_iter=5000).median
    b = weighted_spatial_median(pts @ q.T, tol=1e-12, max_iter=5000).median
    np.testing.assert_allclose(b, q @ a, atol=1e-8)


def test_uniform_weights_reproduce_unweighted():
    pts = np.random.default_rng(7).normal(size=(40, 2))
    a = weighted_spatial_median(pts)
    b = weighted_spatial_median(pts, np.full(40, 1 / 40))
    np.testing.assert_array_equal(a.median, b.median)


def test_pipeline_balanced_constraints_match_unweighted():
    pts = np.array([[1.0, 2.0], [-1.0, -2.0], [2.0, -1.0], [-2.0, 1.0], [0.5, 0.3], [-0.5, -0.3]])
    plain = weighted_spatial_median(pts)
    el = el_weighted_median_pipeline(pts, KnownComponentwiseMedians((0.0, 0.0)))
    np.testing.assert_array_equal(el.el_solution.zeta, [0.0, 0.0])
    np.testing.assert_array_equal(el.median, plain.median)


def test_pipeline_symmetric_sample_near_origin():
    rng = np.random.default_rng(8)
    pts = rng.standard_t(3, size=(500, 2))
    res = el_weighted_median_pipeline(pts, KnownComponentwiseMedians((0.0, 0.0)), median_cfg=MedianConfig(tol=1e-10))
    assert np.linalg.norm(res.median) <= 0.2
    signs = res.median - pts
    signs /= np.linalg.norm(signs, axis=1)[:, None]
    assert np.linalg.norm(res.weights @ signs) <= 1e-8
