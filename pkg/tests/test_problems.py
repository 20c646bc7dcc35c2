import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from consistent_sgd.datagen import GroundTruth
from consistent_sgd.harness.verify import finite_difference_gradient
from consistent_sgd.problems import (GraphProblem, build_problem, curvature_constants, gradient,
                                     objective, value_and_gradient)

from conftest import make_problem


def loop_objective(prob, w):
    """Elementwise reimplementation with explicit sums (oracle)."""
    n, d = prob.X.shape
    A, X, y = prob.A, prob.X, prob.y
    if prob.kind == "convex":
        total = 0.0
        for v in range(n):
            out = 0.0
            for u in range(n):
                for j in range(d):
                    out += A[v, u] * X[u, j] * w[j]
            total += (out - y[v]) ** 2
        return total / (2 * n)
    d2 = prob.d2
    W1 = [[w[j * d2 + c] for c in range(d2)] for j in range(d)]
    W2 = w[d * d2:]
    H = [[0.0] * d2 for _ in range(n)]
    for u in range(n):
        for c in range(d2):
            z = 0.0
            for s in range(n):
                for j in range(d):
                    z += A[u, s] * X[s, j] * W1[j][c]
            H[u][c] = 1.0 / (1.0 + math.exp(-z))
    total = 0.0
    for v in range(n):
        out = sum(A[v, u] * H[u][c] * W2[c] for u in range(n) for c in range(d2))
        total += (out - y[v]) ** 2
    return total / (2 * n)


def tiny(kind):
    return make_problem(kind, n=4, p=1.0, d=3, d2=2, seed=5)


@pytest.mark.parametrize("kind", ["convex", "nonconvex"])
def test_objective_matches_loop_oracle(kind, rng):
    prob = tiny(kind)
    for _ in range(5):
        w = rng.standard_normal(prob.dim)
        assert objective(prob, w) == pytest.approx(loop_objective(prob, w), abs=1e-12, rel=1e-12)


@pytest.mark.parametrize("kind", ["convex", "nonconvex"])
def test_optimum_is_zero(kind, convex300, nonconvex300):
    prob = convex300 if kind == "convex" else nonconvex300
    f, g = value_and_gradient(prob, prob.w_star)
    assert f == 0.0
    assert np.max(np.abs(g)) <= 1e-10


def test_one_node_instance():
    truth = GroundTruth(w_star=np.zeros(1), y=np.zeros(1))
    prob = build_problem(np.array([[1.0]]), np.array([[1.0]]), truth)
    assert objective(prob, np.array([2.0])) == 2.0
    np.testing.assert_array_equal(gradient(prob, np.array([2.0])), [2.0])


@pytest.mark.parametrize("kind", ["convex", "nonconvex"])
def test_gradient_matches_finite_differences(kind, convex300, nonconvex300, rng):
    prob = convex300 if kind == "convex" else nonconvex300
    for _ in range(5):
        w = rng.standard_normal(prob.dim)
        fd = finite_difference_gradient(lambda v: objective(prob, v), w, 1e-5)
        g = gradient(prob, w)
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)


def test_convex_gradient_is_affine(convex300, rng):
    w1, w2 = rng.standard_normal((2, convex300.dim))
    lhs = gradient(convex300, w1 + w2) + gradient(convex300, np.zeros(convex300.dim))
    rhs = gradient(convex300, w1) + gradient(convex300, w2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12, rtol=0)


def test_dimension_mismatch(convex300, nonconvex300):
    with pytest.raises(ValueError):
        objective(convex300, np.zeros(11))
    with pytest.raises(ValueError):
        gradient(nonconvex300, np.zeros(10))


def test_radius_and_interior_optimum(convex300, nonconvex300):
    assert convex300.radius == 1000.0
    assert nonconvex300.radius == 100.0 * 11 * 5
    for prob in (convex300, nonconvex300):
        assert np.linalg.norm(prob.w_star) <= prob.radius


def test_curvature_identity_features():
    n = 3
    truth = GroundTruth(w_star=np.zeros(n), y=np.zeros(n))
    prob = build_problem(np.eye(n), np.eye(n), truth)
    cc = curvature_constants(prob)
    assert cc.l == pytest.approx(1 / n, rel=1e-14)
    assert cc.L == pytest.approx(1 / n, rel=1e-14)


def test_curvature_default_instance(convex300):
    cc = curvature_constants(convex300)
    assert 0 < cc.l <= cc.L
    s = np.linalg.svd(convex300.AX, compute_uv=False)
    assert cc.l == pytest.approx(s.min() ** 2 / 300, rel=1e-12)


def test_hessian_spectrum_within_curvature_bounds(rng):
    A = rng.uniform(0, 0.2, (5, 5))
    A = A + A.T
    X = rng.standard_normal((5, 3))
    truth = GroundTruth(w_star=np.zeros(3), y=np.zeros(5))
    prob = build_problem(A, X, truth)
    cc = curvature_constants(prob)
    eig = np.linalg.eigvalsh(prob.AX.T @ prob.AX / 5)
    assert eig.min() >= cc.l * (1 - 1e-12) and eig.max() <= cc.L * (1 + 1e-12)


def test_rank_deficient_reports_zero_l():
    X = np.ones((6, 2))
    truth = GroundTruth(w_star=np.zeros(2), y=np.zeros(6))
    prob = build_problem(np.eye(6), X, truth)
    assert curvature_constants(prob).l == 0.0


def test_nonconvex_curvature_is_estimated(nonconvex300):
    cc = curvature_constants(nonconvex300, pairs=500)
    assert cc.l is None and cc.L > 0 and cc.L_estimated


def test_problem_rejects_exterior_optimum():
    truth = GroundTruth(w_star=np.full(2, 1e4), y=np.zeros(3))
    with pytest.raises(ValueError):
        build_problem(np.eye(3), np.ones((3, 2)), truth)


vec = arrays(np.float64, 10, elements=st.floats(-50, 50))


@settings(max_examples=200, deadline=None)
@given(w=vec, u=vec)
def test_strong_convexity_property(convex300, w, u):
    l = curvature_constants(convex300).l
    diff = w - u
    gap = objective(convex300, w) - objective(convex300, u) - gradient(convex300, u) @ diff - 0.5 * l * diff @ diff
    assert gap >= -1e-9 * max(1.0, objective(convex300, w))


@settings(max_examples=200, deadline=None)
@given(w=vec, u=vec)
def test_smoothness_property(convex300, w, u):
    L = curvature_constants(convex300).L
    lhs = np.linalg.norm(gradient(convex300, w) - gradient(convex300, u))
    assert lhs <= L * np.linalg.norm(w - u) * (1 + 1e-9) + 1e-12


@settings(max_examples=200, deadline=None)
@given(u=vec)
def test_lemma2_property(convex300, u):
    l = curvature_constants(convex300).l
    diff = u - convex300.w_star
    assert gradient(convex300, u) @ diff >= l * diff @ diff - 1e-9 * max(1.0, diff @ diff)
