import math

import numpy as np
import pytest

from consistent_sgd.estimators import EstimatorSpec
from consistent_sgd.optimizer import (DivergenceError, FeasibleRegion, StepSchedule, average_traces,
                                      initial_iterate, project, run_sgd, step_size)
from consistent_sgd.problems import curvature_constants

EXACT = EstimatorSpec("exact")


def test_step_size_examples():
    assert step_size(StepSchedule("inverse_lk", l=0.5), 4) == 0.5
    assert step_size(StepSchedule("inverse_lk", l=0.5, c=0.05), 4) == pytest.approx(1 / (20 * 0.5 * 4))
    assert step_size(StepSchedule("inverse_sqrt", c=2.0), 16) == 0.5
    assert step_size(StepSchedule("constant_nonconvex", D_f=3.0, G=2.0, T=9), 7) == 0.5
    assert step_size(StepSchedule("highprob_constant_nonconvex", D_f=3.0, G=2.0, T=9, delta=0.5), 1) == pytest.approx(1 / 3)
    assert step_size(StepSchedule("highprob_inverse_lk", l=1.0, rho=5.0, T=10), 2) == 1.0
    assert step_size(StepSchedule("constant", c=0.01), 123) == 0.01


def test_highprob_reduces_to_base_rules():
    base = StepSchedule("inverse_lk", l=0.37)
    hp = StepSchedule("highprob_inverse_lk", l=0.37, rho=0.0, T=100)
    assert all(step_size(base, k) == step_size(hp, k) for k in range(1, 101))
    a = StepSchedule("constant_nonconvex", D_f=1.3, G=0.7, T=50)
    b = StepSchedule("highprob_constant_nonconvex", D_f=1.3, G=0.7, T=50, delta=0.0)
    assert step_size(a, 1) == step_size(b, 1)


def test_step_schedule_errors():
    with pytest.raises(ValueError):
        StepSchedule("highprob_inverse_lk", l=0.1, rho=1.0, T=10)
    with pytest.raises(ValueError):
        StepSchedule("inverse_lk")
    with pytest.raises(ValueError):
        StepSchedule("constant_nonconvex", D_f=1.0, G=1.0)
    with pytest.raises(ValueError):
        StepSchedule("nope")
    with pytest.raises(ValueError):
        step_size(StepSchedule("constant"), 0)


def test_projection_examples(rng):
    ball = FeasibleRegion.ball(3.0)
    w = np.array([1.0, 2.0, 0.0])
    assert project(w, ball) is w
    v = rng.standard_normal(5)
    v *= 6.0 / np.linalg.norm(v)
    np.testing.assert_allclose(project(v, ball), v / 2, rtol=1e-15)
    assert project(v, FeasibleRegion()) is v
    assert ball.diameter == 6.0
    with pytest.raises(ValueError):
        FeasibleRegion.ball(0.0)


def test_zero_estimator_is_fixed_point(convex300):
    w1 = initial_iterate(convex300, FeasibleRegion.ball(convex300.radius), 0)
    tr = run_sgd(convex300, EXACT, StepSchedule("constant", c=1.0), FeasibleRegion.ball(convex300.radius),
                 50, w1=w1, estimator=lambda w, rng: np.zeros_like(w), iterate_stride=1)
    assert all(np.array_equal(w, w1) for w in tr.iterates.values())
    assert np.array_equal(tr.w_next, w1)
    assert np.all(tr.dist_sq == tr.dist_sq[0])


def test_iterates_stay_in_ball(convex300):
    region = FeasibleRegion.ball(1.0)
    w1 = initial_iterate(convex300, region, 3)
    tr = run_sgd(convex300, EstimatorSpec("layered_consistent", n1=30, n2=1), StepSchedule("constant", c=5.0),
                 region, 200, w1=w1, seed=3, iterate_stride=1)
    assert tr.projection_ever_active
    assert all(np.linalg.norm(w) <= 1.0 + 1e-9 for w in tr.iterates.values())
    assert np.linalg.norm(tr.w_next) <= 1.0 + 1e-9


def test_running_average_and_min(nonconvex300):
    region = FeasibleRegion.ball(nonconvex300.radius)
    tr = run_sgd(nonconvex300, EstimatorSpec("layered_consistent", n1=30, n2=30, n3=1),
                 StepSchedule("constant", c=0.01), region, 300, seed=1, iterate_stride=1)
    recomputed = np.mean([tr.iterates[k] for k in range(1, 301)], axis=0)
    np.testing.assert_allclose(tr.w_bar_T, recomputed, atol=1e-10, rtol=0)
    assert tr.min_grad_norm_sq[-1] == np.min(tr.grad_norm_sq)
    assert np.array_equal(tr.min_grad_norm_sq, np.minimum.accumulate(tr.grad_norm_sq))


def test_exact_envelope_per_seed(convex300):
    """Exact gradients with gamma = 1/(lk) stay under G^2/(l^2 k) for k >= 3."""
    l = curvature_constants(convex300).l
    region = FeasibleRegion.ball(convex300.radius)
    sched = StepSchedule("inverse_lk", l=l)
    for seed in range(32):
        tr = run_sgd(convex300, EXACT, sched, region, 3000, seed=seed)
        k = tr.k[2:]
        assert np.all(tr.dist_sq[2:] <= 1.05 * tr.G_hat**2 / (l**2 * k))


@pytest.mark.filterwarnings("ignore:overflow")
def test_divergence_is_reported(convex300):
    with pytest.raises(DivergenceError, match="k="):
        run_sgd(convex300, EXACT, StepSchedule("constant", c=1e300), FeasibleRegion(), 10,
                w1=np.ones(10), estimator=lambda w, rng: np.full_like(w, 1e300))


def test_start_outside_region_rejected(convex300):
    with pytest.raises(ValueError):
        run_sgd(convex300, EXACT, StepSchedule("constant", c=0.1), FeasibleRegion.ball(1.0), 5, w1=np.full(10, 5.0))


def test_run_is_deterministic(convex300):
    spec = EstimatorSpec("layered_consistent", n1=30, n2=1)
    region = FeasibleRegion.ball(convex300.radius)
    sched = StepSchedule("inverse_lk", l=curvature_constants(convex300).l, c=0.05)
    a = run_sgd(convex300, spec, sched, region, 200, seed=7)
    b = run_sgd(convex300, spec, sched, region, 200, seed=7)
    c = run_sgd(convex300, spec, sched, region, 200, seed=8)
    assert a.dist_sq.tobytes() == b.dist_sq.tobytes()
    assert a.dist_sq.tobytes() != c.dist_sq.tobytes()


def test_trace_rows(convex300):
    tr = run_sgd(convex300, EXACT, StepSchedule("constant", c=0.5), FeasibleRegion(), 5, seed=0)
    assert tr.T == 5 and list(tr.k) == [1, 2, 3, 4, 5]
    assert np.all(tr.gamma_k == 0.5)
    assert tr.avg_gap[0] == tr.f_gap[0]
    with pytest.raises(KeyError):
        tr.column("bogus")
    m = average_traces([tr, tr])
    np.testing.assert_array_equal(m.dist_sq, tr.dist_sq)
    with pytest.raises(ValueError):
        average_traces([])
    assert math.isclose(tr.G_hat, max(tr.max_g_norm, math.sqrt(tr.grad_norm_sq.max())))
