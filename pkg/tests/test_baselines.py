import itertools

import numpy as np
import pytest

from hmdp import bench
from hmdp.baselines import (GridLookaheadPolicy, grid_vi, joint_actions, l2_vi, random_points,
                            transition_weights, uniform_points)
from hmdp.basis import BasisFunction
from hmdp.errors import DegenerateGridError, FittingError, ResourceError
from hmdp.policy import evaluate_policy

RING, RING_BASIS = bench.make(bench.RingAdmin(4))
DRING = bench.make_discrete_ring_admin(2)
STATES = list(itertools.product((0, 1), (0, 1)))


def exact_discrete_vi(gamma=0.95, iters=2000):
    """Value iteration on the two-computer binary ring, written out by hand."""
    def up(i, x, a):
        if a == i:
            return 0.95
        xi, xp = x[i], x[1 - i]
        return 0.1 + xi * (2 / 3 - 0.1) + xi * xp * (0.9 - 2 / 3)

    v = np.zeros(4)
    for _ in range(iters):
        new = np.empty(4)
        for s, x in enumerate(STATES):
            q = []
            for a in range(3):
                p1, p2 = up(0, x, a), up(1, x, a)
                ev = sum((p1 if y[0] else 1 - p1) * (p2 if y[1] else 1 - p2) * v[t]
                         for t, y in enumerate(STATES))
                q.append(2 * x[0] + x[1] + gamma * ev)
            new[s] = max(q)
        v = new
    return v


def discrete_points():
    return {"x1": np.array([s[0] for s in STATES], float),
            "x2": np.array([s[1] for s in STATES], float)}


def test_grid_vi_equals_exact_vi_on_binary_ring():
    res = grid_vi(DRING, discrete_points(), 0.95, max_iters=2000, tol=1e-13)
    np.testing.assert_allclose(res.values, exact_discrete_vi(), atol=1e-8)


def test_grid_vi_residuals_contract():
    res = grid_vi(RING, uniform_points(RING, 0.5), 0.95, max_iters=30)
    r = np.array(res.residuals)
    assert np.all(r[1:] <= 0.95 * r[:-1] + 1e-9)


def test_transition_rows_normalize_after_scaling():
    pts = uniform_points(RING, 0.5)
    w = transition_weights(RING, pts, {"a": 4.0}, pts)
    assert w.shape == (81, 81) and np.all(w >= 0)
    exact = transition_weights(DRING, discrete_points(), {"a": 1.0}, discrete_points())
    np.testing.assert_allclose(exact.sum(axis=1), 1.0, atol=1e-14)


def test_degenerate_grid_is_reported():
    corner = {f"x{i}": np.zeros(1) for i in range(1, 5)}
    with pytest.raises(DegenerateGridError, match="zero transition mass"):
        grid_vi(RING, corner, 0.95)


def test_l2_with_constant_basis():
    pts = random_points(RING, 200, np.random.default_rng(0))
    res = l2_vi(RING, (BasisFunction.constant(),), 0.95, pts, max_iters=2000, tol=1e-10)
    # each step: w <- mean_x max_a R(x, a) + gamma w
    r = sum(np.asarray(pts[f"x{i}"]) ** 2 for i in range(1, 5)) + pts["x1"] ** 2
    assert res.weights[0] == pytest.approx(r.mean() / 0.05, rel=1e-8)


def test_l2_with_tabular_basis_recovers_exact_values():
    table = [BasisFunction(discrete_vars=("x1", "x2"), shape=(2, 2),
                           table=tuple(float(i == k) for i in range(4))) for k in range(4)]
    res = l2_vi(DRING, table, 0.95, discrete_points(), max_iters=2000, tol=1e-12)
    np.testing.assert_allclose(res.weights, exact_discrete_vi(), atol=1e-8)
    assert res.residuals[-1] < 1e-12


def test_rank_deficient_design_raises():
    pts = {f"x{i}": np.array([0.2, 0.7]) for i in range(1, 5)}
    with pytest.raises(FittingError):
        l2_vi(RING, RING_BASIS, 0.95, pts)


def test_caps():
    with pytest.raises(ResourceError):
        uniform_points(RING, 0.05)
    with pytest.raises(ResourceError):
        random_points(RING, 10 ** 6, np.random.default_rng(0))
    assert len(joint_actions(RING)) == 5


def test_grid_lookahead_policy_runs():
    res = grid_vi(RING, random_points(RING, 300, np.random.default_rng(1)), 0.95)
    stats = evaluate_policy(RING, GridLookaheadPolicy(res, 0.95), 0.95, 10, 50, 0)
    assert np.isfinite(stats.mean) and stats.mean > 0
