import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from hmdp.errors import ContractError
from hmdp.lp import INFEASIBLE, ITERATION_LIMIT, OPTIMAL, UNBOUNDED, solve_lp


def highs(c, A, b, bound):
    bounds = [(-bound, bound)] * len(c) if bound else [(None, None)] * len(c)
    return linprog(c, A_ub=-A, b_ub=-b, bounds=bounds, method="highs")


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.integers(0, 30),
       st.sampled_from([None, 5.0]))
@settings(max_examples=150, deadline=None)
def test_matches_highs(seed, k, m, bound):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=k)
    A = rng.normal(size=(m, k))
    b = rng.normal(size=m)
    ours = solve_lp(c, A, b, bound)
    ref = highs(c, A, b, bound)
    status = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert ours.status == status
    if status == OPTIMAL:
        assert ours.objective == pytest.approx(ref.fun, abs=1e-7)
        assert np.all(A @ ours.x >= b - 1e-7)
        if bound:
            assert np.all(np.abs(ours.x) <= bound + 1e-9)


def test_degenerate_rows_do_not_cycle():
    # many duplicated and redundant constraints through the optimum
    c = np.array([1.0, 1.0])
    A = np.vstack([np.tile([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], (20, 1)), [[2.0, 2.0]]])
    b = np.concatenate([np.tile([0.0, 0.0, 0.0], 20), [0.0]])
    res = solve_lp(c, A, b)
    assert res.status == OPTIMAL and res.objective == pytest.approx(0.0, abs=1e-12)


def test_known_solution():
    # min 2u + v  s.t.  u + v >= 2,  u - v >= 0  ->  (1, 1)
    res = solve_lp(np.array([2.0, 1.0]), np.array([[1.0, 1.0], [1.0, -1.0]]), np.array([2.0, 0.0]))
    assert res.status == OPTIMAL
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-12)
    assert res.objective == pytest.approx(3.0)


def test_statuses():
    assert solve_lp(np.array([1.0]), np.zeros((0, 1)), np.zeros(0)).status == UNBOUNDED
    assert solve_lp(np.array([1.0]), np.zeros((0, 1)), np.zeros(0), bound=3.0).objective == -3.0
    infeasible = solve_lp(np.array([1.0]), np.array([[1.0], [-1.0]]), np.array([1.0, 0.0]))
    assert infeasible.status == INFEASIBLE
    rng = np.random.default_rng(0)
    capped = solve_lp(rng.normal(size=5), rng.normal(size=(40, 5)), rng.normal(size=40),
                      bound=10.0, max_iters=1)
    assert capped.status in (ITERATION_LIMIT, OPTIMAL)


def test_contracts():
    with pytest.raises(ContractError):
        solve_lp(np.ones(2), np.ones((3, 2)), np.ones(2))
    with pytest.raises(ContractError):
        solve_lp(np.ones(2), np.ones((1, 2)), np.ones(1), bound=-1.0)
