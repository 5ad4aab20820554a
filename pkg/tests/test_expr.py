import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmdp.errors import ContractError
from hmdp.expr import (Add, Clamp, Const, Ind, Max, Min, Mul, Normal, Pow, Sub, Table, Var,
                       lift, parse)

NAMES = ("x1", "x2", "a")

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
leaves = st.one_of(finite.map(Const), st.sampled_from(NAMES[:2]).map(Var))


def _extend(children):
    pair = st.tuples(children, children)
    return st.one_of(
        st.lists(children, min_size=1, max_size=3).map(lambda xs: Add(tuple(xs))),
        st.lists(children, min_size=1, max_size=3).map(lambda xs: Mul(tuple(xs))),
        st.lists(children, min_size=1, max_size=3).map(lambda xs: Min(tuple(xs))),
        st.lists(children, min_size=1, max_size=3).map(lambda xs: Max(tuple(xs))),
        pair.map(lambda p: Sub(*p)),
        children.map(lambda c: Clamp(c, 0.0, 1.0)),
        children.map(lambda c: Pow(c, 2)),
        children.map(lambda c: Normal(c, 0.25, 0.5)),
        st.just(Ind("a", 1)),
        st.just(Table("a", (0.5, -1.25, 3.0))),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@given(trees)
@settings(max_examples=150, deadline=None)
def test_prefix_round_trip_is_exact(tree):
    text = tree.to_prefix()
    back = parse(text)
    assert back == tree
    assert back.to_prefix() == text


@given(trees, st.floats(0, 1), st.floats(0, 1), st.integers(0, 2))
@settings(max_examples=100, deadline=None)
def test_parsed_tree_evaluates_identically(tree, x1, x2, a):
    env = {"x1": x1, "x2": x2, "a": float(a)}
    with np.errstate(all="ignore"):
        np.testing.assert_array_equal(parse(tree.to_prefix())(env), tree(env))


def test_operator_sugar_and_evaluation():
    x = Var("x")
    e = 2.0 + 13.0 * x - 5.0 * x * x
    assert float(e({"x": 0.5})) == pytest.approx(2 + 6.5 - 1.25)
    assert float((-x)({"x": 2.0})) == -2.0
    assert float((1 - x)({"x": 0.25})) == 0.75
    assert e.variables() == frozenset({"x"})


def test_vectorized_evaluation():
    e = Clamp(Var("x") * 3.0, 0.0, 1.0)
    np.testing.assert_allclose(e({"x": np.array([0.1, 0.5])}), [0.3, 1.0])


def test_indicator_and_table():
    env = {"a": np.array([0.0, 1.0, 2.0])}
    np.testing.assert_array_equal(Ind("a", 1)(env), [0, 1, 0])
    np.testing.assert_array_equal(Table("a", (1.0, 2.0, 3.0))(env), [1, 2, 3])
    with pytest.raises(ContractError):
        Table("a", (1.0,))(env)


def test_normal_density_peak():
    assert float(Normal(Var("x"), 0.5, 0.1)({"x": 0.5})) == pytest.approx(
        1 / (0.1 * np.sqrt(2 * np.pi)))


def test_missing_variable():
    with pytest.raises(ContractError):
        Var("y")({"x": 1.0})


def test_lift():
    assert lift(3) == Const(3.0)
    assert lift(Var("x")) == Var("x")


@pytest.mark.parametrize("text", ["", "(add 1", "(add 1))", "(pow x)", "(frob 1 2)", "(add)",
                                  "(sub 1 2 3)", "(clamp x one 1)"])
def test_parse_errors(text):
    with pytest.raises(ContractError):
        parse(text)
