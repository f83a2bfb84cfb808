import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linetime.exprparse import (
    FUNCTIONS,
    BinOp,
    Call,
    ExprDomainError,
    ExprSyntaxError,
    Neg,
    Num,
    UnknownIdentifierError,
    Var,
    evaluate,
    parse,
)


def test_variable():
    assert parse("x") == Var()


def test_negated_product_tree():
    e = parse("-2*(x - 1)")
    assert e == BinOp("*", Neg(Num(2.0)), BinOp("-", Var(), Num(1.0)))
    assert evaluate(e, 1.0) == 0.0


def test_gaussian_kernel_at_zero():
    assert evaluate(parse("exp(-x^2/2)"), 0.0) == 1.0


@pytest.mark.parametrize("text,x,value", [
    ("x^2", 3.0, 9.0),
    ("sqrt(x)", 4.0, 2.0),
    ("2+3*4", 0.0, 14.0),
    ("2^3^2", 0.0, 512.0),
    ("-x^2", 3.0, -9.0),
    ("2^-1", 0.0, 0.5),
    ("tanh(0) + cos(0) + abs(-3)", 0.0, 4.0),
    ("1e-3 * x", 2.0, 2e-3),
    ("8/2/2", 0.0, 2.0),
    ("1-2-3", 0.0, -4.0),
])
def test_values(text, x, value):
    assert evaluate(parse(text), x) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text,x,reason", [
    ("1/x", 0.0, "division by zero"),
    ("log(x)", 0.0, "log of nonpositive"),
    ("log(x)", -1.0, "log of nonpositive"),
    ("sqrt(x)", -1.0, "sqrt of negative"),
    ("(-1)^0.5", 0.0, "power outside real domain"),
    ("exp(x)", 1000.0, "overflow"),
    ("x*x", 1e200, "overflow"),
])
def test_domain_errors(text, x, reason):
    with pytest.raises(ExprDomainError) as info:
        evaluate(parse(text), x)
    assert reason in info.value.reason
    assert info.value.x == x


def test_domain_error_array_path():
    e = parse("1/x")
    with pytest.raises(ExprDomainError) as info:
        e.evaluate_array(np.array([1.0, 0.0, 2.0]))
    assert info.value.x == 0.0


@pytest.mark.parametrize("text,offset", [
    ("2x", 1),
    ("x +", 3),
    ("(x", 2),
    ("", 0),
    ("x $ 1", 2),
    ("exp x", 4),
    ("x)", 1),
])
def test_syntax_errors_carry_offset(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset
    assert info.value.expected


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("1 + foo(x)")
    assert info.value.name == "foo"
    assert info.value.offset == 4


def test_constant_detection():
    assert parse("2*3 - exp(1)").is_constant()
    assert not parse("2*x").is_constant()


# ---------------------------------------------------------------------------
# generated trees

_nums = st.floats(min_value=0.0, max_value=50.0, allow_nan=False).map(Num)
_leaves = st.one_of(_nums, st.just(Var()))


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.builds(BinOp, st.sampled_from("+-*/^"), children, children),
        st.builds(Call, st.sampled_from(sorted(FUNCTIONS)), children),
    )


trees = st.recursive(_leaves, _extend, max_leaves=12)


def _outcome(e, x):
    try:
        return ("ok", e.evaluate(x))
    except ExprDomainError as exc:
        return ("err", exc.reason)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_print_then_parse_is_structurally_identical(tree):
    assert parse(tree.to_text()) == tree


@settings(max_examples=150, deadline=None)
@given(trees)
def test_round_trip_evaluates_identically(tree):
    again = parse(tree.to_text())
    rng = np.random.default_rng(0)
    for x in rng.uniform(-5, 5, size=100):
        a, b = _outcome(tree, x), _outcome(again, x)
        if a[0] == "ok" and b[0] == "ok" and math.isnan(a[1]):
            assert math.isnan(b[1])
        else:
            assert a == b


@settings(max_examples=150, deadline=None)
@given(trees)
def test_scalar_and_array_paths_agree(tree):
    xs = np.linspace(-3, 3, 13)
    try:
        arr = tree.evaluate_array(xs)
    except ExprDomainError:
        # some grid point is out of domain; the scalar path must agree on that
        assert any(_outcome(tree, x)[0] == "err" for x in xs)
        return
    for x, v in zip(xs, np.broadcast_to(arr, xs.shape)):
        kind, s = _outcome(tree, x)
        assert kind == "ok"
        assert s == pytest.approx(v, rel=1e-12, abs=1e-300)


@settings(max_examples=200, deadline=None)
@given(trees, st.floats(min_value=-10, max_value=10))
def test_evaluation_is_finite_or_domain_error(tree, x):
    kind, v = _outcome(tree, x)
    if kind == "ok":
        assert math.isfinite(v)
