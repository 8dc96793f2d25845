import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from statgeo.field_expr import (
    Binary,
    Const,
    ExpressionDomainError,
    ExpressionSyntaxError,
    FieldExpr,
    Unary,
    UnknownIdentifierError,
    Var,
    constant,
    evaluate,
    grad_fd,
    parse,
    serialize,
    substitute,
)

COORDS = ("x1", "x2")


@pytest.mark.parametrize(
    "text,point,value",
    [
        ("1 + x1^2", [2.0, 0.0], 5.0),
        ("2^3^2", [0.0, 0.0], 512.0),
        ("-x1^2", [3.0, 0.0], -9.0),
        ("x1 - x2 - 1", [5.0, 1.0], 3.0),
        ("8 / 4 / 2", [0.0, 0.0], 1.0),
        ("exp(0) + log(1) + sqrt(4) + abs(-3)", [0.0, 0.0], 6.0),
        ("tanh(0) + sin(0) + cos(0)", [0.0, 0.0], 1.0),
        ("1.5e1", [0.0, 0.0], 15.0),
    ],
)
def test_parse_and_evaluate(text, point, value):
    assert evaluate(parse(text, COORDS), point) == pytest.approx(value, rel=1e-15)


def test_vectorized_call_matches_pointwise():
    e = parse("sin(x1) * exp(-x2)", COORDS)
    pts = np.random.default_rng(0).normal(size=(10, 2))
    assert np.allclose(e(pts), [evaluate(e, p) for p in pts], rtol=0, atol=1e-15)


def test_constant_broadcasts():
    assert np.array_equal(constant(2.5, COORDS)(np.zeros((3, 2))), [2.5, 2.5, 2.5])
    assert parse("3 * 2", COORDS).is_constant()
    assert not parse("x2", COORDS).is_constant()


@pytest.mark.parametrize("text", ["1 +", "(x1", "x1 x2", "sin x1", "", "3 $ 4", "x1)"])
def test_syntax_errors(text):
    with pytest.raises(ExpressionSyntaxError):
        parse(text, COORDS)


def test_unknown_identifier_reports_name_and_offset():
    with pytest.raises(UnknownIdentifierError) as exc:
        parse("1 + y", COORDS)
    assert exc.value.name == "y"
    assert exc.value.offset == 4


@pytest.mark.parametrize(
    "text,point",
    [("log(x1)", [0.0, 0.0]), ("sqrt(x1)", [-1.0, 0.0]), ("1 / x2", [1.0, 0.0]), ("x1^0.5", [-1.0, 0.0])],
)
def test_domain_errors_carry_span(text, point):
    with pytest.raises(ExpressionDomainError) as exc:
        evaluate(parse(text, COORDS), point)
    start, end = exc.value.span
    assert 0 <= start < end <= len(text)


def test_substitute_replaces_symbol():
    e = parse("r^2 + x1", COORDS + ("r",))
    radius = parse("sqrt(x1^2 + x2^2)", COORDS).root
    s = substitute(e, "r", radius, COORDS)
    assert s.coords == COORDS
    assert evaluate(s, [3.0, 4.0]) == pytest.approx(28.0)


def test_grad_fd():
    e = parse("x1^2 * x2 + sin(x2)", COORDS)
    p = np.array([1.3, -0.4])
    exact = np.array([2 * p[0] * p[1], p[0] ** 2 + math.cos(p[1])])
    assert np.allclose(grad_fd(e, p), exact, atol=1e-8)
    with pytest.raises(ValueError):
        grad_fd(e, p, h=0.0)


# -- property: serialize/parse round trip ---------------------------------------

_consts = st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Const)
_vars = st.sampled_from([Var("x1", 0), Var("x2", 1)])


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["neg", "sin", "cos", "exp", "tanh", "abs"]), children).map(
            lambda t: Unary(t[0], t[1])
        ),
        st.tuples(st.sampled_from(["+", "-", "*", "/", "^"]), children, children).map(
            lambda t: Binary(t[0], t[1], t[2])
        ),
    )


trees = st.recursive(st.one_of(_consts, _vars), _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(trees)
def test_serialize_round_trip(root):
    e = FieldExpr(root, COORDS)
    text = serialize(e)
    again = parse(text, COORDS)
    assert again.root == root
    assert serialize(again) == text


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False))
def test_negative_constant_serializes_parenthesized(v):
    e = constant(v, COORDS)
    assert evaluate(parse(serialize(e), COORDS), [0.0, 0.0]) == v
