from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrbsde.errors import DriverError, DriverSyntaxError
from qrbsde.expr import (
    FUNCTIONS, Binary, Call, Num, Unary, Var, compile_expr, evaluate, parse_driver, to_text,
    tokenize, variables,
)


def test_parse_sum_with_call():
    assert parse_driver("y + sq(z)") == Binary("+", Var("y"), Call("sq", (Var("z"),)))


def test_parse_precedence():
    ast = parse_driver("0.5*abs(z)^2 - tanh(y)")
    assert ast == Binary(
        "-",
        Binary("*", Num(0.5), Binary("^", Call("abs", (Var("z"),)), Num(2.0))),
        Call("tanh", (Var("y"),)),
    )
    assert parse_driver("-y^2") == Unary("-", Binary("^", Var("y"), Num(2.0)))
    assert parse_driver("a - b - c") == Binary("-", Binary("-", Var("a"), Var("b")), Var("c"))


@pytest.mark.parametrize("text,token", [
    ("y + + z", 3),
    ("y +", 3),
    ("sq(y", 4),
    ("min(y)", 1),
    ("foo(y)", 1),
    ("y z", 2),
    ("y $ z", 2),
])
def test_syntax_error_positions(text, token):
    with pytest.raises(DriverSyntaxError) as info:
        parse_driver(text)
    assert info.value.token_index == token
    assert f"(token {token})" in str(info.value)


def test_syntax_error_line_and_column():
    with pytest.raises(DriverSyntaxError) as info:
        parse_driver("y +\n  * z")
    assert (info.value.line, info.value.column) == (2, 3)


def test_tokenize_positions():
    toks = tokenize("1.5e-3 *\nz")
    assert [t.kind for t in toks] == ["num", "op", "name", "end"]
    assert (toks[2].line, toks[2].column, toks[2].index) == (2, 1, 3)


def test_evaluate_vectorised():
    y = np.array([0.0, 1.0, 2.0])
    out = evaluate(parse_driver("max(y, 1) + log(exp(y)) - min(y, 0.5)"), {"y": y})
    np.testing.assert_allclose(out, np.maximum(y, 1) + y - np.minimum(y, 0.5))
    assert variables(parse_driver("a*sq(b) + tanh(c)")) == {"a", "b", "c"}


@pytest.mark.parametrize("text,env", [
    ("1/y", {"y": np.array([1.0, 0.0])}),
    ("log(y)", {"y": np.array([1.0, -1.0])}),
    ("y^0.5", {"y": np.array([-4.0])}),
    ("q", {}),
])
def test_evaluation_errors(text, env):
    with pytest.raises(DriverError):
        compile_expr(parse_driver(text))(env)


def test_division_error_reports_position():
    with pytest.raises(DriverError) as info:
        evaluate(parse_driver("1/y"), {"y": np.array([1.0, 2.0, 0.0])})
    assert info.value.node == 2


names = st.sampled_from(["y", "z", "t", "m", "w"])
numbers = st.floats(0, 1e6, allow_nan=False).map(lambda x: Num(float(x)))


def _ast():
    leaves = st.one_of(names.map(Var), numbers)

    def extend(children):
        unary_fns = [k for k, (n, _) in FUNCTIONS.items() if n == 1]
        binary_fns = [k for k, (n, _) in FUNCTIONS.items() if n == 2]
        return st.one_of(
            st.builds(Unary, st.just("-"), children),
            st.builds(Binary, st.sampled_from("+-*/^"), children, children),
            st.builds(lambda f, a: Call(f, (a,)), st.sampled_from(unary_fns), children),
            st.builds(lambda f, a, b: Call(f, (a, b)), st.sampled_from(binary_fns), children, children),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@given(_ast())
def test_round_trip(ast):
    assert parse_driver(to_text(ast)) == ast
