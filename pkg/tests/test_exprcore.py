"""
Expression engine tests.

 Group 1 — Parsing and printing
   parse of single tokens and polynomials, precedence, right-associative ^,
   canonical text form, random trees printed and parsed back, syntax error positions,
   unknown names, dimension errors
 Group 2 — Evaluation
   elementary functions, poles and domain errors reported as non-finite
 Group 3 — Forward-mode gradients
   hand-derived gradients, constants, sqrt/abs at 0, random expressions vs
   five-point central differences, zero dual part equal to plain evaluation
"""

import math

import numpy as np
import pytest

from conftest import random_expression
from sontag_clf.exceptions import DimensionError, ExpressionSyntaxError, NonFiniteError, UnknownIdentifierError
from sontag_clf.exprcore import BinaryOp, DualNumber, Negate, Number, Variable, evaluate, gradient, parse


# Group 1 — Parsing and printing

def test_parse_single_variable():
    expr = parse("x1", 1)
    assert expr.root == Variable(1)
    assert str(expr) == "x1"


def test_parse_polynomial_value():
    assert evaluate(parse("x1^2 + 2*x2", 2), [3.0, 1.0]) == 11.0


def test_precedence_and_associativity():
    assert evaluate(parse("2 + 3*4", 1), [0.0]) == 14.0
    assert evaluate(parse("2^3^2", 1), [0.0]) == 512.0
    assert evaluate(parse("-x1^2", 1), [3.0]) == -9.0
    assert evaluate(parse("8/4/2", 1), [0.0]) == 1.0
    assert evaluate(parse("1 - 2 - 3", 1), [0.0]) == -4.0


def test_unary_minus_builds_negate():
    expr = parse("-x1^2", 1)
    assert expr.root == Negate(BinaryOp("^", Variable(1), Number(2.0)))


def test_canonical_printing():
    assert str(parse("0.5 *x1 ^2", 1)) == "0.5*x1^2"
    assert str(parse("x1*x2+sin( x1 )", 2)) == "x1*x2 + sin(x1)"
    assert str(parse("(x1 + x2)*x1", 2)) == "(x1 + x2)*x1"
    assert str(parse("x1 - (x2 - x1)", 2)) == "x1 - (x2 - x1)"
    assert str(parse("(-x1)^2", 1)) == "(-x1)^2"
    assert str(parse("2.0*x1", 1)) == "2*x1"


@pytest.mark.parametrize("text", [
    "x1^3 + x1*sqrt(x1^4 + 1)",
    "-(x1 - x2)/(1 + x2^2)",
    "exp(-x1)*cos(x2) - tanh(x1*x2)",
    "2^-x1",
])
def test_printed_text_parses_back_to_same_tree(text):
    expr = parse(text, 2)
    assert parse(str(expr), 2) == expr


def test_random_expressions_print_and_parse_back():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        expr = parse(random_expression(rng, n, depth=4), n)
        text = str(expr)
        assert parse(text, n) == expr, text
        assert str(parse(text, n)) == text


def test_syntax_error_position_at_end():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse("x1 + ", 1)
    assert info.value.position == 5
    assert "position 5" in str(info.value)


def test_syntax_error_on_bad_character_and_trailing_input():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse("x1 $ 2", 1)
    assert info.value.position == 3
    with pytest.raises(ExpressionSyntaxError):
        parse("x1 x2", 2)
    with pytest.raises(ExpressionSyntaxError):
        parse("sin x1", 1)
    with pytest.raises(ExpressionSyntaxError):
        parse("", 1)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("y + x1", 1)
    assert info.value.position == 0


def test_variable_outside_dimension():
    with pytest.raises(DimensionError):
        parse("x3 + x1", 2)
    with pytest.raises(DimensionError):
        parse("x0", 2)


# Group 2 — Evaluation

def test_elementary_values():
    assert evaluate(parse("sin(x1)", 1), [0.0]) == 0.0
    assert evaluate(parse("0.5*x1^2", 1), [2.0]) == 2.0
    assert evaluate(parse("ln(exp(x1))", 1), [1.5]) == pytest.approx(1.5, rel=1e-15)
    assert evaluate(parse("abs(x1) + sqrt(x2)", 2), [-2.0, 9.0]) == 5.0


def test_pole_is_non_finite():
    with pytest.raises(NonFiniteError):
        evaluate(parse("1/x1", 1), [0.0])


def test_domain_errors_are_non_finite():
    with pytest.raises(NonFiniteError):
        evaluate(parse("sqrt(x1)", 1), [-1.0])
    with pytest.raises(NonFiniteError):
        evaluate(parse("ln(x1)", 1), [0.0])
    with pytest.raises(NonFiniteError):
        evaluate(parse("x1^0.5", 1), [-4.0])


def test_point_dimension_checked():
    with pytest.raises(DimensionError):
        evaluate(parse("x1", 2), [1.0])


# Group 3 — Forward-mode gradients

def test_gradient_half_square():
    np.testing.assert_array_equal(gradient(parse("0.5*x1^2", 1), [2.0]), [2.0])


def test_gradient_mixed_term():
    np.testing.assert_allclose(gradient(parse("x1*x2 + sin(x1)", 2), [0.0, 3.0]), [4.0, 0.0], atol=1e-15)


def test_gradient_of_constant_is_zero():
    np.testing.assert_array_equal(gradient(parse("7", 3), [1.0, -2.0, 0.5]), np.zeros(3))


def test_gradient_of_sqrt_and_abs_at_zero():
    np.testing.assert_array_equal(gradient(parse("abs(x1) + sqrt(x2^2)", 2), [0.0, 0.0]), [0.0, 0.0])


def test_dual_number_rules():
    x = DualNumber(2.0, 1.0)
    assert (x * x).derivative == 4.0
    assert (1.0 / x).derivative == -0.25
    assert x.exp().derivative == pytest.approx(math.exp(2.0))
    assert x.ln().derivative == 0.5
    assert (2.0 ** x).derivative == pytest.approx(4.0 * math.log(2.0))


def _central_difference(expr, x, i, h=2e-4):
    """Five-point central stencil, truncation error O(h^4)."""
    step = np.zeros(len(x))
    step[i] = h
    return (expr.evaluate(x - 2.0 * step) - 8.0 * expr.evaluate(x - step)
            + 8.0 * expr.evaluate(x + step) - expr.evaluate(x + 2.0 * step)) / (12.0 * h)


def test_random_expressions_match_central_differences():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 4))
        expr = parse(random_expression(rng, n), n)
        x = rng.uniform(-1.0, 1.0, n)
        exact = expr.gradient(x)
        for i in range(n):
            fd = _central_difference(expr, x, i)
            error = abs(exact[i] - fd) / max(1.0, abs(exact[i]))
            worst = max(worst, error)
            assert error < 1e-8, f"{expr} at {x.tolist()}: autodiff {exact[i]}, central difference {fd}"
    print(f"worst gradient error over 1000 expressions: {worst:.2e}")


def test_zero_dual_part_reproduces_plain_evaluation():
    rng = np.random.default_rng(3)
    for _ in range(500):
        n = int(rng.integers(1, 4))
        expr = parse(random_expression(rng, n, depth=4), n)
        x = rng.uniform(-1.0, 1.0, n)
        result = expr.evaluate_dual([DualNumber(float(v), 0.0) for v in x])
        assert result.value == expr.evaluate(x), str(expr)
        assert result.derivative == 0.0, str(expr)
