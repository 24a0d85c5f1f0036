import numpy as np
import pytest
from hypothesis import given, strategies as st

import sparsemf.expr as expr
from sparsemf.error import ExprEvaluationError, ExprSyntaxError


def test_parse_precedence():
    ast = expr.parse_expr('1 + 2*x1')
    assert ast == expr.Add(expr.Const(1.),
                           expr.Mul(expr.Const(2.), expr.Var(1)))


def test_parse_negative_literal():
    assert expr.parse_expr('-3') == expr.Const(-3.)
    assert expr.parse_expr('-x2') == expr.Neg(expr.Var(2))


def test_underscore_variable():
    assert expr.parse_expr('x_3') == expr.Var(3)


def test_evaluate_shape():
    ast = expr.parse_expr('x1 * (x2 - 1) / 2')
    pts = np.array([[[2., 3.], [4., 1.]], [[0., 0.], [1., 5.]]])
    vals = expr.evaluate(ast, pts)
    assert vals.shape == (2, 2)
    assert np.allclose(vals, [[2., 0.], [0., 2.]])


def test_max_index():
    assert expr.max_index(expr.parse_expr('x1 + 3*x4')) == 4
    assert expr.max_index(expr.parse_expr('2.5')) == 0


@pytest.mark.parametrize('src,column', [('1 +', 4), ('x1 ) 2', 4),
                                        ('(x1', 4), ('2 $ 3', 3)])
def test_syntax_error_column(src, column):
    with pytest.raises(ExprSyntaxError) as err:
        expr.parse_expr(src)
    assert err.value.column == column


def test_division_by_zero():
    ast = expr.parse_expr('1 / x1')
    with pytest.raises(ExprEvaluationError):
        expr.evaluate(ast, np.array([[1.], [0.]]))


def test_missing_coordinate():
    with pytest.raises(ExprEvaluationError):
        expr.evaluate(expr.parse_expr('x3'), np.zeros((2, 2)))


def test_nothing_is_executed():
    with pytest.raises(ExprSyntaxError):
        expr.parse_expr('__import__("os")')


_atoms = st.one_of(
    st.floats(-100, 100, allow_nan=False).map(expr.Const),
    st.integers(1, 3).map(expr.Var))
_trees = st.recursive(
    _atoms,
    lambda kids: st.one_of(
        st.builds(expr.Add, kids, kids), st.builds(expr.Sub, kids, kids),
        st.builds(expr.Mul, kids, kids), kids.map(expr.Neg)),
    max_leaves=12)


@given(_trees)
def test_printed_form_evaluates_alike(ast):
    pts = np.array([[0.5, -1.5, 2.]])
    reparsed = expr.parse_expr(expr.print_expr(ast))
    with np.errstate(over='ignore', invalid='ignore'):
        expected = expr.evaluate(ast, pts)
        found = expr.evaluate(reparsed, pts)
    assert np.allclose(found, expected, equal_nan=True)
