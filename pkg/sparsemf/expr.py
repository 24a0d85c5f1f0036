"""Arithmetic expressions over the state coordinates.

Vector fields given in scenario files as strings such as ``"x1 + 2*x2"`` are
parsed into a small immutable tree by a recursive-descent parser. The grammar
is::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | atom
    atom   := number | variable | '(' expr ')'

Variables are written ``x1`` or ``x_1`` (1-based). A minus sign directly
followed by a numeric literal is folded into a negative constant. Nothing in
the source string is ever handed to the Python interpreter.
"""

from __future__ import annotations
from dataclasses import dataclass
import re
import typing

import numpy as np

from .error import ExprSyntaxError, ExprEvaluationError

if typing.TYPE_CHECKING:
    from typing import List, Tuple, Union
    from numpy import ndarray
    ExprAst = Union['Const', 'Var', 'Add', 'Sub', 'Mul', 'Div', 'Neg']


@dataclass(frozen=True)
class Const:
    """Numeric constant."""

    value: float


@dataclass(frozen=True)
class Var:
    """State coordinate, ``index`` is 1-based."""

    index: int


@dataclass(frozen=True)
class Add:
    """Sum of two expressions."""

    left: ExprAst
    right: ExprAst


@dataclass(frozen=True)
class Sub:
    """Difference of two expressions."""

    left: ExprAst
    right: ExprAst


@dataclass(frozen=True)
class Mul:
    """Product of two expressions."""

    left: ExprAst
    right: ExprAst


@dataclass(frozen=True)
class Div:
    """Quotient of two expressions."""

    left: ExprAst
    right: ExprAst


@dataclass(frozen=True)
class Neg:
    """Unary minus."""

    operand: ExprAst


_TOKEN = re.compile(r'''
    (?P<space>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x_?(?P<idx>\d+))
  | (?P<op>[-+*/()])
''', re.VERBOSE)


def _tokenize(src: str) -> List[Tuple[str, str, int]]:
    """Split src into (kind, text, column) tokens, column is 1-based."""
    tokens = []
    pos = 0
    while pos < len(src):
        match = _TOKEN.match(src, pos)
        if match is None:
            raise ExprSyntaxError(src, pos + 1,
                                  f'unexpected character {src[pos]!r}')
        kind = match.lastgroup
        if kind == 'idx':
            kind = 'var'
        if kind != 'space':
            tokens.append((kind, match.group(), pos + 1))
        pos = match.end()
    return tokens


class _Parser:
    """Recursive-descent parser over a token list."""

    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.pos = 0

    def _peek(self) -> Tuple[str, str, int]:
        if self.pos < len(self.tokens):
            return self.tokens[self.pos]
        return ('end', '', len(self.src) + 1)

    def _error(self, msg: str) -> ExprSyntaxError:
        return ExprSyntaxError(self.src, self._peek()[2], msg)

    def parse(self) -> ExprAst:
        if not self.tokens:
            raise self._error('empty expression')
        ast = self._expr()
        kind, text, _ = self._peek()
        if kind != 'end':
            raise self._error(f'unexpected {text!r}')
        return ast

    def _expr(self) -> ExprAst:
        ast = self._term()
        while self._peek()[1] in ('+', '-'):
            op = self.tokens[self.pos][1]
            self.pos += 1
            rhs = self._term()
            ast = Add(ast, rhs) if op == '+' else Sub(ast, rhs)
        return ast

    def _term(self) -> ExprAst:
        ast = self._unary()
        while self._peek()[1] in ('*', '/'):
            op = self.tokens[self.pos][1]
            self.pos += 1
            rhs = self._unary()
            ast = Mul(ast, rhs) if op == '*' else Div(ast, rhs)
        return ast

    def _unary(self) -> ExprAst:
        kind, text, _ = self._peek()
        if text == '-':
            self.pos += 1
            if self._peek()[0] == 'num':
                _, num, _ = self._peek()
                self.pos += 1
                return Const(-float(num))
            return Neg(self._unary())
        return self._atom()

    def _atom(self) -> ExprAst:
        kind, text, _ = self._peek()
        if kind == 'num':
            self.pos += 1
            return Const(float(text))
        if kind == 'var':
            index = int(text.lstrip('x_'))
            if index < 1:
                raise self._error('variables are numbered from 1')
            self.pos += 1
            return Var(index)
        if text == '(':
            self.pos += 1
            ast = self._expr()
            if self._peek()[1] != ')':
                raise self._error("expected ')'")
            self.pos += 1
            return ast
        if kind == 'end':
            raise self._error('unexpected end of expression')
        raise self._error(f'unexpected {text!r}')


def parse_expr(src: str) -> ExprAst:
    """Parse an arithmetic expression.

    Args:
        src: the source string.
    Returns:
        the expression tree.
    Raises:
        ExprSyntaxError: with the 1-based column of the offending token.
    """
    return _Parser(src).parse()


def print_expr(ast: ExprAst) -> str:
    """Fully parenthesised source form, :func:`parse_expr` inverts it."""
    if isinstance(ast, Const):
        return repr(ast.value)
    if isinstance(ast, Var):
        return f'x{ast.index}'
    if isinstance(ast, Neg):
        return f'-({print_expr(ast.operand)})'
    ops = {Add: '+', Sub: '-', Mul: '*', Div: '/'}
    return (f'({print_expr(ast.left)} {ops[type(ast)]} '
            f'{print_expr(ast.right)})')


def max_index(ast: ExprAst) -> int:
    """Largest variable index appearing in the expression (0 if none)."""
    if isinstance(ast, Const):
        return 0
    if isinstance(ast, Var):
        return ast.index
    if isinstance(ast, Neg):
        return max_index(ast.operand)
    return max(max_index(ast.left), max_index(ast.right))


def evaluate(ast: ExprAst, x: ndarray) -> ndarray:
    """Evaluate an expression on points.

    Args:
        ast: the expression tree.
        x: array of shape (..., d).
    Returns:
        array of shape x.shape[:-1].
    Raises:
        ExprEvaluationError: on division by zero or missing coordinates.
    """
    if isinstance(ast, Const):
        return np.full(x.shape[:-1], ast.value)
    if isinstance(ast, Var):
        if ast.index > x.shape[-1]:
            raise ExprEvaluationError(
                print_expr(ast), f'point has only {x.shape[-1]} coordinates')
        return np.asarray(x[..., ast.index - 1], dtype=float)
    if isinstance(ast, Neg):
        return -evaluate(ast.operand, x)
    left = evaluate(ast.left, x)
    right = evaluate(ast.right, x)
    if isinstance(ast, Add):
        return left + right
    if isinstance(ast, Sub):
        return left - right
    if isinstance(ast, Mul):
        return left * right
    if np.any(right == 0):
        raise ExprEvaluationError(print_expr(ast), 'division by zero')
    return left / right
