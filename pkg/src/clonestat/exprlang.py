"""Arithmetic expressions over named parameters, e.g. ``theta7/theta9``.

Used to test estimability of parameter combinations by evaluating an
expression over every stored posterior draw.  Grammar (loosest to
tightest): ``+ -``, ``* /``, unary ``-``, ``^`` (right-associative), so
``-2^2`` is ``-(2^2) = -4``.  Functions: log, exp, sqrt, abs.

Arithmetic that is undefined at a particular binding (division by zero,
log of a non-positive number, overflow) evaluates to ``None`` — a flagged
non-value the caller can count — while structural problems (unknown
variable) raise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

__all__ = [
    "ExprSyntaxError",
    "UnboundVariableError",
    "Expression",
    "parse",
    "evaluate",
    "evaluate_array",
    "free_vars",
    "pretty",
]

FUNCTIONS = ("log", "exp", "sqrt", "abs")

_TOKEN_RE = re.compile(
    r"""
    (?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnboundVariableError(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f"unbound variable {self.name!r}"


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expression"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"


Expression = Union[Num, Var, Neg, BinOp, Call]


def _tokenize(text: str):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        if m.lastgroup == "num":
            tokens.append(("num", m.group(), pos))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group(), pos))
        else:
            tokens.append((m.group(), m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str):
        tok = self.peek()
        if tok[0] != kind:
            raise ExprSyntaxError(f"expected {kind!r}, found {tok[1] or 'end of input'!r}", tok[2])
        return self.advance()

    def parse_expression(self) -> Expression:
        node = self.parse_term()
        while self.peek()[0] in ("+", "-"):
            op = self.advance()[0]
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expression:
        node = self.parse_unary()
        while self.peek()[0] in ("*", "/"):
            op = self.advance()[0]
            node = BinOp(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> Expression:
        if self.peek()[0] == "-":
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_atom()
        if self.peek()[0] == "^":
            self.advance()
            # right-associative; exponent may carry its own unary minus
            return BinOp("^", base, self.parse_unary())
        return base

    def parse_atom(self) -> Expression:
        tok = self.peek()
        if tok[0] == "num":
            self.advance()
            return Num(float(tok[1]))
        if tok[0] == "name":
            self.advance()
            if self.peek()[0] == "(":
                if tok[1] not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {tok[1]!r}", tok[2])
                self.advance()
                arg = self.parse_expression()
                self.expect(")")
                return Call(tok[1], arg)
            return Var(tok[1])
        if tok[0] == "(":
            self.advance()
            node = self.parse_expression()
            self.expect(")")
            return node
        raise ExprSyntaxError(f"expected a value, found {tok[1] or 'end of input'!r}", tok[2])


def parse(text: str) -> Expression:
    """Parse an expression string; raises ExprSyntaxError with byte offset."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    parser = _Parser(text)
    node = parser.parse_expression()
    tok = parser.peek()
    if tok[0] != "end":
        raise ExprSyntaxError(f"unexpected trailing input {tok[1]!r}", tok[2])
    return node


def evaluate(expr: Expression, bindings: Mapping[str, float]):
    """Evaluate to a float, or None where the arithmetic is undefined."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        if expr.name not in bindings:
            raise UnboundVariableError(expr.name)
        return float(bindings[expr.name])
    if isinstance(expr, Neg):
        val = evaluate(expr.arg, bindings)
        return None if val is None else -val
    if isinstance(expr, Call):
        val = evaluate(expr.arg, bindings)
        if val is None:
            return None
        try:
            if expr.func == "log":
                return math.log(val) if val > 0.0 else None
            if expr.func == "exp":
                return math.exp(val)
            if expr.func == "sqrt":
                return math.sqrt(val) if val >= 0.0 else None
            return abs(val)
        except OverflowError:
            return None
    if isinstance(expr, BinOp):
        left = evaluate(expr.left, bindings)
        right = evaluate(expr.right, bindings)
        if left is None or right is None:
            return None
        try:
            if expr.op == "+":
                out = left + right
            elif expr.op == "-":
                out = left - right
            elif expr.op == "*":
                out = left * right
            elif expr.op == "/":
                if right == 0.0:
                    return None
                out = left / right
            else:
                out = left ** right
        except (OverflowError, ZeroDivisionError, ValueError):
            return None
        if isinstance(out, complex) or not math.isfinite(out):
            return None
        return out
    raise TypeError(f"not an expression node: {expr!r}")


def evaluate_array(expr: Expression, bindings: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized evaluation; undefined entries come back as NaN.

    Semantics match :func:`evaluate` applied elementwise, with every
    flagged non-value encoded as NaN.
    """
    with np.errstate(all="ignore"):
        out = np.asarray(_eval_array(expr, bindings), dtype=float)
    out = np.where(np.isfinite(out), out, np.nan)
    return out


def _eval_array(expr: Expression, bindings: Mapping[str, np.ndarray]):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        if expr.name not in bindings:
            raise UnboundVariableError(expr.name)
        return np.asarray(bindings[expr.name], dtype=float)
    if isinstance(expr, Neg):
        return -_eval_array(expr.arg, bindings)
    if isinstance(expr, Call):
        val = np.asarray(_eval_array(expr.arg, bindings), dtype=float)
        if expr.func == "log":
            return np.where(val > 0.0, np.log(np.where(val > 0.0, val, 1.0)), np.nan)
        if expr.func == "exp":
            return np.exp(val)
        if expr.func == "sqrt":
            return np.where(val >= 0.0, np.sqrt(np.abs(val)), np.nan)
        return np.abs(val)
    if isinstance(expr, BinOp):
        left = _eval_array(expr.left, bindings)
        right = _eval_array(expr.right, bindings)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "/":
            right = np.asarray(right, dtype=float)
            return np.where(right != 0.0, left / np.where(right != 0.0, right, 1.0), np.nan)
        base = np.asarray(left, dtype=float)
        power = np.power(np.abs(base), right)
        # negative base: only defined when the scalar path is (integer exponent);
        # handled conservatively by flagging mismatches against the scalar rule.
        out = np.where(base >= 0.0, power, _neg_base_pow(base, right))
        return out
    raise TypeError(f"not an expression node: {expr!r}")


def _neg_base_pow(base, exponent):
    base = np.asarray(base, dtype=float)
    exponent = np.broadcast_to(np.asarray(exponent, dtype=float), base.shape)
    integral = exponent == np.round(exponent)
    mag = np.power(np.abs(base), exponent)
    sign = np.where(np.mod(np.round(exponent), 2) == 0, 1.0, -1.0)
    return np.where(integral, sign * mag, np.nan)


def free_vars(expr: Expression) -> frozenset:
    """Exact set of variable identifiers appearing in the tree."""
    if isinstance(expr, Num):
        return frozenset()
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    if isinstance(expr, Neg):
        return free_vars(expr.arg)
    if isinstance(expr, Call):
        return free_vars(expr.arg)
    if isinstance(expr, BinOp):
        return free_vars(expr.left) | free_vars(expr.right)
    raise TypeError(f"not an expression node: {expr!r}")


def pretty(expr: Expression) -> str:
    """Fully parenthesized rendering; reparses to an identical tree."""
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return f"(-{pretty(expr.arg)})"
    if isinstance(expr, Call):
        return f"{expr.func}({pretty(expr.arg)})"
    if isinstance(expr, BinOp):
        return f"({pretty(expr.left)}{expr.op}{pretty(expr.right)})"
    raise TypeError(f"not an expression node: {expr!r}")
