"""Parser and evaluator for the scalar drift/diffusion expression language.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := ("-")? power
    power  := atom ("^" factor)?
    atom   := number | "x" | ident "(" expr ")" | "(" expr ")"

Expressions are immutable trees.  They evaluate either at a single float
(:func:`evaluate`) or elementwise over a numpy array (:meth:`Expr.evaluate_array`);
both paths report domain problems and overflow as :class:`ExprDomainError`
instead of returning non-finite values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprError",
    "ExprSyntaxError",
    "UnknownIdentifierError",
    "ExprDomainError",
    "parse",
    "evaluate",
    "FUNCTIONS",
]


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, text: str, offset: int, expected: set[str]):
        self.text = text
        # offsets are reported in bytes of the UTF-8 encoding
        self.offset = len(text[:offset].encode("utf-8"))
        self.expected = frozenset(expected)
        found = text[offset:offset + 10] or "end of input"
        super().__init__(
            f"syntax error at byte {self.offset}: found {found!r}, "
            f"expected one of {sorted(self.expected)}"
        )


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at byte {offset}")


class ExprDomainError(ExprError, ArithmeticError):
    """Raised when a sub-expression has no finite real value at ``x``."""

    def __init__(self, node: "Expr", x: float, reason: str):
        self.node = node
        self.x = x
        self.reason = reason
        super().__init__(f"{reason} in {node.to_text()} at x={x!r}")


def _check(node, x, value):
    if not math.isfinite(value):
        raise ExprDomainError(node, x, "overflow")
    return value


FUNCTIONS: dict[str, tuple[Callable[[float], float], Callable]] = {
    "exp": (math.exp, np.exp),
    "log": (math.log, np.log),
    "sqrt": (math.sqrt, np.sqrt),
    "abs": (abs, np.abs),
    "sin": (math.sin, np.sin),
    "cos": (math.cos, np.cos),
    "tanh": (math.tanh, np.tanh),
}

_OPS = "+-*/^"


class Expr:
    """Base class of expression nodes."""

    def evaluate(self, x: float) -> float:
        return self._fn(float(x))

    def evaluate_array(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        with np.errstate(all="ignore"):
            return self._array(xs)

    def to_text(self) -> str:
        raise NotImplementedError

    def is_constant(self) -> bool:
        raise NotImplementedError

    def _first_bad(self, xs: np.ndarray, bad: np.ndarray) -> float:
        return float(np.broadcast_to(xs, bad.shape)[bad][0])

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Num(Expr):
    value: float
    _fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or v < 0:
            raise ValueError("numeric literals are finite and nonnegative")
        object.__setattr__(self, "value", v)
        object.__setattr__(self, "_fn", lambda x: v)

    def _array(self, xs):
        return np.full(xs.shape, self.value)

    def to_text(self) -> str:
        return repr(self.value)

    def is_constant(self) -> bool:
        return True


@dataclass(frozen=True)
class Var(Expr):
    _fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_fn", lambda x: x)

    def _array(self, xs):
        return xs

    def to_text(self) -> str:
        return "x"

    def is_constant(self) -> bool:
        return False


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr
    _fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        f = self.operand._fn
        object.__setattr__(self, "_fn", lambda x: -f(x))

    def _array(self, xs):
        return -self.operand._array(xs)

    def to_text(self) -> str:
        return f"(-{self.operand.to_text()})"

    def is_constant(self) -> bool:
        return self.operand.is_constant()


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr
    _fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown operator {self.op!r}")
        lf, rf, node = self.left._fn, self.right._fn, self
        if self.op == "+":
            fn = lambda x: _check(node, x, lf(x) + rf(x))
        elif self.op == "-":
            fn = lambda x: _check(node, x, lf(x) - rf(x))
        elif self.op == "*":
            fn = lambda x: _check(node, x, lf(x) * rf(x))
        elif self.op == "/":
            def fn(x):
                den = rf(x)
                if den == 0.0:
                    raise ExprDomainError(node, x, "division by zero")
                return _check(node, x, lf(x) / den)
        else:
            def fn(x):
                base, expo = lf(x), rf(x)
                try:
                    return _check(node, x, math.pow(base, expo))
                except OverflowError:
                    raise ExprDomainError(node, x, "overflow") from None
                except (ValueError, ZeroDivisionError):
                    raise ExprDomainError(node, x, "power outside real domain") from None
        object.__setattr__(self, "_fn", fn)

    def _array(self, xs):
        lv, rv = self.left._array(xs), self.right._array(xs)
        if self.op == "+":
            out = lv + rv
        elif self.op == "-":
            out = lv - rv
        elif self.op == "*":
            out = lv * rv
        elif self.op == "/":
            zero = np.asarray(rv == 0.0)
            if zero.any():
                raise ExprDomainError(self, self._first_bad(xs, zero), "division by zero")
            out = lv / rv
        else:
            out = np.power(lv, rv)
            bad = np.asarray(np.isnan(out))
            if bad.any():
                raise ExprDomainError(self, self._first_bad(xs, bad), "power outside real domain")
        bad = np.asarray(~np.isfinite(out))
        if bad.any():
            raise ExprDomainError(self, self._first_bad(xs, bad), "overflow")
        return out

    def to_text(self) -> str:
        return f"({self.left.to_text()} {self.op} {self.right.to_text()})"

    def is_constant(self) -> bool:
        return self.left.is_constant() and self.right.is_constant()


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr
    _fn: Callable = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ValueError(f"unknown function {self.func!r}")
        scalar = FUNCTIONS[self.func][0]
        af, node, name = self.arg._fn, self, self.func

        def fn(x):
            v = af(x)
            if name == "log" and v <= 0.0:
                raise ExprDomainError(node, x, "log of nonpositive value")
            if name == "sqrt" and v < 0.0:
                raise ExprDomainError(node, x, "sqrt of negative value")
            try:
                return _check(node, x, scalar(v))
            except OverflowError:
                raise ExprDomainError(node, x, "overflow") from None

        object.__setattr__(self, "_fn", fn)

    def _array(self, xs):
        v = self.arg._array(xs)
        if self.func == "log":
            bad = np.asarray(v <= 0.0)
            if bad.any():
                raise ExprDomainError(self, self._first_bad(xs, bad), "log of nonpositive value")
        elif self.func == "sqrt":
            bad = np.asarray(v < 0.0)
            if bad.any():
                raise ExprDomainError(self, self._first_bad(xs, bad), "sqrt of negative value")
        out = FUNCTIONS[self.func][1](v)
        bad = np.asarray(~np.isfinite(out))
        if bad.any():
            raise ExprDomainError(self, self._first_bad(xs, bad), "overflow")
        return out

    def to_text(self) -> str:
        return f"{self.func}({self.arg.to_text()})"

    def is_constant(self) -> bool:
        return self.arg.is_constant()


def evaluate(e: Expr, x: float) -> float:
    return e.evaluate(x)


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()]))"
)


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, str, int]] = []
        pos = 0
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                if text[pos:].strip() == "":
                    break
                off = pos + len(text[pos:]) - len(text[pos:].lstrip())
                raise ExprSyntaxError(text, off, {"number", "x", "function", "(", "-"})
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind)))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, expected):
        raise ExprSyntaxError(self.text, self.peek()[2], set(expected))

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.power())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        kind, val, off = self.peek()
        if kind == "num":
            self.take()
            return Num(float(val))
        if kind == "ident":
            self.take()
            if val == "x":
                return Var()
            if val not in FUNCTIONS:
                raise UnknownIdentifierError(val, off)
            if self.peek()[1] != "(":
                self.fail({"("})
            self.take()
            inner = self.expr()
            if self.peek()[1] != ")":
                self.fail({")", "+", "-", "*", "/", "^"})
            self.take()
            return Call(val, inner)
        if kind == "op" and val == "(":
            self.take()
            inner = self.expr()
            if self.peek()[1] != ")":
                self.fail({")", "+", "-", "*", "/", "^"})
            self.take()
            return inner
        self.fail({"number", "x", "function", "("})


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises :class:`ExprSyntaxError` (with byte offset and expected-token set)
    or :class:`UnknownIdentifierError`.  Implicit multiplication such as
    ``2x`` is rejected.
    """
    if not text or not text.strip():
        raise ExprSyntaxError(text or "", 0, {"number", "x", "function", "(", "-"})
    p = _Parser(text)
    node = p.expr()
    if p.peek()[0] != "end":
        p.fail({"+", "-", "*", "/", "^", "end of input"})
    return node
