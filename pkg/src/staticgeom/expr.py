"""Scalar expressions over chart coordinates.

Expressions are parsed once into an immutable tree and evaluated either as
plain floats or as second-order jets (value, gradient, Hessian) using
Taylor arithmetic, so every derivative the curvature code consumes is exact
up to roundoff.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('-' | '+') unary | power
    power  := atom ('^' unary)?          # right-associative, binds tighter than unary minus
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh", "abs")
CONSTANTS = {"pi": math.pi}


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    def __init__(self, source: str, offset: int, expected: Iterable[str], found: str):
        self.source = source
        self.offset = offset
        self.expected = frozenset(expected)
        self.found = found
        exp = ", ".join(sorted(self.expected))
        super().__init__(f"syntax error at offset {offset}: found {found!r}, expected one of {{{exp}}}")


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier {name!r} at offset {offset}")


class UnboundParameterError(ExprError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"parameter {name!r} is not bound")


class ExprDomainError(ExprError):
    """Raised when evaluation leaves the real domain of an operation."""

    def __init__(self, message: str, node: Node):
        self.node = node
        self.offset = getattr(node, "offset", -1)
        super().__init__(f"{message} in '{to_source(node)}' (offset {self.offset})")


# ---------------------------------------------------------------------------
# Jets


@dataclass(frozen=True)
class Jet2:
    """Second-order Taylor value of a scalar at a point."""

    value: float
    grad: np.ndarray
    hess: np.ndarray

    @classmethod
    def constant(cls, value: float, dim: int) -> Jet2:
        return cls(float(value), np.zeros(dim), np.zeros((dim, dim)))

    @classmethod
    def variable(cls, value: float, index: int, dim: int) -> Jet2:
        g = np.zeros(dim)
        g[index] = 1.0
        return cls(float(value), g, np.zeros((dim, dim)))

    def compose(self, f0: float, f1: float, f2: float) -> Jet2:
        # chain rule for a univariate function with derivatives f0, f1, f2 at self.value
        g = self.grad
        return Jet2(f0, f1 * g, f1 * self.hess + f2 * np.outer(g, g))

    def __add__(self, other: Jet2) -> Jet2:
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: Jet2) -> Jet2:
        return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __mul__(self, other: Jet2) -> Jet2:
        a, b = self.value, other.value
        ga, gb = self.grad, other.grad
        return Jet2(
            a * b,
            a * gb + b * ga,
            a * other.hess + b * self.hess + (np.outer(ga, gb) + np.outer(gb, ga)),
        )

    def scale(self, c: float) -> Jet2:
        return Jet2(c * self.value, c * self.grad, c * self.hess)

    def __neg__(self) -> Jet2:
        return Jet2(-self.value, -self.grad, -self.hess)


# ---------------------------------------------------------------------------
# Expression tree


class Node:
    """Base class of expression nodes. Trees are immutable."""

    # programmatic construction, used when assembling space-time fields
    def __add__(self, other):
        return Binary("+", self, _lift(other))

    def __radd__(self, other):
        return Binary("+", _lift(other), self)

    def __sub__(self, other):
        return Binary("-", self, _lift(other))

    def __rsub__(self, other):
        return Binary("-", _lift(other), self)

    def __mul__(self, other):
        return Binary("*", self, _lift(other))

    def __rmul__(self, other):
        return Binary("*", _lift(other), self)

    def __truediv__(self, other):
        return Binary("/", self, _lift(other))

    def __rtruediv__(self, other):
        return Binary("/", _lift(other), self)

    def __pow__(self, other):
        return Binary("^", self, _lift(other))

    def __neg__(self):
        return Unary("neg", self)

    @cached_property
    def coordinates(self) -> frozenset[str]:
        return frozenset(n.name for n in _walk(self) if isinstance(n, Coord))

    @property
    def parameters(self) -> frozenset[str]:
        return frozenset(n.name for n in _walk(self) if isinstance(n, Param))

    @cached_property
    def is_constant(self) -> bool:
        return not self.coordinates

    def __str__(self) -> str:
        return to_source(self)


def _lift(x) -> Node:
    if isinstance(x, Node):
        return x
    return Const(float(x))


@dataclass(frozen=True, eq=True)
class Const(Node):
    value: float


@dataclass(frozen=True, eq=True)
class Coord(Node):
    name: str
    index: int


@dataclass(frozen=True, eq=True)
class Param(Node):
    name: str


@dataclass(frozen=True, eq=True)
class Unary(Node):
    op: str
    arg: Node
    offset: int = field(default=-1, compare=False)


@dataclass(frozen=True, eq=True)
class Binary(Node):
    op: str
    left: Node
    right: Node
    offset: int = field(default=-1, compare=False)


def _walk(node: Node):
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        if isinstance(n, Unary):
            stack.append(n.arg)
        elif isinstance(n, Binary):
            stack.append(n.left)
            stack.append(n.right)


def const(value: float) -> Const:
    return Const(float(value))


def coord(name: str, index: int) -> Coord:
    return Coord(name, index)


def apply(func: str, arg: Node) -> Unary:
    if func not in FUNCTIONS:
        raise ValueError(f"unknown function {func!r}")
    return Unary(func, arg)


def bind(expr: Node, coordinates: Sequence[str]) -> Node:
    """Return ``expr`` with coordinate references re-indexed against ``coordinates``."""
    index = {name: i for i, name in enumerate(coordinates)}
    missing = expr.coordinates - index.keys()
    if missing:
        raise UnknownIdentifierError(sorted(missing)[0], -1)

    def rebuild(n: Node) -> Node:
        if isinstance(n, Coord):
            return Coord(n.name, index[n.name])
        if isinstance(n, Unary):
            return Unary(n.op, rebuild(n.arg), n.offset)
        if isinstance(n, Binary):
            return Binary(n.op, rebuild(n.left), rebuild(n.right), n.offset)
        return n

    return rebuild(expr)


# ---------------------------------------------------------------------------
# Parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass
class _Token:
    kind: str  # num | name | op | end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            pos = n
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(
                source,
                _byte_offset(source, start),
                ("number", "identifier", "operator"),
                source[start],
            )
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append(_Token(kind, m.group(kind), _byte_offset(source, start)))
        pos = m.end()
    tokens.append(_Token("end", "", _byte_offset(source, n)))
    return tokens


def _byte_offset(source: str, char_index: int) -> int:
    return len(source[:char_index].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, coordinates: Sequence[str], params: Iterable[str]):
        self.source = source
        self.tokens = _tokenize(source)
        self.pos = 0
        self.coord_index = {name: i for i, name in enumerate(coordinates)}
        self.params = set(params)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def error(self, expected: Iterable[str]) -> ExprSyntaxError:
        t = self.tok
        return ExprSyntaxError(self.source, t.offset, expected, t.text or "end of input")

    def expect(self, text: str) -> _Token:
        if self.tok.text != text:
            raise self.error((repr(text),))
        t = self.tok
        self.pos += 1
        return t

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error(("operator", "end of input"))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok
            self.pos += 1
            node = Binary(op.text, node, self.term(), op.offset)
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.tok
            self.pos += 1
            node = Binary(op.text, node, self.unary(), op.offset)
        return node

    def unary(self) -> Node:
        t = self.tok
        if t.kind == "op" and t.text == "-":
            self.pos += 1
            return Unary("neg", self.unary(), t.offset)
        if t.kind == "op" and t.text == "+":
            self.pos += 1
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            op = self.tok
            self.pos += 1
            return Binary("^", base, self.unary(), op.offset)
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.pos += 1
            return Const(float(t.text))
        if t.kind == "op" and t.text == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if t.kind == "name":
            self.pos += 1
            name = t.text
            if name in FUNCTIONS:
                if self.tok.text != "(":
                    raise self.error(("'('",))
                self.pos += 1
                arg = self.expr()
                self.expect(")")
                return Unary(name, arg, t.offset)
            if name in self.coord_index:
                return Coord(name, self.coord_index[name])
            if name in self.params:
                return Param(name)
            if name in CONSTANTS:
                return Const(CONSTANTS[name])
            raise UnknownIdentifierError(name, t.offset)
        raise self.error(("number", "identifier", "'('", "'-'"))


def parse(source: str, coordinates: Sequence[str], params: Iterable[str] = ()) -> Node:
    """Parse ``source`` into an expression tree over the given coordinate names."""
    if not source or not source.strip():
        raise ExprSyntaxError(source, 0, ("expression",), "end of input")
    coordinates = list(coordinates)
    if len(set(coordinates)) != len(coordinates):
        raise ValueError(f"coordinate names must be distinct: {coordinates}")
    for name in coordinates:
        if not _IDENT.match(name) or name in FUNCTIONS or name in CONSTANTS:
            raise ValueError(f"invalid coordinate name {name!r}")
    return _Parser(source, coordinates, params).parse()


# ---------------------------------------------------------------------------
# Printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}
_ATOM = 5


def _prec(node: Node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC["neg"]
    if isinstance(node, Const) and (node.value < 0 or math.copysign(1.0, node.value) < 0):
        return 0
    return _ATOM


def to_source(node: Node) -> str:
    """Print an expression so that parsing the text rebuilds the same tree."""
    if isinstance(node, Const):
        if node.value == math.pi:
            return "pi"
        text = repr(node.value)
        return f"({text})" if text.startswith("-") else text
    if isinstance(node, (Coord, Param)):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = to_source(node.arg)
            return f"-({inner})" if _prec(node.arg) < 3 else f"-{inner}"
        return f"{node.op}({to_source(node.arg)})"
    if isinstance(node, Binary):
        p = _PREC[node.op]
        left, right = to_source(node.left), to_source(node.right)
        if node.op == "^":
            if _prec(node.left) <= p:
                left = f"({left})"
            if _prec(node.right) < 3:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# Evaluation


def _param(node: Param, params: Mapping[str, float] | None) -> float:
    if params is None or node.name not in params:
        raise UnboundParameterError(node.name)
    return float(params[node.name])


def _scalar_unary(node: Unary, u: float) -> float:
    op = node.op
    try:
        if op == "neg":
            return -u
        if op == "log":
            if u <= 0.0:
                raise ExprDomainError(f"log of non-positive value {u!r}", node)
            return math.log(u)
        if op == "sqrt":
            if u < 0.0:
                raise ExprDomainError(f"sqrt of negative value {u!r}", node)
            return math.sqrt(u)
        if op == "tan":
            if math.cos(u) == 0.0:
                raise ExprDomainError("tan at a pole", node)
            return math.tan(u)
        if op == "abs":
            return abs(u)
        return getattr(math, op)(u)
    except OverflowError:
        raise ExprDomainError(f"overflow in {op}", node) from None


def _scalar_pow(node: Binary, a: float, b: float) -> float:
    if a < 0.0 and b != int(b):
        raise ExprDomainError(f"negative base {a!r} with non-integer exponent", node)
    if a == 0.0 and b < 0.0:
        raise ExprDomainError("division by zero (zero base, negative exponent)", node)
    try:
        return math.pow(a, b)
    except OverflowError:
        raise ExprDomainError("overflow in power", node) from None


def _scalar(node: Node, point, params) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Coord):
        return float(point[node.index])
    if isinstance(node, Param):
        return _param(node, params)
    if isinstance(node, Unary):
        return _scalar_unary(node, _scalar(node.arg, point, params))
    if isinstance(node, Binary):
        a = _scalar(node.left, point, params)
        b = _scalar(node.right, point, params)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise ExprDomainError("division by zero", node)
            return a / b
        return _scalar_pow(node, a, b)
    raise TypeError(f"not an expression node: {node!r}")


def evaluate(expr: Node, point: Sequence[float], params: Mapping[str, float] | None = None) -> float:
    """Evaluate ``expr`` at ``point`` (a coordinate vector)."""
    return _scalar(expr, point, params)


def _unary_derivs(node: Unary, u: float) -> tuple[float, float, float]:
    op = node.op
    if op == "neg":
        return -u, -1.0, 0.0
    if op == "sin":
        s, c = math.sin(u), math.cos(u)
        return s, c, -s
    if op == "cos":
        s, c = math.sin(u), math.cos(u)
        return c, -s, -c
    if op == "tan":
        t = _scalar_unary(node, u)
        sec2 = 1.0 + t * t
        return t, sec2, 2.0 * t * sec2
    if op == "exp":
        e = _scalar_unary(node, u)
        return e, e, e
    if op == "log":
        if u <= 0.0:
            raise ExprDomainError(f"log of non-positive value {u!r}", node)
        return math.log(u), 1.0 / u, -1.0 / (u * u)
    if op == "sqrt":
        if u <= 0.0:
            raise ExprDomainError(f"sqrt not differentiable at {u!r}", node)
        s = math.sqrt(u)
        return s, 0.5 / s, -0.25 / (s * u)
    if op == "sinh":
        sh, ch = _scalar_unary(node, u), math.cosh(u)
        return sh, ch, sh
    if op == "cosh":
        ch, sh = _scalar_unary(node, u), math.sinh(u)
        return ch, sh, ch
    if op == "tanh":
        th = math.tanh(u)
        d = 1.0 - th * th
        return th, d, -2.0 * th * d
    if op == "abs":
        if u == 0.0:
            raise ExprDomainError("abs is not differentiable at 0", node)
        return abs(u), math.copysign(1.0, u), 0.0
    raise ValueError(f"unknown function {op!r}")


def _pow_derivs(node: Binary, u: float, c: float) -> tuple[float, float, float]:
    if c == 0.0:
        return 1.0, 0.0, 0.0
    if c == 1.0:
        return u, 1.0, 0.0
    if c == 2.0:
        return u * u, 2.0 * u, 2.0
    integer = c == int(c)
    if u < 0.0 and not integer:
        raise ExprDomainError(f"negative base {u!r} with non-integer exponent", node)
    if u == 0.0 and not integer and c < 2.0:
        raise ExprDomainError("power not twice differentiable at zero base", node)
    f0 = _scalar_pow(node, u, c)
    f1 = c * _scalar_pow(node, u, c - 1.0)
    f2 = c * (c - 1.0) * _scalar_pow(node, u, c - 2.0)
    return f0, f1, f2


def _jet(node: Node, point, params, dim: int) -> Jet2:
    if isinstance(node, Coord):
        return Jet2.variable(point[node.index], node.index, dim)
    if node.is_constant:
        return Jet2.constant(_scalar(node, point, params), dim)
    if isinstance(node, Unary):
        a = _jet(node.arg, point, params, dim)
        return a.compose(*_unary_derivs(node, a.value))
    if isinstance(node, Binary):
        op = node.op
        if op == "^" and node.right.is_constant:
            a = _jet(node.left, point, params, dim)
            c = _scalar(node.right, point, params)
            return a.compose(*_pow_derivs(node, a.value, c))
        a = _jet(node.left, point, params, dim)
        b = _jet(node.right, point, params, dim)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b.value == 0.0:
                raise ExprDomainError("division by zero", node)
            v = b.value
            return a * b.compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v))
        # variable exponent: a^b = exp(b log a), requires a > 0
        if a.value <= 0.0:
            raise ExprDomainError(f"non-positive base {a.value!r} with variable exponent", node)
        la = a.compose(math.log(a.value), 1.0 / a.value, -1.0 / (a.value * a.value))
        e = b * la
        try:
            ev = math.exp(e.value)
        except OverflowError:
            raise ExprDomainError("overflow in power", node) from None
        return e.compose(ev, ev, ev)
    raise TypeError(f"not an expression node: {node!r}")


def eval_jet2(expr: Node, point: Sequence[float], params: Mapping[str, float] | None = None) -> Jet2:
    """Value, gradient and Hessian of ``expr`` at ``point`` by Taylor arithmetic."""
    point = [float(x) for x in point]
    return _jet(expr, point, params, len(point))
