"""Scalar field expressions over chart coordinates.

Every metric coefficient is user data.  Coefficients arrive as infix strings such as
``"1 + x1^2"`` or ``"exp(-x2)*sin(x1)"`` and are parsed here into a small
expression tree that evaluates on single points or on whole arrays of points.

Grammar (``^`` binds tightest and is right-associative, unary minus sits
between ``^`` and ``* /``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh", "abs")
BINARY_OPS = ("+", "-", "*", "/", "^")

Span = tuple[int, int]


class ExpressionError(ValueError):
    """Base class for all expression failures."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExpressionSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r}", offset)
        self.name = name


class ExpressionDomainError(ExpressionError):
    """Raised when an expression is evaluated outside its domain.

    ``span`` is the (start, end) byte range of the offending node in the
    source text.
    """

    def __init__(self, message: str, span: Span):
        super().__init__(f"{message} (source span {span[0]}:{span[1]})")
        self.span = span


# -- tree -------------------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    index: int
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Unary:
    fn: str  # "neg" or one of FUNCTIONS
    arg: "Node"
    span: Span = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"
    span: Span = field(default=(0, 0), compare=False)


Node = Union[Const, Var, Unary, Binary]


@dataclass(frozen=True)
class FieldExpr:
    """A parsed expression bound to an ordered list of coordinate names."""

    root: Node
    coords: tuple[str, ...]
    source: str = field(default="", compare=False)

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __call__(self, points) -> np.ndarray:
        """Vectorized evaluation on an ``(m, d)`` array; returns shape ``(m,)``."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(
                f"expected points of shape (m, {self.dim}), got {pts.shape}"
            )
        with np.errstate(all="ignore"):
            out = _eval_node(self.root, pts)
        return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()

    def is_constant(self) -> bool:
        return not _free_vars(self.root)

    def __str__(self) -> str:
        return serialize(self)


# -- tokenizer / parser -----------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExpressionSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, coords: Sequence[str]):
        self.text = text
        self.coords = list(coords)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.advance()
        if text != value or kind == "eof":
            found = "end of input" if kind == "eof" else repr(text)
            raise ExpressionSyntaxError(f"expected {value!r}, found {found}", pos)

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "eof":
            raise ExpressionSyntaxError(f"unexpected token {text!r}", pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            rhs = self.term()
            node = Binary(op, node, rhs, (node.span[0], rhs.span[1]))
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            rhs = self.unary()
            node = Binary(op, node, rhs, (node.span[0], rhs.span[1]))
        return node

    def unary(self) -> Node:
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            arg = self.unary()
            return Unary("neg", arg, (pos, arg.span[1]))
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            exponent = self.unary()
            return Binary("^", base, exponent, (base.span[0], exponent.span[1]))
        return base

    def atom(self) -> Node:
        kind, text, pos = self.advance()
        if kind == "num":
            return Const(float(text), (pos, pos + len(text)))
        if kind == "name":
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                end = self.peek()[2] + 1
                self.expect(")")
                return Unary(text, arg, (pos, end))
            if text in self.coords:
                return Var(text, self.coords.index(text), (pos, pos + len(text)))
            raise UnknownIdentifierError(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "eof" else repr(text)
        raise ExpressionSyntaxError(f"unexpected {found}", pos)


def parse(text: str, coords: Sequence[str]) -> FieldExpr:
    """Parse ``text`` into a :class:`FieldExpr` over ``coords``."""
    if not isinstance(text, str) or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    root = _Parser(text, coords).parse()
    return FieldExpr(root, tuple(coords), text)


def constant(value: float, coords: Sequence[str]) -> FieldExpr:
    return FieldExpr(Const(float(value)), tuple(coords), repr(float(value)))


# -- serialization ----------------------------------------------------------


def _ser(node: Node) -> str:
    if isinstance(node, Const):
        s = repr(node.value)
        return f"({s})" if node.value < 0 else s
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.fn == "neg":
            return f"(-{_ser(node.arg)})"
        return f"{node.fn}({_ser(node.arg)})"
    return f"({_ser(node.left)} {node.op} {_ser(node.right)})"


def serialize(e: FieldExpr) -> str:
    """Fully parenthesized infix text; ``parse(serialize(e))`` rebuilds ``e``."""
    return _ser(e.root)


def substitute(e: FieldExpr, name: str, replacement: Node, coords: Sequence[str]) -> FieldExpr:
    """Replace every variable ``name`` by ``replacement`` and rebind to ``coords``."""
    coords = tuple(coords)

    def walk(node: Node) -> Node:
        if isinstance(node, Var):
            if node.name == name:
                return replacement
            return Var(node.name, coords.index(node.name), node.span)
        if isinstance(node, Unary):
            return Unary(node.fn, walk(node.arg), node.span)
        if isinstance(node, Binary):
            return Binary(node.op, walk(node.left), walk(node.right), node.span)
        return node

    return FieldExpr(walk(e.root), coords, e.source)


def _free_vars(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return _free_vars(node.arg)
    if isinstance(node, Binary):
        return _free_vars(node.left) | _free_vars(node.right)
    return set()


# -- evaluation -------------------------------------------------------------

_UFUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "tanh": np.tanh,
    "abs": np.abs,
}


def _eval_node(node: Node, pts: np.ndarray):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return pts[:, node.index]
    if isinstance(node, Unary):
        a = _eval_node(node.arg, pts)
        if node.fn == "neg":
            return -a
        if node.fn == "log":
            if np.any(np.asarray(a) <= 0):
                raise ExpressionDomainError("log of non-positive value", node.span)
            return np.log(a)
        if node.fn == "sqrt":
            if np.any(np.asarray(a) < 0):
                raise ExpressionDomainError("sqrt of negative value", node.span)
            return np.sqrt(a)
        return _UFUNCS[node.fn](a)
    a = _eval_node(node.left, pts)
    b = _eval_node(node.right, pts)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        if np.any(np.asarray(b) == 0):
            raise ExpressionDomainError("division by zero", node.span)
        return a / b
    out = np.power(a, b)
    if np.any(np.isnan(out) & ~(np.isnan(a) | np.isnan(b))):
        raise ExpressionDomainError("power outside real domain", node.span)
    if np.any(np.isinf(out) & (np.asarray(a) == 0)):
        raise ExpressionDomainError("division by zero", node.span)
    return out


def evaluate(e: FieldExpr, point) -> float:
    """Value of ``e`` at one chart point."""
    p = np.asarray(point, dtype=float).reshape(-1)
    if p.shape[0] != e.dim:
        raise ValueError(f"point has dimension {p.shape[0]}, expected {e.dim}")
    return float(e(p[None, :])[0])


def default_steps(point, base: float = 1e-5) -> np.ndarray:
    p = np.asarray(point, dtype=float)
    return base * np.maximum(1.0, np.abs(p))


def grad_fd(e: FieldExpr, point, h: float | None = None) -> np.ndarray:
    """Central-difference gradient of ``e`` at ``point``.

    With ``h=None`` each coordinate uses ``1e-5 * max(1, |x_i|)``.
    """
    p = np.asarray(point, dtype=float).reshape(-1)
    if h is None:
        steps = default_steps(p)
    else:
        if h <= 0:
            raise ValueError("finite-difference step must be positive")
        steps = np.full(p.shape, float(h))
    d = p.shape[0]
    probes = np.concatenate([p + np.diag(steps), p - np.diag(steps)])
    vals = e(probes)
    return (vals[:d] - vals[d:]) / (2.0 * steps)
