"""Recursive-descent parser and evaluator for log-density expressions.

Grammar (``^`` is right-associative; unary minus binds looser than ``^``)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('+' | '-') unary | power
    power   := atom ('^' unary)?
    atom    := NUMBER | NAME | FUNC '(' expr (',' expr)* ')' | '(' expr ')'

Names: ``x``, ``th1`` .. ``thn``, ``pi``, ``e``.  Functions: ``exp log sqrt abs``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import DomainError, EvaluationError, ParseError

FUNCTIONS = {"exp": 1, "log": 1, "sqrt": 1, "abs": 1}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


@dataclass(frozen=True)
class Num:
    text: str
    pos: int = 0

    @property
    def value(self) -> float:
        return float(self.text)


@dataclass(frozen=True)
class Name:
    name: str
    pos: int = 0


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"
    pos: int = 0


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"
    pos: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    pos: int = 0


@dataclass(frozen=True)
class Group:
    inner: "Node"
    pos: int = 0


Node = Union[Num, Name, Unary, Binary, Call, Group]


def _line_col(src: str, pos: int):
    line = src.count("\n", 0, pos) + 1
    col = pos - (src.rfind("\n", 0, pos) + 1) + 1
    return line, col


def tokenize(src: str) -> list[Token]:
    toks, pos = [], 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", *_line_col(src, pos), pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(Token(kind, m.group(), pos))
        pos = m.end()
    toks.append(Token("eof", "", len(src)))
    return toks


class Parser:
    def __init__(self, src: str, n: int, allow_x: bool = True):
        self.src = src
        self.names = {f"th{i}" for i in range(1, n + 1)} | set(CONSTANTS)
        if allow_x:
            self.names.add("x")
        self.toks = tokenize(src)
        self.i = 0
        self.last_op: Token | None = None

    def error(self, msg, pos):
        raise ParseError(msg, *_line_col(self.src, pos), pos)

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def take(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def accept(self, *ops) -> Token | None:
        if self.tok.kind == "op" and self.tok.text in ops:
            self.last_op = self.tok
            return self.take()
        return None

    def expect(self, op):
        if not self.accept(op):
            self.error(f"expected {op!r}, found {self.tok.text or 'end of input'!r}", self.tok.pos)

    def parse(self) -> Node:
        if not self.src.strip():
            self.error("empty expression", 0)
        node = self.expr()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}", self.tok.pos)
        return node

    def expr(self):
        node = self.term()
        while (op := self.accept("+", "-")) is not None:
            node = Binary(op.text, node, self.term(), op.pos)
        return node

    def term(self):
        node = self.unary()
        while (op := self.accept("*", "/")) is not None:
            node = Binary(op.text, node, self.unary(), op.pos)
        return node

    def unary(self):
        if (op := self.accept("+", "-")) is not None:
            return Unary(op.text, self.unary(), op.pos)
        return self.power()

    def power(self):
        node = self.atom()
        if (op := self.accept("^")) is not None:
            node = Binary("^", node, self.unary(), op.pos)
        return node

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.take()
            return Num(t.text, t.pos)
        if t.kind == "name":
            self.take()
            if t.text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[t.text]:
                    self.error(f"{t.text} takes {FUNCTIONS[t.text]} argument(s), got {len(args)}", t.pos)
                return Call(t.text, args[0], t.pos)
            if t.text not in self.names:
                self.error(f"unknown identifier {t.text!r}", t.pos)
            return Name(t.text, t.pos)
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return Group(inner, t.pos)
        if t.kind == "eof":
            pos = self.last_op.pos if self.last_op is not None else t.pos
            what = f"dangling operator {self.last_op.text!r}" if self.last_op is not None else "missing operand"
            self.error(what, pos)
        self.error(f"unexpected {t.text!r}", t.pos)


def parse(src: str, n: int, allow_x: bool = True) -> Node:
    """Parse ``src`` over ``x`` and ``th1..thn``; raises :class:`ParseError` with position."""
    return Parser(src, n, allow_x).parse()


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return 3
    return 5


def to_source(node: Node) -> str:
    """Render a tree; parenthesised groups from the source are kept verbatim."""
    if isinstance(node, Num):
        return node.text
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Group):
        return f"({to_source(node.inner)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Unary):
        inner = to_source(node.operand)
        return f"{node.op}({inner})" if _prec(node.operand) < 3 else f"{node.op}{inner}"
    p = _PREC[node.op]
    left, right = to_source(node.left), to_source(node.right)
    if node.op == "^":
        if _prec(node.left) <= 4:
            left = f"({left})"
        if _prec(node.right) < 3:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    sep = " " if node.op in "+-" else ""
    return f"{left}{sep}{node.op}{sep}{right}"


def _guard(ok, what):
    if not np.all(ok):
        raise DomainError(what)


def _call(func, a):
    if func == "log":
        _guard(a > 0, "log of a non-positive value")
        return np.log(a)
    if func == "sqrt":
        _guard(a >= 0, "sqrt of a negative value")
        return np.sqrt(a)
    if func == "exp":
        return np.exp(a)
    return np.abs(a)


def compile_expr(node: Node) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Vectorised evaluator ``f(x, theta)``; raises :class:`DomainError` outside the domain."""

    def build(nd):
        if isinstance(nd, Num):
            v = nd.value
            return lambda x, th: v
        if isinstance(nd, Name):
            if nd.name == "x":
                return lambda x, th: x
            if nd.name in CONSTANTS:
                c = CONSTANTS[nd.name]
                return lambda x, th: c
            k = int(nd.name[2:]) - 1
            return lambda x, th: th[k]
        if isinstance(nd, Group):
            return build(nd.inner)
        if isinstance(nd, Call):
            f = build(nd.arg)
            return lambda x, th: _call(nd.func, np.asarray(f(x, th), dtype=float))
        if isinstance(nd, Unary):
            f = build(nd.operand)
            return (lambda x, th: -f(x, th)) if nd.op == "-" else f
        lf, rf = build(nd.left), build(nd.right)
        if nd.op == "+":
            return lambda x, th: lf(x, th) + rf(x, th)
        if nd.op == "-":
            return lambda x, th: lf(x, th) - rf(x, th)
        if nd.op == "*":
            return lambda x, th: lf(x, th) * rf(x, th)
        if nd.op == "/":
            def div(x, th):
                d = np.asarray(rf(x, th), dtype=float)
                _guard(d != 0, "division by zero")
                return lf(x, th) / d
            return div

        def pw(x, th):
            b = np.asarray(lf(x, th), dtype=float)
            r = np.asarray(rf(x, th), dtype=float)
            _guard((b > 0) | ((b == 0) & (r > 0)) | ((b < 0) & (r == np.round(r))),
                   "power with a negative base and non-integer exponent")
            return np.power(b, r)
        return pw

    f = build(node)

    def evaluate(x, theta):
        with np.errstate(all="ignore"):
            out = np.asarray(f(np.asarray(x, dtype=float), np.asarray(theta, dtype=float)), dtype=float)
        if not np.all(np.isfinite(out)):
            raise EvaluationError("expression evaluated to a non-finite value")
        return out

    return evaluate


@dataclass(frozen=True)
class DensityExpression:
    """A parsed log-density over ``x`` and ``th1..thn``."""

    source: str
    n: int
    tree: Node

    @classmethod
    def parse(cls, src: str, n: int) -> "DensityExpression":
        return cls(src, n, parse(src, n))

    def __str__(self):
        return to_source(self.tree)

    def compile(self):
        return compile_expr(self.tree)
