"""Small expression language for drivers, terminal values and obstacles.

Grammar (lowest to highest precedence)::

    expr    := product (("+" | "-") product)*
    product := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" expr ("," expr)* ")" | "(" expr ")"

Functions: abs, exp, log, min, max, sq, tanh. There is no unary plus.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DriverError, DriverSyntaxError

FUNCTIONS = {
    "abs": (1, np.abs),
    "exp": (1, np.exp),
    "log": (1, np.log),
    "sq": (1, np.square),
    "tanh": (1, np.tanh),
    "min": (2, np.minimum),
    "max": (2, np.maximum),
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Node", ...]


Node = Union[Num, Var, Unary, Binary, Call]


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, op, end
    text: str
    line: int
    column: int
    index: int


_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),])"
)


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise DriverSyntaxError(f"unexpected character {text[pos]!r}", line, col, len(tokens) + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind != "ws":
            tokens.append(Token(kind, m.group(), line, col, len(tokens) + 1))
        pos = m.end()
    tokens.append(Token("end", "", line, len(text) - line_start + 1, len(tokens) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, msg: str) -> DriverSyntaxError:
        t = self.tok
        found = "end of input" if t.kind == "end" else repr(t.text)
        return DriverSyntaxError(f"{msg}, found {found}", t.line, t.column, t.index)

    def eat(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind not in ("op",):
            raise self.error(f"expected {text!r}")
        self.i += 1

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.error("expected operator or end of input")
        return node

    def expr(self) -> Node:
        node = self.product()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            node = Binary(op, node, self.product())
        return node

    def product(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.i += 1
            return Unary("-", self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.i += 1
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "name":
            self.i += 1
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise DriverSyntaxError(f"unknown function {t.text!r}", t.line, t.column, t.index)
                self.i += 1
                args = [self.expr()]
                while self.tok.kind == "op" and self.tok.text == ",":
                    self.i += 1
                    args.append(self.expr())
                self.eat(")")
                arity = FUNCTIONS[t.text][0]
                if len(args) != arity:
                    raise DriverSyntaxError(
                        f"{t.text} takes {arity} argument(s), got {len(args)}", t.line, t.column, t.index)
                return Call(t.text, tuple(args))
            if t.text in FUNCTIONS:
                raise DriverSyntaxError(f"function {t.text!r} used without arguments", t.line, t.column, t.index)
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            self.i += 1
            node = self.expr()
            self.eat(")")
            return node
        raise self.error("expected a number, name or '('")


def parse_driver(text: str) -> Node:
    """Parse an expression string into an AST; raises DriverSyntaxError with its position."""
    return _Parser(text).parse()


def to_text(node: Node) -> str:
    """Fully parenthesised text that parses back to an equal AST."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{to_text(node.operand)})"
    if isinstance(node, Binary):
        return f"({to_text(node.left)} {node.op} {to_text(node.right)})"
    return f"{node.fn}({', '.join(to_text(a) for a in node.args)})"


def variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return variables(node.operand)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    if isinstance(node, Call):
        return set().union(*(variables(a) for a in node.args))
    return set()


def evaluate(node: Node, env: Mapping[str, object]):
    """Vectorised evaluation; ``env`` maps names to scalars or numpy arrays."""
    return compile_expr(node)(env)


def compile_expr(node: Node):
    """Turn an AST into a callable ``env -> value`` (evaluated with FP warnings silenced)."""
    inner = _compile(node)

    def run(env):
        with np.errstate(all="ignore"):
            return inner(env)

    return run


def _compile(node: Node):
    if isinstance(node, Num):
        value = node.value
        return lambda env: value
    if isinstance(node, Var):
        name = node.name

        def var(env):
            try:
                return env[name]
            except KeyError:
                raise DriverError(f"unbound variable {name!r}") from None

        return var
    if isinstance(node, Unary):
        operand = _compile(node.operand)
        return lambda env: -operand(env)
    if isinstance(node, Binary):
        left, right = _compile(node.left), _compile(node.right)
        if node.op == "+":
            return lambda env: left(env) + right(env)
        if node.op == "-":
            return lambda env: left(env) - right(env)
        if node.op == "*":
            return lambda env: left(env) * right(env)
        if node.op == "/":
            def div(env):
                a, b = left(env), right(env)
                zero = np.asarray(b) == 0
                if np.any(zero):
                    raise DriverError("division by zero", _first(zero))
                return a / b

            return div

        def power(env):
            a, b = left(env), right(env)
            out = np.power(np.asarray(a, dtype=float), b)
            if not np.all(np.isfinite(out)) and np.all(np.isfinite(a)):
                raise DriverError("power undefined", _first(~np.isfinite(out)))
            return out

        return power
    fn = FUNCTIONS[node.fn][1]
    args = [_compile(a) for a in node.args]
    if node.fn == "log":
        arg = args[0]

        def log(env):
            x = arg(env)
            bad = np.asarray(x) <= 0
            if np.any(bad):
                raise DriverError("log of non-positive value", _first(bad))
            return fn(x)

        return log
    if len(args) == 1:
        arg = args[0]
        return lambda env: fn(arg(env))
    return lambda env: fn(*(a(env) for a in args))


def _first(mask) -> int | None:
    mask = np.atleast_1d(mask)
    idx = np.flatnonzero(mask)
    return int(idx[0]) if idx.size and mask.size > 1 else None
