"""Small arithmetic expression language for config-defined vector fields.

Grammar (infix, standard precedence, ``^`` is right-associative power):

    expr    := term (('+'|'-') term)*
    term    := factor (('*'|'/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?
    atom    := number | identifier | identifier '(' expr (',' expr)* ')' | '(' expr ')'

Variables are ``t, x1, x2, eps``; constants ``pi, e``; functions
``sin cos exp log abs sign tri`` (unary) and ``min max mod`` (binary).
``tri`` is a triangle wave of period 2*pi and amplitude 1 (continuous,
kinked at pi/2 + k*pi).

Parsed programs evaluate elementwise on numpy arrays as well as scalars.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ExpressionError

VARIABLES = ("t", "x1", "x2", "eps")
CONSTANTS = {"pi": np.pi, "e": np.e}
UNARY_FUNCTIONS = ("sin", "cos", "exp", "log", "abs", "sign", "tri")
BINARY_FUNCTIONS = ("min", "max", "mod")
FUNCTION_ARITY = {name: 1 for name in UNARY_FUNCTIONS}
FUNCTION_ARITY.update({name: 2 for name in BINARY_FUNCTIONS})


def tri(u):
    """Triangle wave, period 2*pi, amplitude 1, tri(0) = 0, tri(pi/2) = 1."""
    return (2.0 / np.pi) * np.arcsin(np.sin(u))


_NUMPY_FUNCS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": np.log,
    "abs": np.abs,
    "sign": np.sign,
    "tri": tri,
    "min": np.minimum,
    "max": np.maximum,
    "mod": np.mod,
}


@dataclass(frozen=True)
class Node:
    pos: int = field(compare=False)


@dataclass(frozen=True)
class Num(Node):
    value: float = 0.0


@dataclass(frozen=True)
class Const(Node):
    name: str = ""


@dataclass(frozen=True)
class Var(Node):
    name: str = ""


@dataclass(frozen=True)
class Unary(Node):
    op: str = "-"
    operand: Node = None


@dataclass(frozen=True)
class Binary(Node):
    op: str = "+"
    left: Node = None
    right: Node = None


@dataclass(frozen=True)
class Call(Node):
    name: str = ""
    args: tuple = ()


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(src):
    tokens = []
    i = 0
    n = len(src)
    while i < n:
        if src[i].isspace():
            i += 1
            continue
        m = _TOKEN_RE.match(src, i)
        if m is None:
            raise ExpressionError(f"unexpected character {src[i]!r} at offset {i}", offset=i)
        if m.lastgroup == "num":
            tokens.append(("num", m.group("num"), m.start("num")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        i = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, src):
        self.src = src
        self.tokens = _tokenize(src)
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def advance(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect_op(self, op):
        kind, text, pos = self.peek()
        if kind != "op" or text != op:
            raise ExpressionError(f"expected {op!r} at offset {pos}", offset=pos)
        return self.advance()

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {text!r} at offset {pos}", offset=pos)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Binary(pos=pos, op=text, left=node, right=self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, text, pos = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Binary(pos=pos, op=text, left=node, right=self.factor())
            else:
                return node

    def factor(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.advance()
            return Unary(pos=pos, op="-", operand=self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            return Binary(pos=pos, op="^", left=base, right=self.factor())
        return base

    def atom(self):
        kind, text, pos = self.advance()
        if kind == "num":
            return Num(pos=pos, value=float(text))
        if kind == "name":
            nk, nt, npos = self.peek()
            if nk == "op" and nt == "(":
                if text not in FUNCTION_ARITY:
                    raise ExpressionError(f"unknown function {text!r} at offset {pos}", offset=pos)
                self.advance()
                args = [self.expr()]
                while True:
                    k2, t2, p2 = self.peek()
                    if k2 == "op" and t2 == ",":
                        self.advance()
                        args.append(self.expr())
                    else:
                        break
                self.expect_op(")")
                if len(args) != FUNCTION_ARITY[text]:
                    raise ExpressionError(
                        f"{text} takes {FUNCTION_ARITY[text]} argument(s), got {len(args)} "
                        f"at offset {pos}",
                        offset=pos,
                    )
                return Call(pos=pos, name=text, args=tuple(args))
            if text in VARIABLES:
                return Var(pos=pos, name=text)
            if text in CONSTANTS:
                return Const(pos=pos, name=text)
            raise ExpressionError(f"unknown identifier {text!r} at offset {pos}", offset=pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionError(f"unexpected {text or 'end of input'!r} at offset {pos}", offset=pos)


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_PREC = 3


def _unparse(node, parent_prec=0):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, (Const, Var)):
        return node.name
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_unparse(a) for a in node.args)})"
    if isinstance(node, Unary):
        inner = _unparse(node.operand, _UNARY_PREC)
        text = f"-{inner}"
        return f"({text})" if parent_prec > _UNARY_PREC else text
    if isinstance(node, Binary):
        prec = _PRECEDENCE[node.op]
        # left-assoc for + - * /; right-assoc for ^
        if node.op == "^":
            left = _unparse(node.left, prec + 1)
            right = _unparse(node.right, prec)
        else:
            left = _unparse(node.left, prec)
            right = _unparse(node.right, prec + 1)
        text = f"{left} {node.op} {right}"
        return f"({text})" if prec < parent_prec else text
    raise TypeError(f"bad node {node!r}")


def _emit(node):
    """Emit python source over the numpy namespace for fast evaluation."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Const):
        return repr(CONSTANTS[node.name])
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{_emit(node.operand)})"
    if isinstance(node, Binary):
        if node.op == "^":
            return f"({_emit(node.left)} ** {_emit(node.right)})"
        return f"({_emit(node.left)} {node.op} {_emit(node.right)})"
    if isinstance(node, Call):
        return f"_f_{node.name}({', '.join(_emit(a) for a in node.args)})"
    raise TypeError(f"bad node {node!r}")


class ExpressionProgram:
    """A parsed expression over (t, x1, x2, eps), callable on scalars or arrays."""

    def __init__(self, src, tree):
        self.src = src
        self.tree = tree
        namespace = {f"_f_{name}": fn for name, fn in _NUMPY_FUNCS.items()}
        code = f"lambda t=0.0, x1=0.0, x2=0.0, eps=0.0: {_emit(tree)}"
        self._fn = eval(code, namespace)  # noqa: S307 - source emitted from our own AST

    def __call__(self, t=0.0, x1=0.0, x2=0.0, eps=0.0):
        return self._fn(t=t, x1=x1, x2=x2, eps=eps)

    def unparse(self):
        return _unparse(self.tree)

    def __repr__(self):
        return f"ExpressionProgram({self.src!r})"

    def __eq__(self, other):
        return isinstance(other, ExpressionProgram) and self.tree == other.tree

    def __hash__(self):
        return hash(self.unparse())


def parse_expression(src):
    """Parse ``src`` into an :class:`ExpressionProgram`.

    Raises :class:`ExpressionError` (with byte offset) on syntax errors,
    unknown identifiers/functions, and arity mismatches.
    """
    if not isinstance(src, str) or not src.strip():
        raise ExpressionError("empty expression", offset=0)
    tree = _Parser(src).parse()
    return ExpressionProgram(src, tree)
