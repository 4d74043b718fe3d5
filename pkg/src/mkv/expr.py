"""Scalar expression language: tokenizer, recursive-descent parser and renderer.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := "-" factor | power
    power  := atom ("^" factor)?
    atom   := number | identifier | func "(" expr ")" | "(" expr ")"

``^`` is right associative and binds tighter than unary minus, so ``-x^2``
is ``-(x^2)``.  Identifiers must be declared coordinates or parameters.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

FUNCTIONS = ("exp", "log", "sin", "cos", "tan", "sinh", "cosh", "tanh", "sqrt")


class ExpressionError(ValueError):
    """Base class for parse and binding failures."""


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, source: str, position: int, expected: Iterable[str]):
        self.source = source
        self.position = position
        self.expected = tuple(sorted(set(expected)))
        found = source[position:position + 1] or "end of input"
        super().__init__(
            f"syntax error at position {position} in {source!r}: found {found!r}, "
            f"expected one of {', '.join(self.expected)}"
        )


class UnboundIdentifierError(ExpressionError):
    def __init__(self, source: str, name: str, position: int):
        self.source = source
        self.name = name
        self.position = position
        super().__init__(f"unbound identifier {name!r} at position {position} in {source!r}")


# AST -------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Num | Var | Neg | BinOp | Call


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with the names it was bound against."""

    root: Node
    coords: tuple[str, ...]
    params: tuple[str, ...]

    def render(self) -> str:
        return render(self.root)

    def identifiers(self) -> set[str]:
        return _identifiers(self.root)

    def __str__(self) -> str:
        return self.render()


def _identifiers(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (Neg, Call)):
        return _identifiers(node.operand if isinstance(node, Neg) else node.arg)
    return _identifiers(node.left) | _identifiers(node.right)


# Tokenizer -------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()−×]))"
)

_OP_ALIASES = {"−": "-", "×": "*"}


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | id | op | end
    text: str
    pos: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos >= len(source):
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(source, pos, ["number", "identifier", "operator"])
        kind = m.lastgroup
        text = m.group(kind)
        start = m.start(kind)
        toks.append(_Tok(kind, _OP_ALIASES.get(text, text), start))
        pos = m.end()
    toks.append(_Tok("end", "", len(source)))
    return toks


class _Parser:
    def __init__(self, source: str, coords: Sequence[str], params: Sequence[str]):
        self.source = source
        self.toks = _tokenize(source)
        self.i = 0
        self.bound = set(coords) | set(params)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind != "op":
            raise ExpressionSyntaxError(self.source, self.tok.pos, [text])
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExpressionSyntaxError(self.source, self.tok.pos, ["+", "-", "*", "/", "^", "end of input"])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "id":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text not in self.bound:
                raise UnboundIdentifierError(self.source, tok.text, tok.pos)
            return Var(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionSyntaxError(self.source, tok.pos, ["number", "identifier", "function", "(", "-"])


def parse(source: str, coords: Sequence[str] = (), params: Sequence[str] = ()) -> Expression:
    """Parse ``source`` binding identifiers against ``coords`` and ``params``."""
    clash = set(coords) & (set(FUNCTIONS) | set(params))
    if clash:
        raise ExpressionError(f"reserved or duplicated names: {sorted(clash)}")
    root = _Parser(source, coords, params).parse()
    return Expression(root, tuple(coords), tuple(params))


# Rendering -------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}
_NEG_PREC = 3
_POW_PREC = 4
_ATOM_PREC = 5


def _format_number(value: float) -> str:
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _prec(node: Node) -> int:
    if isinstance(node, BinOp):
        return _POW_PREC if node.op == "^" else _PREC[node.op]
    if isinstance(node, Neg):
        return _NEG_PREC
    if isinstance(node, Num) and node.value < 0:
        return _NEG_PREC
    return _ATOM_PREC


def render(node: Node) -> str:
    """Render with the minimal parentheses that parse back to the same tree."""
    if isinstance(node, Num):
        text = _format_number(abs(node.value))
        return f"-{text}" if node.value < 0 else text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({render(node.arg)})"
    if isinstance(node, Neg):
        inner = render(node.operand)
        # an operand of lower precedence than unary minus needs parentheses
        if _prec(node.operand) < _NEG_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    op = node.op
    left, right = render(node.left), render(node.right)
    if op == "^":
        if _prec(node.left) <= _POW_PREC:
            left = f"({left})"
        if _prec(node.right) < _NEG_PREC:
            right = f"({right})"
        return f"{left}^{right}"
    p = _PREC[op]
    if _prec(node.left) < p:
        left = f"({left})"
    # left associative: equal precedence on the right needs parentheses
    if _prec(node.right) <= p:
        right = f"({right})"
    return f"{left} {op} {right}"


# Programmatic construction ---------------------------------------------------
# Builders fold literal zeros and ones so generated specs stay readable.


def num(value: float) -> Node:
    return Neg(Num(-value)) if value < 0 else Num(float(value))


def _is_num(node: Node, value: float) -> bool:
    return isinstance(node, Num) and node.value == value


def _const(node: Node) -> float | None:
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Neg) and isinstance(node.operand, Num):
        return -node.operand.value
    return None


def _fold(op: str, a: Node, b: Node) -> Node | None:
    x, y = _const(a), _const(b)
    if x is None or y is None:
        return None
    try:
        value = {"+": x + y, "-": x - y, "*": x * y, "/": x / y if y else None, "^": x**y if x > 0 else None}[op]
    except (OverflowError, ZeroDivisionError):
        return None
    if value is None or isinstance(value, complex):
        return None
    return num(value)


def add(a: Node, b: Node) -> Node:
    folded = _fold("+", a, b)
    if folded is not None:
        return folded
    if _is_num(a, 0.0):
        return b
    if _is_num(b, 0.0):
        return a
    if isinstance(b, Neg):
        return BinOp("-", a, b.operand)
    return BinOp("+", a, b)


def sub(a: Node, b: Node) -> Node:
    folded = _fold("-", a, b)
    if folded is not None:
        return folded
    if _is_num(b, 0.0):
        return a
    if _is_num(a, 0.0):
        return neg(b)
    return BinOp("-", a, b)


def neg(a: Node) -> Node:
    if _is_num(a, 0.0):
        return a
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def mul(a: Node, b: Node) -> Node:
    folded = _fold("*", a, b)
    if folded is not None:
        return folded
    if _is_num(a, 0.0) or _is_num(b, 0.0):
        return Num(0.0)
    if _is_num(a, 1.0):
        return b
    if _is_num(b, 1.0):
        return a
    if isinstance(a, Neg):
        return neg(mul(a.operand, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.operand))
    return BinOp("*", a, b)


def div(a: Node, b: Node) -> Node:
    folded = _fold("/", a, b)
    if folded is not None:
        return folded
    if _is_num(b, 1.0):
        return a
    if _is_num(a, 0.0):
        return a
    return BinOp("/", a, b)


def power(a: Node, b: Node) -> Node:
    folded = _fold("^", a, b)
    if folded is not None:
        return folded
    if _is_num(b, 1.0):
        return a
    return BinOp("^", a, b)


def total(terms: Iterable[Node]) -> Node:
    out: Node = Num(0.0)
    for t in terms:
        out = add(out, t)
    return out
