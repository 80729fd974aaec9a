"""Expression language for exponents, weights, potentials and radius functions.

Grammar (whitespace-insensitive)::

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := ('-' | '+') unary | power
    power    := primary (('^' | '**') exponent)*
    exponent := ('-' | '+') exponent | primary
    primary  := NUMBER | CONST | VAR | FUNC '(' expr ')' | 'norm2' '(' 'x' ')' | '(' expr ')'

``VAR`` is ``x1``, ``x2`` or ``x3``; ``CONST`` is ``pi`` or ``e``; ``FUNC`` is
one of ``abs exp log sqrt``. ``-a^b`` reads ``-(a^b)``. Every binary operator,
``^`` included, associates to the left: ``a^b^c`` reads ``(a^b)^c``.
"""

from __future__ import annotations

import logging
import math
import re
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import (
    EvaluationDomainError,
    ExprError,
    ExprSyntaxError,
    NonFiniteResultError,
    UnknownIdentifierError,
)
from .grid import Domain, GridFunction

logger = logging.getLogger(__name__)

FUNCTIONS = ("abs", "exp", "log", "sqrt")
CONSTANTS = {"pi": math.pi, "e": math.e}


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Norm2:
    pass


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or a name from FUNCTIONS
    arg: ExprAst


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: ExprAst
    right: ExprAst


ExprAst = Const | Var | Norm2 | Unary | Binary

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>\*\*|[-+*/^()]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num, name, op, end
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            pos = len(text)
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            offset = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {text[offset]!r}", offset)
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            raise ExprSyntaxError(f"expected {text!r}", self.tok.offset)
        self.advance()

    def parse(self) -> ExprAst:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {self.tok.text!r}", self.tok.offset)
        return node

    def expr(self) -> ExprAst:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> ExprAst:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> ExprAst:
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            arg = self.unary()
            return Unary("neg", arg) if op == "-" else arg
        return self.power()

    def power(self) -> ExprAst:
        node = self.primary()
        while self.tok.kind == "op" and self.tok.text in ("^", "**"):
            self.advance()
            node = Binary("^", node, self.exponent())
        return node

    def exponent(self) -> ExprAst:
        """A signed primary, so ``a^-b`` parses without parentheses."""
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            arg = self.exponent()
            return Unary("neg", arg) if op == "-" else arg
        return self.primary()

    def primary(self) -> ExprAst:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "name":
            return self.name()
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {what}", tok.offset)

    def name(self) -> ExprAst:
        tok = self.advance()
        name = tok.text
        if name in CONSTANTS:
            return Const(CONSTANTS[name])
        if re.fullmatch(r"x[123]", name):
            return Var(int(name[1]))
        if name == "norm2":
            self.expect("(")
            arg = self.tok
            if arg.kind != "name" or arg.text != "x":
                raise ExprSyntaxError("norm2 takes the point 'x'", arg.offset)
            self.advance()
            self.expect(")")
            return Norm2()
        if name in FUNCTIONS:
            self.expect("(")
            node = self.expr()
            self.expect(")")
            return Unary(name, node)
        raise UnknownIdentifierError(name, tok.offset)


def parse(text: str) -> ExprAst:
    """Parse expression text into an immutable syntax tree."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


def format_expr(ast: ExprAst) -> str:
    """Fully parenthesized text that parses back to ``ast``."""
    match ast:
        case Const(value):
            return repr(value)
        case Var(index):
            return f"x{index}"
        case Norm2():
            return "norm2(x)"
        case Unary("neg", arg):
            return f"(-{format_expr(arg)})"
        case Unary(op, arg):
            return f"{op}({format_expr(arg)})"
        case Binary(op, left, right):
            return f"({format_expr(left)} {op} {format_expr(right)})"
    raise ExprError(f"not an expression node: {ast!r}")


def max_variable(ast: ExprAst) -> int:
    """Largest variable index referenced (0 when there is none)."""
    match ast:
        case Var(index):
            return index
        case Unary(_, arg):
            return max_variable(arg)
        case Binary(_, left, right):
            return max(max_variable(left), max_variable(right))
    return 0


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise NonFiniteResultError(f"{what} is not finite")
    return value


def _power(a: float, b: float) -> float:
    if a < 0 and not float(b).is_integer():
        raise EvaluationDomainError(f"negative base {a} with non-integer exponent {b}")
    if a == 0 and b < 0:
        raise NonFiniteResultError("zero raised to a negative power")
    try:
        return a**b
    except OverflowError:
        raise NonFiniteResultError(f"{a}^{b} overflows") from None


def evaluate(ast: ExprAst, point: Sequence[float]) -> float:
    """Evaluate ``ast`` at one point in double precision."""
    match ast:
        case Const(value):
            return value
        case Var(index):
            if index > len(point):
                raise EvaluationDomainError(f"x{index} is undefined in dimension {len(point)}")
            return float(point[index - 1])
        case Norm2():
            return math.sqrt(math.fsum(float(c) * float(c) for c in point))
        case Unary(op, arg):
            a = evaluate(arg, point)
            if op == "neg":
                return -a
            if op == "abs":
                return abs(a)
            if op == "exp":
                try:
                    return math.exp(a)
                except OverflowError:
                    raise NonFiniteResultError(f"exp({a}) overflows") from None
            if op == "log":
                if a <= 0:
                    raise EvaluationDomainError(f"log of non-positive value {a}")
                return math.log(a)
            if op == "sqrt":
                if a < 0:
                    raise EvaluationDomainError(f"sqrt of negative value {a}")
                return math.sqrt(a)
        case Binary(op, left, right):
            a, b = evaluate(left, point), evaluate(right, point)
            if op == "+":
                return _finite(a + b, "sum")
            if op == "-":
                return _finite(a - b, "difference")
            if op == "*":
                return _finite(a * b, "product")
            if op == "/":
                if b == 0:
                    raise NonFiniteResultError("division by zero")
                return _finite(a / b, "quotient")
            if op == "^":
                return _finite(_power(a, b), "power")
    raise ExprError(f"not an expression node: {ast!r}")


def sample(ast: ExprAst, domain: Domain) -> GridFunction:
    """Evaluate ``ast`` at every cell center of ``domain``."""
    if max_variable(ast) > domain.dim:
        raise EvaluationDomainError(f"x{max_variable(ast)} is undefined in dimension {domain.dim}")
    values = np.empty(domain.size)
    for cell, point in enumerate(domain.centers.tolist()):
        try:
            values[cell] = evaluate(ast, point)
        except EvaluationDomainError as exc:
            raise EvaluationDomainError(str(exc), cell) from exc
        except NonFiniteResultError as exc:
            raise NonFiniteResultError(str(exc), cell) from exc
    return GridFunction.from_values(domain, values)


def sample_text(text: str, domain: Domain) -> GridFunction:
    return sample(parse(text), domain)
