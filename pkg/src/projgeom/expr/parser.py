"""Recursive-descent parser for coordinate expressions.

Grammar (whitespace insignificant)::

    expr     := ['+'|'-'] term (('+'|'-') term)*
    term     := factor (('*'|'/') factor)*
    factor   := atom ('^' exponent)?
    exponent := signed-number | '(' signed-number ('/' number)? ')'
    atom     := number | ident | '(' expr ')' | func '(' expr ')'
    func     := sin | cos | exp | log | sqrt | atan
    ident    := 'x' digits

Error offsets are 1-based character positions; end of input is reported
as ``len(text) + 1``.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import DimensionError, ExprSyntaxError, UnknownIdentifierError
from .nodes import FUNCTIONS, Expr, Var, add, call, const, div, mul, neg, power, sub


_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()])"
    r")"
)
_VAR = re.compile(r"x(\d+)$")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.lastgroup is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos + 1, text)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind) + 1))
        pos = m.end()
    tokens.append(("end", "", len(text) + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def error(self, message: str):
        raise ExprSyntaxError(message, self.tok[2], self.text)

    def accept(self, value: str) -> bool:
        kind, val, _ = self.tok
        if kind == "op" and val == value:
            self.i += 1
            return True
        return False

    def expect(self, value: str):
        if not self.accept(value):
            found = self.tok[1] or "end of input"
            self.error(f"expected {value!r}, found {found!r}")

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok[0] != "end":
            self.error(f"unexpected {self.tok[1]!r}")
        return e

    def expr(self) -> Expr:
        if self.accept("-"):
            e = neg(self.term())
        else:
            self.accept("+")
            e = self.term()
        while True:
            if self.accept("+"):
                e = add(e, self.term())
            elif self.accept("-"):
                e = sub(e, self.term())
            else:
                return e

    def term(self) -> Expr:
        e = self.factor()
        while True:
            if self.accept("*"):
                e = mul(e, self.factor())
            elif self.accept("/"):
                e = div(e, self.factor())
            else:
                return e

    def factor(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return power(base, self.exponent())
        return base

    def signed_number(self) -> Fraction:
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
            sign = 1
        kind, val, _ = self.tok
        if kind != "num":
            self.error("expected a number in exponent")
        self.i += 1
        return sign * Fraction(val)

    def exponent(self) -> Fraction:
        if self.accept("("):
            k = self.signed_number()
            if self.accept("/"):
                kind, val, _ = self.tok
                if kind != "num":
                    self.error("expected a denominator")
                self.i += 1
                d = Fraction(val)
                if d == 0:
                    self.error("zero denominator in exponent")
                k = k / d
            self.expect(")")
            return k
        return self.signed_number()

    def atom(self) -> Expr:
        kind, val, off = self.tok
        if kind == "num":
            self.i += 1
            return const(float(val))
        if kind == "ident":
            self.i += 1
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return call(val, arg)
            m = _VAR.match(val)
            if m is None:
                raise UnknownIdentifierError(val, off)
            return Var(int(m.group(1)))
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            self.error("unexpected end of input")
        self.error(f"unexpected {val!r}")


def parse_expr(text: str) -> Expr:
    """Parse ``text`` without a dimension check."""
    return _Parser(text).parse()


def parse(text: str, dim: int) -> Expr:
    """Parse ``text`` and require every variable to be among x0..x{dim-1}."""
    e = parse_expr(text)
    bad = sorted(i for i in e.variables if i >= dim)
    if bad:
        raise DimensionError(
            f"variable x{bad[0]} out of range for dimension {dim} in {text!r}"
        )
    return e
