"""Recursive-descent parser for the infix expression grammar.

Grammar::

    expr     := term (('+' | '-') term)*
    term     := factor (('*' | '/') factor)*
    factor   := atom ('^' exponent)?
    exponent := atom                      (must fold to a rational constant)
    atom     := number | ident | func '(' expr ')' | '(' expr ')' | '-' factor

The identifier ``pi`` is reserved for the float constant ``math.pi``.

The parser returns a *raw* tree that mirrors the text; call
:func:`edsym.symexpr.normalize` (or use :func:`parse_expr`) for the
canonical form.
"""
from __future__ import annotations

import math
import re
from fractions import Fraction

from .nodes import (CONST, FUNCTIONS, Expr, const, normalize, raw_add, raw_div,
                    raw_func, raw_mul, raw_neg, raw_pow, var)

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


class ParseError(ValueError):
    """Syntax error with the byte offset of the offending token."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at byte offset {offset}")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = self._tokenize(text)
        self.pos = 0

    def _byte(self, i: int) -> int:
        return len(self.text[:i].encode("utf-8"))

    def _tokenize(self, text):
        out = []
        i = 0
        n = len(text)
        while i < n:
            if text[i].isspace():
                i += 1
                continue
            m = _TOKEN.match(text, i)
            if m is None or m.end() == i:
                raise ParseError(f"unexpected character {text[i]!r}", self._byte(i), text)
            kind = m.lastgroup
            start = m.start(kind)
            out.append((kind, m.group(kind), self._byte(start)))
            i = m.end()
        out.append(("eof", "", self._byte(n)))
        return out

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value or tok[0] == "eof":
            found = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise ParseError(f"expected {value!r}, found {found}", tok[2], self.text)
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2], self.text)
        return e

    def expr(self) -> Expr:
        terms = [self.term()]
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            t = self.term()
            terms.append(t if op == "+" else raw_neg(t))
        return terms[0] if len(terms) == 1 else raw_add(terms)

    def term(self) -> Expr:
        chain = [self.factor()]
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            f = self.factor()
            if op == "*":
                chain.append(f)
            else:
                left = chain[0] if len(chain) == 1 else raw_mul(chain)
                chain = [raw_div(left, f)]
        return chain[0] if len(chain) == 1 else raw_mul(chain)

    def factor(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            tok = self.peek()
            ex = self.atom()
            if ex.kind != CONST or isinstance(ex.value, float):
                raise ParseError("exponent must be an integer or rational constant",
                                 tok[2], self.text)
            return raw_pow(base, ex.value)
        return base

    def atom(self) -> Expr:
        tok = self.take()
        kind, value, off = tok
        if kind == "num":
            return const(Fraction(value))
        if kind == "ident":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if value not in FUNCTIONS:
                    raise ParseError(
                        f"{value!r} is not a known function (application syntax on "
                        f"variables is not supported)", off, self.text)
                self.take()
                arg = self.expr()
                self.expect(")")
                return raw_func(value, arg)
            if value in FUNCTIONS:
                raise ParseError(f"function {value!r} requires an argument", off, self.text)
            if value == "pi":
                return const(math.pi)
            return var(value)
        if kind == "op" and value == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "op" and value == "-":
            return raw_neg(self.factor())
        found = "end of input" if kind == "eof" else repr(value)
        raise ParseError(f"unexpected {found}", off, self.text)


def parse(text: str) -> Expr:
    """Parse ``text`` into a raw expression tree.

    Raises
    ------
    ParseError
        On any syntax error or unknown function name; the exception carries
        the byte offset of the offending token.
    """
    if not isinstance(text, str):
        raise TypeError("parse expects a string")
    return _Parser(text).parse()


def parse_expr(text: str) -> Expr:
    """Parse and normalize."""
    return normalize(parse(text))
