"""Tiny arithmetic expression grammar for user-supplied metric components.

Accepted syntax (documented in the README):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := unary ('**' factor)?          # right associative
    unary   := '-' unary | atom
    atom    := NUMBER | 'u' | 'v' | 'pi' | 'e'
             | FUNC '(' expr ')'
             | 'pow' '(' expr ',' expr ')'
             | '(' expr ')'
    FUNC    := exp | log | sin | cos | sinh | cosh | sqrt | tanh

Parse errors raise :class:`ExpressionError` citing line and column.
Compiled expressions evaluate on numpy arrays.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .errors import ExpressionError

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/(),]))"
)

_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "sqrt": np.sqrt,
}

_CONSTANTS = {"pi": math.pi, "e": math.e}


class _Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind, text, line, column):
        self.kind = kind
        self.text = text
        self.line = line
        self.column = column


def _tokenize(source: str):
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    n = len(source)
    while pos < n:
        ch = source[pos]
        if ch == "\n":
            line += 1
            pos += 1
            line_start = pos
            continue
        if ch.isspace():
            pos += 1
            continue
        match = _TOKEN_RE.match(source, pos)
        if match is None or match.group(match.lastgroup) is None:
            raise ExpressionError(
                f"unexpected character {ch!r}", line, pos - line_start + 1
            )
        text = match.group(match.lastgroup)
        col = (match.end() - len(text)) - line_start + 1
        tokens.append(_Token(match.lastgroup, text, line, col))
        pos = match.end()
    tokens.append(_Token("end", "", line, n - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.peek()
        if tok.kind == "op" and tok.text == text:
            return self.advance()
        raise ExpressionError(f"expected {text!r}", tok.line, tok.column)

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionError(f"unexpected token {tok.text!r}", tok.line, tok.column)
        return node

    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            node = (np.add if op == "+" else np.subtract, node, rhs)
        return node

    def term(self):
        node = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.factor()
            node = (np.multiply if op == "*" else np.divide, node, rhs)
        return node

    def factor(self):
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return (np.negative, self.factor())
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek().kind == "op" and self.peek().text == "**":
            self.advance()
            rhs = self.factor()
            node = (np.power, node, rhs)
        return node

    def atom(self):
        tok = self.advance()
        if tok.kind == "num":
            return ("const", float(tok.text))
        if tok.kind == "name":
            name = tok.text
            if name in ("u", "v"):
                return ("var", name)
            if name in _CONSTANTS:
                return ("const", _CONSTANTS[name])
            if name == "pow":
                self.expect("(")
                a = self.expr()
                self.expect(",")
                b = self.expr()
                self.expect(")")
                return (np.power, a, b)
            if name in _FUNCS:
                self.expect("(")
                a = self.expr()
                self.expect(")")
                return (_FUNCS[name], a)
            raise ExpressionError(f"unknown name {name!r}", tok.line, tok.column)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionError(f"unexpected token {tok.text!r}", tok.line, tok.column)


def _evaluate(node, u, v):
    tag = node[0]
    if tag == "const":
        return node[1]
    if tag == "var":
        return u if node[1] == "u" else v
    if len(node) == 2:
        return tag(_evaluate(node[1], u, v))
    return tag(_evaluate(node[1], u, v), _evaluate(node[2], u, v))


def compile_expression(source: str):
    """Parse ``source`` and return a vectorized callable ``f(u, v)``."""
    tree = _Parser(_tokenize(source)).parse()

    def evaluate(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.asarray(_evaluate(tree, u, v), dtype=float)
        shape = np.broadcast_shapes(u.shape, v.shape)
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out

    evaluate.source = source
    return evaluate
