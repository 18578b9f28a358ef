"""Tiny arithmetic expression language for initial and boundary data.

Grammar (usual precedence, left associative)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | atom
    atom   := NUMBER | 'x' | 'y' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := 'sin' | 'cos' | 'exp'
"""
from __future__ import annotations

import operator
import re

import numpy as np

from .errors import ConfigurationError

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]+)|(.))")
_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
_VARS = ("x", "y")
_BINOPS = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": operator.truediv}


def _binary(fn, a, b):
    return lambda x, y: fn(a(x, y), b(x, y))


def _tokenize(text):
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        num, name, op = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif name is not None:
            if name not in _FUNCS and name not in _VARS:
                raise ConfigurationError(f"unknown name {name!r} in expression {text!r}")
            tokens.append(("name", name))
        elif op is not None:
            if op not in "+-*/()":
                raise ConfigurationError(f"unexpected character {op!r} in expression {text!r}")
            tokens.append(("op", op))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else (None, None)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ConfigurationError(f"expected {op!r} in expression {self.text!r}")

    def parse(self):
        if not self.tokens:
            raise ConfigurationError("empty expression")
        node = self.expr()
        if self.i != len(self.tokens):
            raise ConfigurationError(f"trailing input in expression {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            node = _binary(_BINOPS[op], node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            node = _binary(_BINOPS[op], node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda x, y: -inner(x, y)
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.atom()

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return lambda x, y: np.full(np.shape(x), val)
        if kind == "name":
            if val == "x":
                return lambda x, y: np.asarray(x, dtype=float)
            if val == "y":
                return lambda x, y: np.asarray(y, dtype=float)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            fn = _FUNCS[val]
            return lambda x, y: fn(arg(x, y))
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ConfigurationError(f"unexpected token {val!r} in expression {self.text!r}")


def compile_expression(text: str):
    """Return a vectorised callable ``f(x, y)`` for the expression."""
    return _Parser(str(text)).parse()
