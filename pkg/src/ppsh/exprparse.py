"""Minimal recursive-descent parser for source and boundary expressions.

Grammar (whitespace ignored):

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right associative
    atom   := NUMBER | 'x1'..'xn' | 'u' | 'exp' '(' expr ')' | '(' expr ')'

Expressions compile to vectorized callables f(x, u) with x of shape (K, n)
and u of shape (K,) or None.  The variable u is only legal when allow_u is
set.  d/du is available when every exponent containing u is constant.
"""

from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_][A-Za-z_0-9]*)|(.))")


class ExpressionError(ValueError):
    pass


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"cannot tokenize {src[pos:]!r}")
        num, name, sym = m.groups()
        if num is not None:
            tokens.append(("num", float(num)))
        elif name is not None:
            tokens.append(("name", name))
        elif sym.strip():
            tokens.append(("sym", sym))
        pos = m.end()
    tokens.append(("end", None))
    return tokens


# AST nodes: ("num", v) | ("var", i) | ("u",) | ("exp", a)
#          | ("+", a, b) | ("-", a, b) | ("*", a, b) | ("/", a, b)
#          | ("neg", a) | ("^", a, b)


class _Parser:
    def __init__(self, tokens, n_vars, allow_u):
        self.tokens = tokens
        self.i = 0
        self.n_vars = n_vars
        self.allow_u = allow_u

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect_sym(self, s):
        kind, val = self.take()
        if kind != "sym" or val != s:
            raise ExpressionError(f"expected {s!r}, found {val!r}")

    def parse(self):
        node = self.expr()
        kind, val = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected trailing input at {val!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("sym", "+") or self.peek() == ("sym", "-"):
            _, op = self.take()
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("sym", "*") or self.peek() == ("sym", "/"):
            _, op = self.take()
            node = (op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == ("sym", "-"):
            self.take()
            return ("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("sym", "^"):
            self.take()
            return ("^", base, self.unary())
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return ("num", val)
        if kind == "name":
            if val == "u":
                if not self.allow_u:
                    raise ExpressionError("variable 'u' is not allowed here")
                return ("u",)
            if val == "exp":
                self.expect_sym("(")
                inner = self.expr()
                self.expect_sym(")")
                return ("exp", inner)
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.n_vars:
                    raise ExpressionError(f"variable {val} out of range x1..x{self.n_vars}")
                return ("var", idx - 1)
            raise ExpressionError(f"unknown name {val!r}")
        if kind == "sym" and val == "(":
            inner = self.expr()
            self.expect_sym(")")
            return inner
        raise ExpressionError(f"unexpected token {val!r}")


def _eval(node, x, u):
    op = node[0]
    if op == "num":
        return node[1]
    if op == "var":
        return x[:, node[1]]
    if op == "u":
        return u
    if op == "exp":
        return np.exp(_eval(node[1], x, u))
    if op == "neg":
        return -_eval(node[1], x, u)
    a = _eval(node[1], x, u)
    b = _eval(node[2], x, u)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    if op == "^":
        return a ** b
    raise AssertionError(op)


def _contains_u(node) -> bool:
    if node[0] == "u":
        return True
    return any(_contains_u(c) for c in node[1:] if isinstance(c, tuple))


def _diff_u(node):
    """Derivative of the AST with respect to u."""
    op = node[0]
    if op in ("num", "var"):
        return ("num", 0.0)
    if op == "u":
        return ("num", 1.0)
    if op == "neg":
        return ("neg", _diff_u(node[1]))
    if op == "exp":
        return ("*", node, _diff_u(node[1]))
    a, b = node[1], node[2]
    if op == "+":
        return ("+", _diff_u(a), _diff_u(b))
    if op == "-":
        return ("-", _diff_u(a), _diff_u(b))
    if op == "*":
        return ("+", ("*", _diff_u(a), b), ("*", a, _diff_u(b)))
    if op == "/":
        return ("/", ("-", ("*", _diff_u(a), b), ("*", a, _diff_u(b))), ("^", b, ("num", 2.0)))
    if op == "^":
        if _contains_u(b):
            raise ExpressionError("d/du of a power needs a u-free exponent")
        # b * a^(b-1) * a'
        return ("*", ("*", b, ("^", a, ("-", b, ("num", 1.0)))), _diff_u(a))
    raise AssertionError(op)


class Expression:
    """Compiled expression over coordinates x1..xn and optionally u."""

    def __init__(self, src: str, n_vars: int, allow_u: bool = False):
        self.src = src
        self.n_vars = n_vars
        self.ast = _Parser(_tokenize(src), n_vars, allow_u).parse()
        self.uses_u = _contains_u(self.ast)

    def __call__(self, x, u=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.uses_u and u is None:
            raise ExpressionError("expression uses 'u' but no u values were given")
        uu = None if u is None else np.asarray(u, dtype=float)
        out = _eval(self.ast, x, uu)
        return np.broadcast_to(np.asarray(out, dtype=float), (x.shape[0],)).copy()

    def derivative_u(self) -> "Expression":
        d = Expression.__new__(Expression)
        d.src = f"d/du({self.src})"
        d.n_vars = self.n_vars
        d.ast = _diff_u(self.ast)
        d.uses_u = _contains_u(d.ast)
        return d


def parse_expression(src: str, n_vars: int, allow_u: bool = False) -> Expression:
    return Expression(src, n_vars, allow_u=allow_u)
