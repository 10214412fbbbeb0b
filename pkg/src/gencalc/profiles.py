"""Minimal arithmetic grammar for profile and density expressions.

Supports identifiers, numbers, + - * /, ^ with integer exponents, parentheses
and the functions sin, cos, exp, log, abs.  Parsed expressions convert either
to smooth net expressions (``abs`` rejected there) or to plain vectorized
callables for locally-integrable densities.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import netcore as nc
from .errors import ArgumentError

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[()+\-*/^]))")

_FUNCS = ("sin", "cos", "exp", "log", "abs")


@dataclass(frozen=True)
class Node:
    op: str          # "num" | "var" | "+" | "-" | "*" | "/" | "^" | "neg" | func
    args: tuple = ()
    value: float = 0.0
    name: str = ""


def tokenize(src: str):
    pos, out = 0, []
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m or m.end() == pos:
            if src[pos:].strip():
                raise ArgumentError(f"cannot tokenize {src[pos:]!r}")
            break
        num, ident, op = m.groups()
        if num:
            out.append(("num", float(num)))
        elif ident:
            out.append(("ident", ident))
        else:
            out.append(("op", "^" if op == "**" else op))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None:
            raise ArgumentError("unexpected end of expression")
        if kind and tok[0] != kind or value and tok[1] != value:
            raise ArgumentError(f"unexpected token {tok[1]!r}")
        self.pos += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] is not None:
            raise ArgumentError(f"trailing input at token {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            op = self.take()[1]
            node = Node(op, (node, self.term()))
        return node

    def term(self):
        node = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            op = self.take()[1]
            node = Node(op, (node, self.unary()))
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            return Node("neg", (self.unary(),))
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            sign = 1
            while self.peek() == ("op", "-"):
                self.take()
                sign = -sign
            kind, val = self.take("num")
            if val != int(val):
                raise ArgumentError(f"exponent must be an integer, got {val}")
            return Node("^", (base,), value=sign * int(val))
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return Node("num", value=val)
        if kind == "ident":
            self.take()
            if self.peek() == ("op", "("):
                if val not in _FUNCS:
                    raise ArgumentError(f"unknown function {val!r}")
                self.take()
                arg = self.expr()
                self.take("op", ")")
                return Node(val, (arg,))
            return Node("var", name=val)
        if (kind, val) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        raise ArgumentError(f"unexpected token {val!r}")


def parse(src: str) -> Node:
    return _Parser(tokenize(src)).parse()


def to_netexpr(node: Node, var_axes: dict) -> nc.NetExpr:
    """Convert to a smooth net expression; abs is rejected (not smooth)."""
    if node.op == "num":
        return nc.constant(node.value)
    if node.op == "var":
        if node.name == "eps":
            return nc.EPS
        if node.name not in var_axes:
            raise ArgumentError(f"unknown identifier {node.name!r}; "
                                f"have {sorted(var_axes)}")
        return nc.coordinate(var_axes[node.name])
    if node.op == "abs":
        raise ArgumentError("abs is not smooth; only locally-integrable "
                            "densities may use it")
    if node.op == "neg":
        return -to_netexpr(node.args[0], var_axes)
    if node.op == "+":
        return to_netexpr(node.args[0], var_axes) + to_netexpr(node.args[1], var_axes)
    if node.op == "-":
        return to_netexpr(node.args[0], var_axes) - to_netexpr(node.args[1], var_axes)
    if node.op == "*":
        return to_netexpr(node.args[0], var_axes) * to_netexpr(node.args[1], var_axes)
    if node.op == "/":
        return to_netexpr(node.args[0], var_axes) / to_netexpr(node.args[1], var_axes)
    if node.op == "^":
        return to_netexpr(node.args[0], var_axes) ** node.value
    if node.op in ("sin", "cos", "exp", "log"):
        return nc.smooth(node.op, to_netexpr(node.args[0], var_axes))
    raise ArgumentError(f"unknown node {node.op!r}")


def evaluate(node: Node, env: dict):
    """Vectorized numeric evaluation with variables bound to arrays."""
    if node.op == "num":
        return node.value
    if node.op == "var":
        if node.name not in env:
            raise ArgumentError(f"unbound identifier {node.name!r}")
        return env[node.name]
    a = [evaluate(arg, env) for arg in node.args]
    if node.op == "neg":
        return -a[0]
    if node.op == "+":
        return a[0] + a[1]
    if node.op == "-":
        return a[0] - a[1]
    if node.op == "*":
        return a[0] * a[1]
    if node.op == "/":
        return a[0] / a[1]
    if node.op == "^":
        return a[0] ** node.value
    if node.op == "abs":
        return np.abs(a[0])
    return getattr(np, node.op)(a[0])


def smooth_parse(src: str, var_axes: dict) -> nc.NetExpr:
    return to_netexpr(parse(src), var_axes)


def kink_points(node: Node, varname: str):
    """Breakpoints contributed by abs() of a bare variable (abs(x) -> 0)."""
    pts = []
    if node.op == "abs" and node.args[0].op == "var" and node.args[0].name == varname:
        pts.append(0.0)
    for arg in node.args:
        pts.extend(kink_points(arg, varname))
    return pts
