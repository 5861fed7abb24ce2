"""Infix/functional front end for registry expressions.

Grammar: the usual precedence ladder  ``+ -``  <  ``* /``  <  unary minus  <
``^`` (right associative)  <  atoms.  Atoms are numbers, named constants,
variables, parenthesised expressions and ``name(arg, ...)`` calls resolved
against an OperatorRegistry.
"""

from __future__ import annotations

import re
from typing import Sequence

from .expr import (
    Apply,
    Expr,
    OperatorRegistry,
    TABLE1_REGISTRY,
    Terminal,
    Variable,
)


class ParseError(ValueError):
    def __init__(self, message: str, position: int, text: str):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}: {text[:position]}<HERE>{text[position:]}")


#: Aliases accepted on input; canonical symbols are the registry's.
_ALIASES = {
    "arcsin": "asin",
    "arccos": "acos",
    "arctan": "atan",
    "arsinh": "asinh",
    "arcosh": "acosh",
    "artanh": "atanh",
    "σ": "sigma",
    "sigmoid": "sigma",
}

#: Named constants always accepted as terminals.
_CONSTANT_NAMES = ("pi", "e", "i")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d+)?)|(?P<name>[A-Za-zσ_][A-Za-z0-9σ_]*)|(?P<punct>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            raise ParseError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, registry: OperatorRegistry, variables: Sequence[str]):
        self.text = text
        self.registry = registry
        self.variables = tuple(variables)
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, val, pos = self.peek()
        if val != value:
            raise ParseError(f"expected {value!r}, found {val or 'end of input'!r}", pos, self.text)
        return self.advance()

    def parse(self) -> Expr:
        e = self.addsub()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", pos, self.text)
        return e

    def addsub(self) -> Expr:
        e = self.muldiv()
        while self.peek()[1] in ("+", "-"):
            op = self.advance()[1]
            rhs = self.muldiv()
            e = Apply("add" if op == "+" else "sub", (e, rhs))
        return e

    def muldiv(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.advance()[1]
            rhs = self.unary()
            e = Apply("mul" if op == "*" else "div", (e, rhs))
        return e

    def unary(self) -> Expr:
        if self.peek()[1] == "-":
            self.advance()
            return Apply("neg", (self.unary(),))
        return self.power()

    def power(self) -> Expr:
        e = self.atom()
        if self.peek()[1] == "^":
            self.advance()
            # right associative, binds tighter than unary minus on the left
            return Apply("pow", (e, self.unary()))
        return e

    def atom(self) -> Expr:
        kind, val, pos = self.advance()
        if kind == "num":
            return Terminal(val)
        if val == "(":
            e = self.addsub()
            self.expect(")")
            return e
        if kind == "name":
            name = _ALIASES.get(val, val)
            if self.peek()[1] == "(":
                return self.call(name, pos)
            if name in self.variables:
                return Variable(name)
            if name in _CONSTANT_NAMES:
                return Terminal(name)
            if name in self.registry:
                raise ParseError(f"operator {name!r} needs arguments", pos, self.text)
            raise ParseError(f"unknown symbol {name!r}", pos, self.text)
        raise ParseError(f"unexpected {val or 'end of input'!r}", pos, self.text)

    def call(self, name: str, pos: int) -> Expr:
        self.expect("(")
        args = [self.addsub()]
        while self.peek()[1] == ",":
            self.advance()
            args.append(self.addsub())
        self.expect(")")
        if name == "log":
            # log(y) is the natural log; log(x, y) is the base-x logarithm.
            if len(args) == 1:
                return Apply("ln", tuple(args))
            if len(args) == 2:
                return Apply("log", tuple(args))
            raise ParseError("log takes 1 or 2 arguments", pos, self.text)
        if name not in self.registry:
            raise ParseError(f"unknown symbol {name!r}", pos, self.text)
        sig = self.registry[name]
        if sig.arity != len(args):
            raise ParseError(
                f"{name!r} takes {sig.arity} argument{'s' if sig.arity > 1 else ''}, got {len(args)}",
                pos,
                self.text,
            )
        return Apply(name, tuple(args))


def parse_math(
    text: str,
    registry: OperatorRegistry = TABLE1_REGISTRY,
    variables: Sequence[str] = ("x", "y", "z"),
) -> Expr:
    """Parse infix/functional notation into an Expr."""
    return _Parser(text, registry, variables).parse()


_INFIX = {"add": ("+", 1), "sub": ("-", 1), "mul": ("*", 2), "div": ("/", 2), "pow": ("^", 4)}


def render(e: Expr) -> str:
    """Infix rendering; ``parse_math(render(e))`` reproduces ``e``."""

    def go(n: Expr, parent_prec: int) -> str:
        if isinstance(n, Terminal):
            return n.symbol
        if isinstance(n, Variable):
            return n.name
        if n.op == "neg":
            s = f"-{go(n.args[0], 3)}"
            return f"({s})" if parent_prec > 3 else s
        if n.op in _INFIX:
            sym, prec = _INFIX[n.op]
            # left operand at own precedence, right one notch up: makes -
            # and / left-associative on re-parse; ^ re-parses right-first.
            if n.op == "pow":
                s = f"{go(n.args[0], 5)}{sym}{go(n.args[1], 3)}"
            else:
                s = f"{go(n.args[0], prec)} {sym} {go(n.args[1], prec + 1)}"
            return f"({s})" if prec < parent_prec else s
        return f"{n.op}({', '.join(go(a, 0) for a in n.args)})"

    return go(e, 0)
