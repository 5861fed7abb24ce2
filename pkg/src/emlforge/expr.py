"""Expression tree IR, operator registry, RPN codec and DOT export.

The IR is deliberately tiny: a tree is a Terminal (named constant), a
Variable, or an Apply node whose operator symbol is resolved against an
OperatorRegistry.  Pure-EML trees are the subset generated by the grammar
S -> 1 | x | eml(S, S).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence, Union


class ExprError(ValueError):
    """Structural problem with an expression or RPN program."""


class StackCodeError(ExprError):
    """RPN decode failure: underflow or surplus operands."""


@dataclass(frozen=True, slots=True)
class Terminal:
    symbol: str

    def __str__(self) -> str:
        return self.symbol


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Apply:
    op: str
    args: tuple["Expr", ...]

    def __str__(self) -> str:
        return f"{self.op}({', '.join(str(a) for a in self.args)})"


Expr = Union[Terminal, Variable, Apply]

#: Variable names admitted by the compact one-char RPN alphabet.
DEFAULT_VARIABLES = ("x", "y", "z")

#: Compact alphabet: one char per token, 'E' is the eml operator.
EML_CHAR = "E"


@dataclass(frozen=True)
class OperatorSignature:
    """Registry entry for one primitive operator."""

    symbol: str
    arity: int
    name: str
    eval_tag: str = ""

    def __post_init__(self):
        if self.arity not in (1, 2):
            raise ExprError(f"operator {self.symbol!r}: arity must be 1 or 2")
        if not self.eval_tag:
            object.__setattr__(self, "eval_tag", self.symbol)


class OperatorRegistry:
    """Symbol -> signature map; symbols must be unique."""

    def __init__(self, signatures: Sequence[OperatorSignature]):
        self._by_symbol: dict[str, OperatorSignature] = {}
        for sig in signatures:
            if sig.symbol in self._by_symbol:
                raise ExprError(f"duplicate operator symbol {sig.symbol!r}")
            self._by_symbol[sig.symbol] = sig

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._by_symbol

    def __getitem__(self, symbol: str) -> OperatorSignature:
        try:
            return self._by_symbol[symbol]
        except KeyError:
            raise ExprError(f"unknown operator {symbol!r}") from None

    def __iter__(self) -> Iterator[OperatorSignature]:
        return iter(self._by_symbol.values())

    def arity(self, symbol: str) -> int:
        return self[symbol].arity

    def extended(self, signatures: Sequence[OperatorSignature]) -> "OperatorRegistry":
        return OperatorRegistry(list(self._by_symbol.values()) + list(signatures))


def _sig(symbol, arity, name):
    return OperatorSignature(symbol, arity, name)


#: The full scientific-calculator operator registry (plus the Sheffer
#: operators and the successor/predecessor pair used by the rational-function
#: warm-up exercise).  Constants live in `bases`, not here.
TABLE1_REGISTRY = OperatorRegistry(
    [
        _sig("exp", 1, "exponential"),
        _sig("ln", 1, "natural logarithm"),
        _sig("inv", 1, "reciprocal"),
        _sig("half", 1, "halve"),
        _sig("neg", 1, "negation"),
        _sig("sqrt", 1, "square root"),
        _sig("sqr", 1, "square"),
        _sig("sigma", 1, "logistic sigmoid"),
        _sig("sin", 1, "sine"),
        _sig("cos", 1, "cosine"),
        _sig("tan", 1, "tangent"),
        _sig("asin", 1, "arcsine"),
        _sig("acos", 1, "arccosine"),
        _sig("atan", 1, "arctangent"),
        _sig("sinh", 1, "hyperbolic sine"),
        _sig("cosh", 1, "hyperbolic cosine"),
        _sig("tanh", 1, "hyperbolic tangent"),
        _sig("asinh", 1, "inverse hyperbolic sine"),
        _sig("acosh", 1, "inverse hyperbolic cosine"),
        _sig("atanh", 1, "inverse hyperbolic tangent"),
        _sig("add", 2, "addition"),
        _sig("sub", 2, "subtraction"),
        _sig("mul", 2, "multiplication"),
        _sig("div", 2, "division"),
        _sig("log", 2, "base-x logarithm of y"),
        _sig("pow", 2, "exponentiation"),
        _sig("avg", 2, "arithmetic mean"),
        _sig("hypot", 2, "hypotenuse"),
        _sig("eml", 2, "exp-minus-log"),
        _sig("edl", 2, "exp-divided-by-log"),
        _sig("lme", 2, "log-minus-exp"),
        _sig("suc", 1, "successor"),
        _sig("pre", 1, "predecessor"),
    ]
)


@dataclass(frozen=True)
class RpnProgram:
    """Linear postfix token sequence; the VM's executable format.

    K, the paper-facing complexity measure, is simply ``len(tokens)``.
    """

    tokens: tuple[str, ...]
    registry: OperatorRegistry = field(default=TABLE1_REGISTRY, compare=False)
    variables: tuple[str, ...] = DEFAULT_VARIABLES

    def __post_init__(self):
        depth = 0
        for i, tok in enumerate(self.tokens):
            arity = self.registry.arity(tok) if tok in self.registry else 0
            if depth < arity:
                raise StackCodeError(
                    f"stack underflow at token {i} ({tok!r}): depth {depth} < arity {arity}"
                )
            depth += 1 - arity
        if depth != 1:
            raise StackCodeError(f"program leaves {depth} operands on the stack, expected 1")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def k(self) -> int:
        return len(self.tokens)

    def is_pure_eml(self) -> bool:
        return all(t == "eml" or t == "1" or t in self.variables for t in self.tokens)

    def stack_profile(self) -> list[int]:
        """Stack depth after each token."""
        depths = []
        depth = 0
        for tok in self.tokens:
            arity = self.registry.arity(tok) if tok in self.registry else 0
            depth += 1 - arity
            depths.append(depth)
        return depths

    def to_string(self) -> str:
        """Compact one-char string for pure-EML programs, spaced otherwise."""
        if self.is_pure_eml():
            return "".join(EML_CHAR if t == "eml" else t for t in self.tokens)
        return " ".join(self.tokens)

    @classmethod
    def from_string(
        cls,
        text: str,
        registry: OperatorRegistry = TABLE1_REGISTRY,
        variables: Sequence[str] = DEFAULT_VARIABLES,
    ) -> "RpnProgram":
        text = text.strip()
        if any(ch.isspace() for ch in text):
            tokens = tuple(text.split())
        else:
            tokens = tuple("eml" if ch == EML_CHAR else ch for ch in text)
        return cls(tokens, registry, tuple(variables))

    def __str__(self) -> str:
        return self.to_string()


def leaf_count(e: Expr) -> int:
    if isinstance(e, Apply):
        return sum(leaf_count(a) for a in e.args)
    return 1


def node_count(e: Expr) -> int:
    """Total node count; equals K of the RPN encoding."""
    if isinstance(e, Apply):
        return 1 + sum(node_count(a) for a in e.args)
    return 1


def depth(e: Expr) -> int:
    if isinstance(e, Apply):
        return 1 + max(depth(a) for a in e.args)
    return 0


def free_variables(e: Expr) -> frozenset[str]:
    if isinstance(e, Variable):
        return frozenset((e.name,))
    if isinstance(e, Apply):
        out: frozenset[str] = frozenset()
        for a in e.args:
            out |= free_variables(a)
        return out
    return frozenset()


def is_pure_eml(e: Expr, variables: Sequence[str] = DEFAULT_VARIABLES) -> bool:
    if isinstance(e, Terminal):
        return e.symbol == "1"
    if isinstance(e, Variable):
        return e.name in variables
    return e.op == "eml" and all(is_pure_eml(a, variables) for a in e.args)


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Replace variables by subtrees (tree splice, no sharing)."""
    if isinstance(e, Variable) and e.name in bindings:
        return bindings[e.name]
    if isinstance(e, Apply):
        return Apply(e.op, tuple(substitute(a, bindings) for a in e.args))
    return e


def to_rpn(
    e: Expr,
    registry: OperatorRegistry = TABLE1_REGISTRY,
    variables: Sequence[str] = DEFAULT_VARIABLES,
) -> RpnProgram:
    tokens: list[str] = []

    def walk(n: Expr) -> None:
        if isinstance(n, Apply):
            sig = registry[n.op]
            if sig.arity != len(n.args):
                raise ExprError(f"{n.op!r} applied to {len(n.args)} args, arity {sig.arity}")
            for a in n.args:
                walk(a)
            tokens.append(n.op)
        elif isinstance(n, Variable):
            tokens.append(n.name)
        else:
            tokens.append(n.symbol)

    walk(e)
    return RpnProgram(tuple(tokens), registry, tuple(variables))


def from_rpn(p: RpnProgram) -> Expr:
    stack: list[Expr] = []
    for tok in p.tokens:
        if tok in p.registry:
            arity = p.registry.arity(tok)
            if len(stack) < arity:
                raise StackCodeError(f"underflow decoding token {tok!r}")
            args = tuple(stack[-arity:])
            del stack[-arity:]
            stack.append(Apply(tok, args))
        elif tok in p.variables:
            stack.append(Variable(tok))
        else:
            stack.append(Terminal(tok))
    if len(stack) != 1:
        raise StackCodeError(f"{len(stack)} operands left after decode")
    return stack[0]


# --- JSON wire format: {"op": ..., "args": [...]} / {"t": "1"} / {"var": "x"}


def to_json_obj(e: Expr):
    if isinstance(e, Apply):
        return {"op": e.op, "args": [to_json_obj(a) for a in e.args]}
    if isinstance(e, Variable):
        return {"var": e.name}
    return {"t": e.symbol}


def from_json_obj(obj) -> Expr:
    if not isinstance(obj, dict):
        raise ExprError(f"bad expression object: {obj!r}")
    if "op" in obj:
        return Apply(obj["op"], tuple(from_json_obj(a) for a in obj["args"]))
    if "var" in obj:
        return Variable(obj["var"])
    if "t" in obj:
        return Terminal(obj["t"])
    raise ExprError(f"bad expression object keys: {sorted(obj)}")


def to_dot(e: Expr) -> str:
    """Deterministic DOT digraph; children are emitted left to right, so for
    eml the left edge is the exp argument and the right edge the ln argument.
    """
    lines = ["digraph expr {", "  graph [ordering=out];", '  node [shape=circle, fontname="monospace"];']
    counter = 0

    def walk(n: Expr) -> str:
        nonlocal counter
        nid = f"n{counter}"
        counter += 1
        if isinstance(n, Apply):
            lines.append(f'  {nid} [label="{n.op}"];')
            for a in n.args:
                cid = walk(a)
                lines.append(f"  {nid} -> {cid};")
        else:
            label = n.name if isinstance(n, Variable) else n.symbol
            lines.append(f'  {nid} [label="{label}", shape=box];')
        return nid

    walk(e)
    lines.append("}")
    return "\n".join(lines) + "\n"
