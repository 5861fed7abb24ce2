"""Basis configurations and the 36-primitive target set.

Candidate formulas are matched against targets numerically, at a fixed set
of probe columns.  Each column binds both input variables to transcendental
constants that are algebraically independent of the exp-log class (the
Euler-Mascheroni and Glaisher-Kinkelin constants, plus Khinchin and Catalan
as extra probes), scaled or shifted into the real domain of each target
family.  Matching at four such points per target, with a negative abscissa
whenever the real domain allows one, is the coincidence sieve; candidates
that pass are re-checked in extended precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import mpmath
import numpy as np

from .ceval import KERNELS_F64, KERNELS_MP, TERMINALS_F64, terminal_value_mp
from .expr import ExprError

GAMMA = float(mpmath.euler)
GLAISHER = float(mpmath.glaisher)
KHINCHIN = float(mpmath.khinchin)
CATALAN = float(mpmath.catalan)


def _mp_probe_constants():
    g = +mpmath.euler
    a = +mpmath.glaisher
    k = +mpmath.khinchin
    c = +mpmath.catalan
    return g, a, k, c


#: Probe columns: (x, y) bindings, float64.  Index groups below select the
#: columns whose x (or pair) lies in a target's real domain.
def _columns_f64() -> list[tuple[float, float]]:
    g, a, k, c = GAMMA, GLAISHER, KHINCHIN, CATALAN
    return _build_columns(g, a, k, c)


def _columns_mp() -> list[tuple[mpmath.mpf, mpmath.mpf]]:
    g, a, k, c = _mp_probe_constants()
    return _build_columns(g, a, k, c)


def _build_columns(g, a, k, c):
    return [
        (g, a),            # 0
        (a, k),            # 1
        (k, -c),           # 2
        (-c, g),           # 3
        (c, -a),           # 4
        (g / 3, a / 3),    # 5
        (a / 3, -k / 3),   # 6
        (k / 3, c / 3),    # 7
        (-c / 3, g / 3),   # 8
        (1 + g, -k),       # 9
        (1 + c, -k / 2),   # 10
        (k, c),            # 11
        (a, g),            # 12
        (c, k),            # 13
    ]


#: Column index groups per real-domain family.
COLS_REAL = (0, 1, 2, 3)      # x over R, negative point included
COLS_POS = (0, 1, 2, 4)       # x > 0
COLS_UNIT = (5, 6, 7, 8)      # |x| < 1, negative point included
COLS_GE1 = (9, 10, 1, 2)      # x > 1
COLS_PAIR = (0, 1, 2, 3)      # generic (x, y) pairs, negatives included
COLS_PAIR_POSX = (0, 1, 2, 4) # x > 0, y arbitrary sign
COLS_PAIR_POSPOS = (0, 11, 12, 13)  # x > 0, y > 0 (base-x logarithm)

N_COLUMNS = 14


@dataclass(frozen=True)
class TargetSpec:
    """One primitive to reconstruct: reference evaluator plus test points."""

    name: str
    kind: str                      # constant | unary | binary
    cols: tuple[int, ...]
    domain: str                    # held-out sampler key
    exclude_leaf: bool = False     # reject the bare-leaf witness (identity)

    def reference_f64(self) -> Callable:
        return _reference(self.name, self.kind, KERNELS_F64, lambda s: TERMINALS_F64[s])

    def reference_mp(self) -> Callable:
        return _reference(self.name, self.kind, KERNELS_MP, terminal_value_mp)


def _reference(name, kind, kernels, terminal):
    if kind == "constant":
        value = terminal(name)
        return lambda: value
    if name == "x":
        return lambda x: x
    if name == "y":
        return lambda x, y: y
    kernel = kernels[name]
    if kind == "unary":
        return lambda x: kernel(x)
    return lambda x, y: kernel(x, y)


def _t(name, kind, cols, domain, **kw):
    return TargetSpec(name, kind, tuple(cols), domain, **kw)


#: All 36 scientific-calculator primitives, in table order: constants and
#: input variables, unary functions, binary operations.
TABLE1_TARGETS: tuple[TargetSpec, ...] = (
    _t("pi", "constant", COLS_REAL, "real"),
    _t("e", "constant", COLS_REAL, "real"),
    _t("i", "constant", COLS_REAL, "real"),
    _t("-1", "constant", COLS_REAL, "real"),
    _t("1", "constant", COLS_REAL, "real"),
    _t("2", "constant", COLS_REAL, "real"),
    _t("x", "unary", COLS_REAL, "real"),
    _t("y", "binary", COLS_PAIR, "real2"),
    _t("exp", "unary", COLS_REAL, "real"),
    _t("ln", "unary", COLS_POS, "pos"),
    _t("inv", "unary", COLS_REAL, "real"),
    _t("half", "unary", COLS_REAL, "real"),
    _t("neg", "unary", COLS_REAL, "real"),
    _t("sqrt", "unary", COLS_POS, "pos"),
    _t("sqr", "unary", COLS_REAL, "real"),
    _t("sigma", "unary", COLS_REAL, "real"),
    _t("sin", "unary", COLS_REAL, "real"),
    _t("cos", "unary", COLS_REAL, "real"),
    _t("tan", "unary", COLS_REAL, "real"),
    _t("asin", "unary", COLS_UNIT, "unit"),
    _t("acos", "unary", COLS_UNIT, "unit"),
    _t("atan", "unary", COLS_REAL, "real"),
    _t("sinh", "unary", COLS_REAL, "real"),
    _t("cosh", "unary", COLS_REAL, "real"),
    _t("tanh", "unary", COLS_REAL, "real"),
    _t("asinh", "unary", COLS_REAL, "real"),
    _t("acosh", "unary", COLS_GE1, "ge1"),
    _t("atanh", "unary", COLS_UNIT, "unit"),
    _t("add", "binary", COLS_PAIR, "real2"),
    _t("sub", "binary", COLS_PAIR, "real2"),
    _t("mul", "binary", COLS_PAIR, "real2"),
    _t("div", "binary", COLS_PAIR, "real2"),
    _t("log", "binary", COLS_PAIR_POSPOS, "pospos"),
    _t("pow", "binary", COLS_PAIR_POSX, "posreal"),
    _t("avg", "binary", COLS_PAIR, "real2"),
    _t("hypot", "binary", COLS_PAIR, "real2"),
)


def sample_point(domain: str, rng: np.random.Generator):
    """Draw one held-out binding inside the target's real domain."""

    def away_from(lo, hi, *holes):
        while True:
            v = rng.uniform(lo, hi)
            if all(abs(v - h) > 0.05 for h in holes):
                return v

    if domain == "real":
        return (away_from(-3.0, 3.0, 0.0),)
    if domain == "pos":
        return (away_from(0.05, 4.0),)
    if domain == "unit":
        return (away_from(-0.95, 0.95, 0.0),)
    if domain == "ge1":
        return (away_from(1.05, 4.0),)
    if domain == "real2":
        return (away_from(-3.0, 3.0, 0.0), away_from(-3.0, 3.0, 0.0))
    if domain == "posreal":
        return (away_from(0.05, 4.0, 1.0), away_from(-3.0, 3.0, 0.0))
    if domain == "pospos":
        return (away_from(0.05, 4.0, 1.0), away_from(0.05, 4.0))
    raise ValueError(f"unknown domain {domain!r}")


@dataclass(frozen=True)
class TargetSet:
    targets: tuple[TargetSpec, ...] = TABLE1_TARGETS

    def __iter__(self):
        return iter(self.targets)

    def __len__(self):
        return len(self.targets)

    def names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.targets)

    def subset(self, names: Sequence[str]) -> "TargetSet":
        by_name = {t.name: t for t in self.targets}
        return TargetSet(tuple(by_name[n] for n in names))


@dataclass(frozen=True)
class Basis:
    """Terminals plus operators available to the search."""

    name: str
    terminals: tuple[str, ...]
    unary: tuple[str, ...]
    binary: tuple[str, ...]

    def __post_init__(self):
        if not self.terminals and not (self.unary or self.binary):
            raise ExprError("basis needs at least one terminal or operator")
        for sym in self.unary + self.binary:
            if sym not in KERNELS_F64:
                raise ExprError(f"basis operator {sym!r} has no kernel")

    def size(self) -> int:
        return len(self.terminals) + len(self.unary) + len(self.binary)


BUILTIN_BASES = {
    "eml": Basis("eml", ("1",), (), ("eml",)),
    "edl": Basis("edl", ("e",), (), ("edl",)),
    "lme": Basis("lme", ("-inf",), (), ("lme",)),
    "calc3": Basis("calc3", (), ("exp", "ln", "neg", "inv"), ("add",)),
    "calc2": Basis("calc2", (), ("exp", "ln"), ("sub",)),
    "calc1": Basis("calc1", ("e",), (), ("pow", "log")),
    "calc0": Basis("calc0", (), ("exp",), ("log",)),
    "wolfram": Basis("wolfram", ("pi", "e", "i"), ("ln",), ("add", "mul", "pow")),
    "newman": Basis("newman", (), ("suc", "pre", "inv"), ()),
}


def load_basis(spec: str) -> Basis:
    """Resolve a named built-in basis or a JSON file describing one."""
    if spec in BUILTIN_BASES:
        return BUILTIN_BASES[spec]
    try:
        with open(spec) as fh:
            obj = json.load(fh)
    except OSError:
        raise ExprError(
            f"unknown basis {spec!r}; choose one of {sorted(BUILTIN_BASES)} or a JSON file"
        ) from None
    return Basis(
        obj.get("name", spec),
        tuple(obj.get("terminals", ())),
        tuple(obj.get("unary", ())),
        tuple(obj.get("binary", ())),
    )
