"""Exhaustive minimal-K search for pure-EML programs.

Levels of value-distinct programs are built exhaustively while they fit the
build budget; beyond that the root-decomposition engine covers the remaining
lengths.  A reported K therefore means: no stack-valid pure-EML program of
any smaller length matches the target at the probe points, and the returned
witness passes the float64 sieve plus the extended-precision re-check.

With ``allow_extended_reals=False`` any candidate whose own value or whose
subprogram values hit +/-inf or NaN at a probe point is discarded, which
reproduces the parenthesised column of the complexity table.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import mpmath
import numpy as np

from . import bases
from .bases import BUILTIN_BASES, Basis
from .ceval import DEFAULT_MP_PRECISION, EvalContext, evaluate, near
from .expr import Expr, RpnProgram, TABLE1_REGISTRY, free_variables
from .parser import parse_math
from .valuedp import Decomposer, LevelTable, basis_alphabet

#: raw parent-candidate budget: stop materialising levels past this estimate
BUILD_RAW_CAP = 6_000_000
KMAX_DEFAULT = 19
KMAX_LONG = 29


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class SearchTask:
    target: str | Expr
    k_ceiling: int = KMAX_DEFAULT
    allow_extended_reals: bool = True
    exclude_leaf: bool = False
    rel_tol: float = 1e-10
    ext_tol: float = 1e-40
    precision: int = DEFAULT_MP_PRECISION


@dataclass(frozen=True)
class SearchReport:
    target: str
    k: int | None
    rpn: str | None
    k_reached: int
    enumerated_count: int
    pruned_count: int

    @property
    def found(self) -> bool:
        return self.k is not None


def _target_expr(target: str | Expr) -> Expr:
    if isinstance(target, str):
        return parse_math(target)
    return target


#: column families tried in order; first one where the reference is finite
#: and real everywhere wins.  Families with a negative abscissa come first so
#: targets defined on the negative axis are probed there.
_UNARY_FAMILIES = (bases.COLS_REAL, bases.COLS_POS, bases.COLS_UNIT, bases.COLS_GE1)
_BINARY_FAMILIES = (bases.COLS_PAIR, bases.COLS_PAIR_POSX, bases.COLS_PAIR_POSPOS)


def _pick_columns(expr: Expr, variables: tuple[str, ...]):
    """Column family whose bindings lie in the target's real domain."""
    all_cols = bases._columns_f64()
    families = _BINARY_FAMILIES if "y" in variables else _UNARY_FAMILIES
    last_err = None
    for fam in families:
        refs = []
        good = True
        for c in fam:
            x, y = all_cols[c]
            ctx = EvalContext(bindings={"x": x, "y": y, "z": x})
            v = complex(evaluate(expr, ctx))
            if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                good = False
                break
            if abs(v.imag) > 1e-9 * max(1.0, abs(v)):
                good = False
                break
            refs.append(np.complex128(v))
        if good:
            return fam, np.array(refs, dtype=np.complex128)
        last_err = fam
    raise SearchError(
        f"target is not real-valued on any probe family (last tried {last_err})"
    )


def _mp_refs(expr: Expr, cols: Sequence[int], precision: int):
    out = []
    with mpmath.workprec(precision):
        mp_cols = bases._columns_mp()
        for c in cols:
            x, y = mp_cols[c]
            ctx = EvalContext(
                bindings={"x": mpmath.mpc(x), "y": mpmath.mpc(y), "z": mpmath.mpc(x)},
                precision=precision,
            )
            out.append(evaluate(expr, ctx))
    return out


def _verify_extended(
    tokens: tuple[str, ...],
    expr: Expr,
    cols: Sequence[int],
    variables: tuple[str, ...],
    precision: int,
    ext_tol: float,
) -> bool:
    prog = RpnProgram(tokens, TABLE1_REGISTRY, variables or ("x",))
    refs = _mp_refs(expr, cols, precision)
    with mpmath.workprec(precision):
        mp_cols = bases._columns_mp()
        for c, ref in zip(cols, refs):
            x, y = mp_cols[c]
            ctx = EvalContext(
                bindings={"x": mpmath.mpc(x), "y": mpmath.mpc(y), "z": mpmath.mpc(x)},
                precision=precision,
            )
            got = evaluate(prog, ctx)
            if not near(got, ref, rel_tol=ext_tol, abs_tol=1e-300):
                return False
    return True


def _estimate_next(table: LevelTable, k: int) -> int:
    sizes = {kk: len(lvl["ops"]) for kk, lvl in table.levels.items()}
    est = len(table.alphabet.unary) * sizes.get(k - 1, 0)
    for i in range(1, k - 1):
        est += len(table.alphabet.binary) * sizes.get(i, 0) * sizes.get(k - 1 - i, 0)
    return est


def shortest(task: SearchTask) -> SearchReport:
    """Minimal K and a sieve-verified witness, or a lower-bound report."""
    expr = _target_expr(task.target)
    name = task.target if isinstance(task.target, str) else str(task.target)
    variables = tuple(v for v in ("x", "y") if v in free_variables(expr))
    if free_variables(expr) - {"x", "y"}:
        raise SearchError("search targets may only use the variables x and y")
    cols, refs = _pick_columns(expr, variables)

    basis = BUILTIN_BASES["eml"]
    alphabet = basis_alphabet(basis, bases._columns_f64(), variables=variables)
    table = LevelTable(
        alphabet,
        allow_extended_reals=task.allow_extended_reals,
        registry=TABLE1_REGISTRY,
        variables=variables,
    )
    decomp = Decomposer(table, rel_tol=task.rel_tol)

    k_reached = 0
    for k in range(1, task.k_ceiling + 1, 2):
        if k == 1 and task.exclude_leaf:
            k_reached = 1
            continue
        while table.built_max() < k:
            nxt = table.built_max() + 1
            if _estimate_next(table, nxt) > BUILD_RAW_CAP:
                break
            table.build_level(nxt)
        if k <= table.built_max():
            candidates = [
                table.tokens_of(int(g))
                for g in table.match_level(k, refs, cols, rel_tol=task.rel_tol)
            ]
        else:
            candidates = list(decomp.witnesses_at(k, refs, cols))
        k_reached = k
        order = {t: i for i, t in enumerate(alphabet.tokens)}
        candidates.sort(key=lambda toks: tuple(order.get(t, 99) for t in toks))
        for tokens in candidates:
            if task.exclude_leaf and len(tokens) == 1:
                continue
            if _verify_extended(tokens, expr, cols, variables, task.precision, task.ext_tol):
                prog = RpnProgram(tokens, TABLE1_REGISTRY, variables or ("x",))
                return SearchReport(
                    name, k, prog.to_string(), k, table.enumerated, table.pruned
                )
    return SearchReport(name, None, None, k_reached, table.enumerated, table.pruned)


def canonical_prune(p: RpnProgram, table: LevelTable) -> bool:
    """True iff p is the kept representative of its value class."""
    if not p.is_pure_eml():
        raise SearchError("canonical_prune applies to pure-EML programs")
    variables = tuple(v for v in p.variables if v in p.tokens)
    cols = bases._columns_f64()
    vals = []
    with np.errstate(all="ignore"):
        for x, y in cols:
            ctx = EvalContext(bindings={"x": x, "y": y, "z": x})
            vals.append(evaluate(p, ctx))
    row = np.array(vals, dtype=np.complex128)[None, :]
    if np.isnan(row).any():
        return False
    if not table.allow_extended_reals and not np.isfinite(row).all():
        return False
    for k in sorted(table.levels):
        hits = table.lookup_rows(row, k, tuple(range(table.ncols)))
        if hits[0] >= 0:
            return table.tokens_of(int(hits[0])) == p.tokens
    return True
