"""Reference enumerator: stack-valid programs in lexicographic order.

Token order is the declared basis order: terminals, then input variables,
then unary operators, then binary operators.  The vectorised search engine
(`valuedp`) covers the same space with value deduplication; this generator
is the plain, exhaustive ground truth used by tests and small searches.
"""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from .bases import Basis
from .expr import OperatorRegistry, RpnProgram, TABLE1_REGISTRY


def _token_row(basis: Basis, variables: Sequence[str]) -> list[tuple[str, int]]:
    row = [(t, 0) for t in basis.terminals]
    row += [(v, 0) for v in variables]
    row += [(u, 1) for u in basis.unary]
    row += [(b, 2) for b in basis.binary]
    return row


def enumerate_expressions(
    basis: Basis,
    k: int,
    variables: Sequence[str] = (),
    registry: OperatorRegistry = TABLE1_REGISTRY,
) -> Iterator[RpnProgram]:
    """Yield every stack-valid program of length exactly k, each once."""
    if k < 1:
        return
    tokens = _token_row(basis, variables)
    has_unary = any(a == 1 for _, a in tokens)
    prefix: list[str] = []
    varset = tuple(variables) if variables else ("x", "y", "z")

    def feasible(depth: int, remaining: int) -> bool:
        # each binary op closes one operand; terminals open one
        if depth < 1 or remaining < depth - 1:
            return False
        if not has_unary and (remaining - (depth - 1)) % 2 != 0:
            return False
        return True

    def rec(depth: int, remaining: int) -> Iterator[RpnProgram]:
        if remaining == 0:
            if depth == 1:
                yield RpnProgram(tuple(prefix), registry, varset)
            return
        for tok, arity in tokens:
            if depth < arity:
                continue
            nd = depth - arity + 1
            if not feasible(nd, remaining - 1):
                continue
            prefix.append(tok)
            yield from rec(nd, remaining - 1)
            prefix.pop()

    yield from rec(0, k)


def count_expressions(basis: Basis, k: int, variables: Sequence[str] = ()) -> int:
    """Number of stack-valid programs of length exactly k (no enumeration)."""
    n_term = len(basis.terminals) + len(variables)
    n_un = len(basis.unary)
    n_bin = len(basis.binary)
    # counts[d] = programs-so-far reaching stack depth d
    counts = {0: 1}
    for _ in range(k):
        nxt: dict[int, int] = {}
        for d, c in counts.items():
            if n_term:
                nxt[d + 1] = nxt.get(d + 1, 0) + c * n_term
            if n_un and d >= 1:
                nxt[d] = nxt.get(d, 0) + c * n_un
            if n_bin and d >= 2:
                nxt[d - 1] = nxt.get(d - 1, 0) + c * n_bin
        counts = nxt
    return counts.get(1, 0)


def random_pure_eml(
    k: int,
    rng: np.random.Generator,
    variables: Sequence[str] = ("x",),
    registry: OperatorRegistry = TABLE1_REGISTRY,
) -> RpnProgram:
    """Uniformly shaped random pure-EML program of odd length k."""
    if k % 2 == 0:
        raise ValueError("pure-EML programs have odd length")
    leaves = ["1"] + list(variables)

    def build(n: int) -> list[str]:
        if n == 1:
            return [leaves[rng.integers(len(leaves))]]
        i = 2 * int(rng.integers((n - 1) // 2)) + 1  # odd split
        return build(i) + build(n - 1 - i) + ["eml"]

    return RpnProgram(tuple(build(k)), registry, tuple(variables) or ("x",))
