"""Vectorised enumeration of stack-valid programs with value deduplication.

The search space is organised as levels: level K holds one representative
program per distinct value vector among all programs of RPN length exactly K
whose value is not already reachable at a smaller K.  Values are evaluated at
a fixed tuple of probe columns; two programs whose values agree at every
column to the dedup grid are treated as the same function (the usual
transcendental-probe sieve argument), and the earlier one in construction
order is kept as the class representative.

Construction order within a level: unary operators in declared order applied
to the previous level, then, for each left-subtree size ascending, binary
operators in declared order with the left index major.

Entries are addressed by a global integer id; programs are reconstructed on
demand from (op, left, right) triples.  An exact 128-bit quantised key (two
independent 64-bit mixes of the mantissa-masked value bytes) backs both the
global dedup table and the column-subset lookup indexes used by the
root-decomposition solver in `bootstrap`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .ceval import KERNELS_F64
from .expr import OperatorRegistry, RpnProgram, TABLE1_REGISTRY

# Dedup grid keeps 32 mantissa bits (~2e-10 relative cells); the solver
# lookup grid keeps 26 bits (~1.5e-8) to absorb inverse-kernel roundoff.
_BUILD_MASK = np.uint64(0xFFFF_FFFF_FFF0_0000)
_LOOKUP_MASK = np.uint64(0xFFFF_FFFF_FC00_0000)

_CHUNK_ELEMS = 24_000_000  # complex128 elements per transient build chunk


def _splitmix64(x: np.ndarray) -> np.ndarray:
    z = x + np.uint64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def _quantize(values: np.ndarray, mask: np.uint64) -> np.ndarray:
    """(n, c) complex128 -> (n, 2c) uint64 mantissa-masked words."""
    words = np.ascontiguousarray(values).view(np.float64).view(np.uint64)
    return words & mask


def _hash_rows(words: np.ndarray, salt: int) -> np.ndarray:
    h = np.full(words.shape[0], np.uint64(salt), dtype=np.uint64)
    for j in range(words.shape[1]):
        mixer = (0xA076_1D64_78BD_642F * (j + 1) + salt) & 0xFFFF_FFFF_FFFF_FFFF
        w = _splitmix64(words[:, j] ^ np.uint64(mixer))
        h = (h ^ w) * np.uint64(0x100_0000_01B3)
    return _splitmix64(h)


def _keys(values: np.ndarray, mask: np.uint64) -> tuple[np.ndarray, np.ndarray]:
    words = _quantize(values, mask)
    return _hash_rows(words, 0x243F6A8885A308D3), _hash_rows(words, 0x13198A2E03707344)


class _KeyIndex:
    """Sorted (ka, kb) pairs with payload ids; exact vectorised membership."""

    def __init__(self, ka: np.ndarray, kb: np.ndarray, ids: np.ndarray):
        order = np.lexsort((kb, ka))
        self.ka = ka[order]
        self.kb = kb[order]
        self.ids = ids[order]

    def lookup(self, qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
        """ids of matches, -1 where absent."""
        n = len(self.ka)
        out = np.full(len(qa), -1, dtype=np.int64)
        if n == 0 or len(qa) == 0:
            return out
        pos = np.searchsorted(self.ka, qa, side="left")
        active = pos < n
        active[active] = self.ka[pos[active]] == qa[active]
        # ka runs are hash collisions, so this loop terminates immediately
        # in practice; it is exact regardless.
        while np.any(active):
            idx = np.nonzero(active)[0]
            hit = self.kb[pos[idx]] == qb[idx]
            out[idx[hit]] = self.ids[pos[idx[hit]]]
            cont = idx[~hit]
            pos[cont] += 1
            still = pos[cont] < n
            still[still] = self.ka[pos[cont[still]]] == qa[cont[still]]
            active[:] = False
            active[cont[still]] = True
        return out


@dataclass(frozen=True)
class Alphabet:
    """Terminals carry one value per probe column; operators carry kernels."""

    terminals: tuple[tuple[str, np.ndarray], ...]
    unary: tuple[tuple[str, Callable], ...]
    binary: tuple[tuple[str, Callable], ...]

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(
            [t for t, _ in self.terminals]
            + [s for s, _ in self.unary]
            + [s for s, _ in self.binary]
        )


def basis_alphabet(basis, columns: Sequence[tuple[float, float]], variables: Sequence[str] = ()) -> Alphabet:
    """Alphabet for a Basis at the given (x, y) probe columns."""
    from .ceval import terminal_value_f64

    ncols = len(columns)
    terms: list[tuple[str, np.ndarray]] = []
    for sym in basis.terminals:
        terms.append((sym, np.full(ncols, terminal_value_f64(sym), dtype=np.complex128)))
    xs = np.array([c[0] for c in columns], dtype=np.complex128)
    ys = np.array([c[1] for c in columns], dtype=np.complex128)
    for v in variables:
        terms.append((v, {"x": xs, "y": ys}[v]))
    unary = tuple((s, KERNELS_F64[s]) for s in basis.unary)
    binary = tuple((s, KERNELS_F64[s]) for s in basis.binary)
    return Alphabet(tuple(terms), unary, binary)


class LevelTable:
    """Levels of value-distinct programs over an alphabet."""

    def __init__(
        self,
        alphabet: Alphabet,
        *,
        allow_extended_reals: bool = True,
        registry: OperatorRegistry = TABLE1_REGISTRY,
        variables: Sequence[str] = (),
    ):
        self.alphabet = alphabet
        self.allow_extended_reals = allow_extended_reals
        self.registry = registry
        self.variables = tuple(variables)
        self.ncols = len(alphabet.terminals[0][1]) if alphabet.terminals else 0
        self.n_terminals = len(alphabet.terminals)
        self.n_unary = len(alphabet.unary)
        # per level: dict k -> dict of arrays
        self.levels: dict[int, dict[str, np.ndarray]] = {}
        self.level_offsets: dict[int, int] = {}
        self.total = 0
        self.enumerated = 0  # programs generated before pruning
        self.pruned = 0
        # global dedup store (build grid)
        self._ka: list[np.ndarray] = []
        self._kb: list[np.ndarray] = []
        self._snapshot: _KeyIndex | None = None
        self._snapshot_size = 0
        self._lookup_cache: dict[tuple[int, ...], _KeyIndex] = {}

    # -- token table -----------------------------------------------------

    def token_of(self, op_code: int) -> str:
        return self.alphabet.tokens[op_code]

    # -- global dedup ----------------------------------------------------

    def _pending_keys(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._ka:
            return np.empty(0, np.uint64), np.empty(0, np.uint64)
        return np.concatenate(self._ka), np.concatenate(self._kb)

    def _refresh_snapshot(self) -> None:
        ka, kb = self._pending_keys()
        self._snapshot = _KeyIndex(ka, kb, np.arange(len(ka), dtype=np.int64))
        self._snapshot_size = len(ka)

    def _known(self, ka: np.ndarray, kb: np.ndarray) -> np.ndarray:
        """Boolean mask: key already present in the table."""
        if self._snapshot is None or self.total - self._snapshot_size > max(
            1_000_000, self._snapshot_size
        ):
            self._refresh_snapshot()
        present = self._snapshot.lookup(ka, kb) >= 0
        tail = self.total - self._snapshot_size
        if tail > 0:
            tka, tkb = self._tail_keys(tail)
            idx = _KeyIndex(tka, tkb, np.arange(tail, dtype=np.int64))
            present |= idx.lookup(ka, kb) >= 0
        return present

    def _tail_keys(self, tail: int) -> tuple[np.ndarray, np.ndarray]:
        kas: list[np.ndarray] = []
        kbs: list[np.ndarray] = []
        need = tail
        for a, b in zip(reversed(self._ka), reversed(self._kb)):
            kas.append(a[-need:] if need < len(a) else a)
            kbs.append(b[-need:] if need < len(b) else b)
            need -= min(need, len(a))
            if need == 0:
                break
        return np.concatenate(kas[::-1]), np.concatenate(kbs[::-1])

    # -- level construction ----------------------------------------------

    def build_level(self, k: int) -> int:
        """Build level k; returns number of entries added."""
        if k in self.levels:
            return len(self.levels[k]["ops"])
        self.level_offsets[k] = self.total
        store = {
            "values": [],
            "ops": [],
            "lhs": [],
            "rhs": [],
        }
        if k == 1:
            n = self.n_terminals
            if n:
                vals = np.stack([v for _, v in self.alphabet.terminals])
                ops = np.arange(n, dtype=np.int16)
                none = np.full(n, -1, dtype=np.int64)
                self._absorb(store, vals, ops, none, none)
        else:
            prev = self.levels.get(k - 1)
            if prev is not None and len(prev["ops"]):
                base = self.level_offsets[k - 1]
                pvals = prev["values"]
                pids = base + np.arange(len(prev["ops"]), dtype=np.int64)
                for u, (sym, kern) in enumerate(self.alphabet.unary):
                    code = np.int16(self.n_terminals + u)
                    with np.errstate(all="ignore"):
                        vals = np.asarray(kern(pvals), dtype=np.complex128)
                    self._absorb(
                        store,
                        vals,
                        np.full(len(pids), code, dtype=np.int16),
                        pids,
                        np.full(len(pids), -1, dtype=np.int64),
                    )
            for i in range(1, k - 1):
                j = k - 1 - i
                li, lj = self.levels.get(i), self.levels.get(j)
                if li is None or lj is None or not len(li["ops"]) or not len(lj["ops"]):
                    continue
                for b, (sym, kern) in enumerate(self.alphabet.binary):
                    code = np.int16(self.n_terminals + self.n_unary + b)
                    self._binary_products(store, i, j, kern, code)
        added = self._commit(k, store)
        return added

    def _binary_products(self, store, i: int, j: int, kern, code: np.int16) -> None:
        li, lj = self.levels[i], self.levels[j]
        lvals, rvals = li["values"], lj["values"]
        nl, nr = len(li["ops"]), len(lj["ops"])
        lids = self.level_offsets[i] + np.arange(nl, dtype=np.int64)
        rids = self.level_offsets[j] + np.arange(nr, dtype=np.int64)
        rows_per_chunk = max(1, _CHUNK_ELEMS // max(1, nr * self.ncols))
        for lo in range(0, nl, rows_per_chunk):
            hi = min(nl, lo + rows_per_chunk)
            c = hi - lo
            out = np.empty((c * nr, self.ncols), dtype=np.complex128)
            with np.errstate(all="ignore"):
                for col in range(self.ncols):
                    prod = kern(lvals[lo:hi, col][:, None], rvals[None, :, col])
                    out[:, col] = np.asarray(prod, dtype=np.complex128).reshape(-1)
            ops = np.full(c * nr, code, dtype=np.int16)
            lhs = np.repeat(lids[lo:hi], nr)
            rhs = np.tile(rids, c)
            self._absorb(store, out, ops, lhs, rhs)

    def _absorb(self, store, values, ops, lhs, rhs) -> None:
        self.enumerated += len(ops)
        keep = ~np.isnan(values).any(axis=1)
        if not self.allow_extended_reals:
            keep &= np.isfinite(values).all(axis=1)
        if not keep.all():
            values, ops, lhs, rhs = values[keep], ops[keep], lhs[keep], rhs[keep]
        if not len(ops):
            return
        ka, kb = _keys(values, _BUILD_MASK)
        # first occurrence within the chunk
        order = np.lexsort((np.arange(len(ka)), kb, ka))
        ska, skb = ka[order], kb[order]
        first = np.ones(len(ska), dtype=bool)
        first[1:] = (ska[1:] != ska[:-1]) | (skb[1:] != skb[:-1])
        reps = np.sort(order[first])
        ka, kb = ka[reps], kb[reps]
        fresh = ~self._known(ka, kb)
        reps = reps[fresh]
        self.pruned += len(ops) - len(reps)
        if not len(reps):
            return
        store["values"].append(values[reps])
        store["ops"].append(ops[reps])
        store["lhs"].append(lhs[reps])
        store["rhs"].append(rhs[reps])
        self._ka.append(ka[fresh])
        self._kb.append(kb[fresh])
        self.total += len(reps)

    def _commit(self, k: int, store) -> int:
        if store["ops"]:
            level = {
                "values": np.concatenate(store["values"]),
                "ops": np.concatenate(store["ops"]),
                "lhs": np.concatenate(store["lhs"]),
                "rhs": np.concatenate(store["rhs"]),
            }
        else:
            level = {
                "values": np.empty((0, self.ncols), dtype=np.complex128),
                "ops": np.empty(0, dtype=np.int16),
                "lhs": np.empty(0, dtype=np.int64),
                "rhs": np.empty(0, dtype=np.int64),
            }
        self.levels[k] = level
        self._lookup_cache.clear()
        return len(level["ops"])

    # -- reconstruction and queries ---------------------------------------

    def _locate(self, gid: int) -> tuple[int, int]:
        for k in sorted(self.levels, reverse=True):
            off = self.level_offsets[k]
            if gid >= off:
                return k, gid - off
        raise KeyError(gid)

    def size_of(self, gid: int) -> int:
        return self._locate(gid)[0]

    def tokens_of(self, gid: int) -> tuple[str, ...]:
        k, idx = self._locate(gid)
        level = self.levels[k]
        op = int(level["ops"][idx])
        if op < self.n_terminals:
            return (self.alphabet.tokens[op],)
        lhs, rhs = int(level["lhs"][idx]), int(level["rhs"][idx])
        if rhs < 0:
            return self.tokens_of(lhs) + (self.alphabet.tokens[op],)
        return self.tokens_of(lhs) + self.tokens_of(rhs) + (self.alphabet.tokens[op],)

    def program_of(self, gid: int) -> RpnProgram:
        return RpnProgram(self.tokens_of(gid), self.registry, self.variables or ("x", "y", "z"))

    def value_row(self, gid: int) -> np.ndarray:
        k, idx = self._locate(gid)
        return self.levels[k]["values"][idx]

    def match_level(
        self,
        k: int,
        ref: np.ndarray,
        cols: Sequence[int],
        rel_tol: float = 1e-10,
        abs_tol: float = 1e-300,
    ) -> np.ndarray:
        """Global ids of level-k entries near ref (one value per col)."""
        level = self.levels.get(k)
        if level is None or not len(level["ops"]):
            return np.empty(0, dtype=np.int64)
        ok = np.ones(len(level["ops"]), dtype=bool)
        vals = level["values"]
        for c, r in zip(cols, ref):
            col = vals[:, c]
            if np.isnan(r.real) or np.isnan(r.imag):
                return np.empty(0, dtype=np.int64)
            if np.isfinite(r.real) and np.isfinite(r.imag):
                with np.errstate(all="ignore"):
                    d = np.abs(col - r)
                    ok &= np.isfinite(col.real) & np.isfinite(col.imag)
                    ok &= d <= abs_tol + rel_tol * np.maximum(np.abs(col), abs(r))
            else:
                ok &= (col.real == r.real) & (col.imag == r.imag)
        return self.level_offsets[k] + np.nonzero(ok)[0].astype(np.int64)

    def lookup_index(self, k: int, cols: tuple[int, ...]) -> _KeyIndex:
        """Coarse-grid key index over the level-k entries, restricted to cols."""
        cache_key = (k, cols)
        idx = self._lookup_cache.get(cache_key)
        if idx is None:
            level = self.levels.get(k)
            if level is None or not len(level["ops"]):
                e = np.empty(0, np.uint64)
                idx = _KeyIndex(e, e, np.empty(0, np.int64))
            else:
                sub = np.ascontiguousarray(level["values"][:, list(cols)])
                ka, kb = _keys(sub, _LOOKUP_MASK)
                ids = self.level_offsets[k] + np.arange(len(ka), dtype=np.int64)
                idx = _KeyIndex(ka, kb, ids)
            self._lookup_cache[cache_key] = idx
        return idx

    def lookup_rows(self, rows: np.ndarray, k: int, cols: tuple[int, ...]) -> np.ndarray:
        """Level-k entries whose values at cols quantise like the given rows."""
        index = self.lookup_index(k, cols)
        ka, kb = _keys(np.ascontiguousarray(rows), _LOOKUP_MASK)
        return index.lookup(ka, kb)

    def built_max(self) -> int:
        return max(self.levels, default=0)


# ----------------------------------------------------------------------
# inverse kernels for the root-decomposition solver


def _ln_branches(w: np.ndarray) -> list[np.ndarray]:
    with np.errstate(all="ignore"):
        base = np.log(w)
    return [base, base + 2j * np.pi, base - 2j * np.pi]


def _wrap(fn):
    def inner(*args):
        with np.errstate(all="ignore"):
            out = fn(*args)
        return out if isinstance(out, list) else [out]

    return inner


#: op -> f(left_values, target) -> candidate right values (list of branches)
SOLVE_RIGHT = {
    "add": _wrap(lambda l, t: t - l),
    "sub": _wrap(lambda l, t: l - t),
    "mul": _wrap(lambda l, t: t / l),
    "div": _wrap(lambda l, t: l / t),
    "avg": _wrap(lambda l, t: 2 * t - l),
    "hypot": _wrap(lambda l, t: [np.sqrt(t * t - l * l), -np.sqrt(t * t - l * l)]),
    "pow": _wrap(lambda l, t: [b / np.log(l) for b in _ln_branches(t)]),
    "log": _wrap(lambda l, t: np.exp(t * np.log(l))),
    "eml": _wrap(lambda l, t: np.exp(np.exp(l) - t)),
    "edl": _wrap(lambda l, t: np.exp(np.exp(l) / t)),
    "lme": _wrap(lambda l, t: _ln_branches(np.log(l) - t)),
}

#: op -> f(right_values, target) -> candidate left values
SOLVE_LEFT = {
    "add": _wrap(lambda r, t: t - r),
    "sub": _wrap(lambda r, t: t + r),
    "mul": _wrap(lambda r, t: t / r),
    "div": _wrap(lambda r, t: t * r),
    "avg": _wrap(lambda r, t: 2 * t - r),
    "hypot": _wrap(lambda r, t: [np.sqrt(t * t - r * r), -np.sqrt(t * t - r * r)]),
    "pow": _wrap(lambda r, t: [np.exp(b / r) for b in _ln_branches(t)]),
    "log": _wrap(lambda r, t: np.exp(np.log(r) / t)),
    "eml": _wrap(lambda r, t: _ln_branches(t + np.log(r))),
    "edl": _wrap(lambda r, t: _ln_branches(t * np.log(r))),
    "lme": _wrap(lambda r, t: np.exp(t + np.exp(r))),
}

class Decomposer:
    """Find programs of length K > built levels by root decomposition.

    A witness of length K has a root operator with children of sizes summing
    to K-1.  Splits whose sides both exist as built levels are covered
    exhaustively: enumerate the smaller side, solve for the value the other
    side must take, and look the solved value up in that level.  Splits with
    one side beyond the built levels recurse through the same machinery on
    the solved value.  For eml the right-solve is unique, so coverage is
    complete apart from multivalued left-solves (the +/- 2 pi i ladder is
    truncated to three rungs) and the coarse lookup grid; every candidate is
    re-verified by the caller before being trusted.
    """

    def __init__(self, table: LevelTable, rel_tol: float = 1e-10):
        self.table = table
        self.rel_tol = rel_tol
        self._memo: dict[tuple, tuple[tuple[str, ...], ...]] = {}

    def _solvers(self):
        alpha = self.table.alphabet
        out = []
        for b, (sym, _) in enumerate(alpha.binary):
            code = alpha.tokens[self.table.n_terminals + self.table.n_unary + b]
            out.append((code, SOLVE_RIGHT.get(sym), SOLVE_LEFT.get(sym)))
        return out

    def eval_tokens(self, tokens: tuple[str, ...]) -> np.ndarray:
        """Evaluate a program over the probe columns with the build kernels."""
        alpha = self.table.alphabet
        terms = dict(alpha.terminals)
        kerns = dict(alpha.unary + alpha.binary)
        arity = {s: 1 for s, _ in alpha.unary}
        arity.update({s: 2 for s, _ in alpha.binary})
        stack: list[np.ndarray] = []
        with np.errstate(all="ignore"):
            for t in tokens:
                if t in kerns:
                    if arity[t] == 1:
                        stack.append(np.asarray(kerns[t](stack.pop()), dtype=np.complex128))
                    else:
                        b = stack.pop()
                        a = stack.pop()
                        stack.append(np.asarray(kerns[t](a, b), dtype=np.complex128))
                else:
                    stack.append(terms[t])
        return stack[0]

    def _consistent(self, tokens, ref, cols) -> bool:
        """Re-evaluate an assembled candidate; rejects grid/overflow artifacts."""
        vals = self.eval_tokens(tokens)
        for c, r in zip(cols, ref):
            v = complex(vals[c])
            if np.isnan(v.real) or np.isnan(v.imag):
                return False
            if np.isfinite(r.real) and np.isfinite(r.imag):
                if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                    return False
                if abs(v - r) > 1e-300 + 1e-8 * max(abs(v), abs(r)):
                    return False
            elif (v.real, v.imag) != (r.real, r.imag):
                return False
        return True

    def witnesses_at(self, k: int, ref: np.ndarray, cols: tuple[int, ...], limit: int = 64):
        """Candidate token tuples of length exactly k matching ref at cols."""
        ref = np.asarray(ref, dtype=np.complex128)
        if np.isnan(ref.real).any() or np.isnan(ref.imag).any():
            return ()
        if k < 1:
            return ()
        if k <= self.table.built_max():
            ids = self.table.match_level(k, ref, cols, rel_tol=self.rel_tol)
            return tuple(self.table.tokens_of(int(g)) for g in ids[:limit])
        key = (k, cols, _quantize(ref[None, :], _LOOKUP_MASK).tobytes())
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        self._memo[key] = ()  # cut cycles while computing
        found: list[tuple[str, ...]] = []
        self._unary_roots(k, ref, cols, found, limit)
        self._binary_roots(k, ref, cols, found, limit)
        found = [t for t in found if self._consistent(t, ref, cols)]
        found.sort(key=self._lex_key)
        result = tuple(found[:limit])
        self._memo[key] = result
        return result

    def _lex_key(self, tokens: tuple[str, ...]):
        order = {t: i for i, t in enumerate(self.table.alphabet.tokens)}
        return tuple(order.get(t, len(order)) for t in tokens)

    def _unary_roots(self, k, ref, cols, found, limit):
        alpha = self.table.alphabet
        for u, (sym, _) in enumerate(alpha.unary):
            tok = alpha.tokens[self.table.n_terminals + u]
            pre = PREIMAGES.get(sym)
            if pre is None:
                continue
            for row in pre(ref):
                row = np.asarray(row, dtype=np.complex128)
                if np.isnan(row.real).any() or np.isnan(row.imag).any():
                    continue
                for child in self.witnesses_at(k - 1, row, cols, limit=4):
                    found.append(child + (tok,))
                    if len(found) >= limit:
                        return

    def _binary_roots(self, k, ref, cols, found, limit):
        built = self.table.built_max()
        for i in range(1, k - 1):
            j = k - 1 - i
            if i > built and j > built:
                continue
            if i <= built and j <= built:
                self._two_sided(k, i, j, ref, cols, found, limit)
            else:
                self._one_sided(k, i, j, ref, cols, found, limit)
            if len(found) >= limit:
                return

    def _side_values(self, level_k: int, cols):
        level = self.table.levels.get(level_k)
        if level is None or not len(level["ops"]):
            return None, None
        vals = np.ascontiguousarray(level["values"][:, list(cols)])
        ids = self.table.level_offsets[level_k] + np.arange(len(level["ops"]), dtype=np.int64)
        return vals, ids

    #: enumerated-side cap for expanding per-column branch combinations of
    #: multivalued solves (the +/- 2 pi i ladder can differ per column when
    #: the target changes sign across probes)
    _MIX_CAP = 512

    def _two_sided(self, k, i, j, ref, cols, found, limit):
        # enumerate the smaller side, look the solved value up in the other
        enum_left = (self.table.levels.get(i) is not None) and (
            len(self.table.levels[i]["ops"]) <= len(self.table.levels.get(j, {"ops": ()})["ops"])
        )
        for code, solve_r, solve_l in self._solvers():
            if enum_left and solve_r is not None:
                vals, ids = self._side_values(i, cols)
                if vals is None:
                    return
                with np.errstate(all="ignore"):
                    branches = solve_r(vals, ref[None, :])
                self._lookup_side(k, branches, ids, j, cols, code, left_known=True, found=found, limit=limit)
            elif solve_l is not None:
                vals, ids = self._side_values(j, cols)
                if vals is None:
                    return
                with np.errstate(all="ignore"):
                    branches = solve_l(vals, ref[None, :])
                self._lookup_side(k, branches, ids, i, cols, code, left_known=False, found=found, limit=limit)
            if len(found) >= limit:
                return

    @staticmethod
    def _mixed_rows(branches: list[np.ndarray]) -> list[np.ndarray]:
        """Per-column branch combinations (beyond the uniform-branch rows)."""
        from itertools import product

        stack = np.stack(branches)  # (B, n, C)
        B, _, C = stack.shape
        out = []
        for combo in product(range(B), repeat=C):
            if len(set(combo)) == 1:
                continue  # uniform rows are handled directly
            out.append(np.stack([stack[combo[c], :, c] for c in range(C)], axis=1))
        return out

    def _lookup_side(self, k, branches, known_ids, need_k, cols, code, left_known, found, limit):
        rows_list = list(branches)
        if len(branches) > 1 and len(known_ids) <= self._MIX_CAP:
            rows_list += self._mixed_rows(branches)
        for solved in rows_list:
            # non-finite solved values are overflow artifacts: an entry worth
            # +/-inf can never complete a finite-valued parent consistently
            ok = np.isfinite(solved.real).all(axis=1) & np.isfinite(solved.imag).all(axis=1)
            if not ok.any():
                continue
            rows = solved[ok]
            kids = known_ids[ok]
            hits = self.table.lookup_rows(rows, need_k, cols)
            for pos in np.nonzero(hits >= 0)[0]:
                other = int(hits[pos])
                known_tokens = self.table.tokens_of(int(kids[pos]))
                other_tokens = self.table.tokens_of(other)
                if left_known:
                    found.append(known_tokens + other_tokens + (code,))
                else:
                    found.append(other_tokens + known_tokens + (code,))
                if len(found) >= limit:
                    return

    def _one_sided(self, k, i, j, ref, cols, found, limit):
        built = self.table.built_max()
        small, big, small_is_left = (i, j, True) if i <= built else (j, i, False)
        vals, ids = self._side_values(small, cols)
        if vals is None:
            return
        if len(vals) > 4096:
            return  # recursion fan-out guard; larger sides are covered two-sided
        for code, solve_r, solve_l in self._solvers():
            solve = solve_r if small_is_left else solve_l
            if solve is None:
                continue
            with np.errstate(all="ignore"):
                branches = solve(vals, ref[None, :])
            for solved in branches:
                bad = np.isnan(solved.real).any(axis=1) | np.isnan(solved.imag).any(axis=1)
                for row_idx in np.nonzero(~bad)[0]:
                    for other_tokens in self.witnesses_at(big, solved[row_idx], cols, limit=2):
                        small_tokens = self.table.tokens_of(int(ids[row_idx]))
                        if small_is_left:
                            found.append(small_tokens + other_tokens + (code,))
                        else:
                            found.append(other_tokens + small_tokens + (code,))
                        if len(found) >= limit:
                            return


#: unary op -> f(target) -> candidate argument values
PREIMAGES = {
    "exp": _wrap(lambda t: _ln_branches(t)),
    "ln": _wrap(np.exp),
    "inv": _wrap(lambda t: 1 / t),
    "half": _wrap(lambda t: 2 * t),
    "neg": _wrap(lambda t: -t),
    "sqrt": _wrap(lambda t: t * t),
    "sqr": _wrap(lambda t: [np.sqrt(t), -np.sqrt(t)]),
    "sigma": _wrap(lambda t: [-b for b in _ln_branches(1 / t - 1)]),
    "sin": _wrap(lambda t: [np.arcsin(t), np.pi - np.arcsin(t), -np.pi - np.arcsin(t)]),
    "cos": _wrap(lambda t: [np.arccos(t), -np.arccos(t)]),
    "tan": _wrap(lambda t: [np.arctan(t), np.arctan(t) + np.pi, np.arctan(t) - np.pi]),
    "asin": _wrap(np.sin),
    "acos": _wrap(np.cos),
    "atan": _wrap(np.tan),
    "sinh": _wrap(lambda t: [np.arcsinh(t), 1j * np.pi - np.arcsinh(t), -1j * np.pi - np.arcsinh(t)]),
    "cosh": _wrap(lambda t: [np.arccosh(t), -np.arccosh(t)]),
    "tanh": _wrap(lambda t: [np.arctanh(t), np.arctanh(t) + 1j * np.pi]),
    "asinh": _wrap(np.sinh),
    "acosh": _wrap(np.cosh),
    "atanh": _wrap(np.tanh),
    "suc": _wrap(lambda t: t - 1),
    "pre": _wrap(lambda t: t + 1),
}
