"""Complex-domain evaluation with principal-branch and extended-real rules.

Values are numpy complex128 scalars (or arrays: every float64 kernel is
vectorised) in the default mode, and mpmath ``mpc`` in the extended-precision
mode used for verification re-checks.  The conventions, everywhere:

  * ln is the principal branch, Im(ln w) in (-pi, pi], so ln(-1) = +i pi;
  * ln 0 = -inf and exp(-inf) = 0, with signed zeros preserved;
  * overflow of exp saturates to +/-inf instead of raising;
  * NaN is a sticky error value and never compares equal to anything.

Real-by-real products are computed as IEEE real products (the generic
complex product would turn ``0 * inf`` cross terms into spurious NaNs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Union

import mpmath
import numpy as np

from .expr import (
    Apply,
    Expr,
    ExprError,
    OperatorRegistry,
    RpnProgram,
    TABLE1_REGISTRY,
    Terminal,
    Variable,
)

Value = Union[np.complex128, complex, mpmath.mpc]


class EvalError(ValueError):
    pass


class UnboundVariableError(EvalError):
    pass


# ----------------------------------------------------------------------
# float64 kernels (numpy, scalar or array)


def _make_complex(re, im):
    out = np.empty(np.broadcast(re, im).shape, dtype=np.complex128)
    out.real, out.imag = re, im
    return out


def _mul(a, b):
    p = np.multiply(a, b)
    both_real = (np.imag(a) == 0) & (np.imag(b) == 0)
    if np.any(both_real):
        real = _make_complex(np.multiply(np.real(a), np.real(b)), 0.0)
        p = np.where(both_real, real, p)
    return p


def _div(a, b):
    with np.errstate(all="ignore"):
        q = np.divide(a, b)
        bz = np.equal(b, 0)
        if np.any(bz):
            # componentwise real division keeps the signed-infinity rules
            alt = _make_complex(
                np.divide(np.real(a), np.real(b)), np.divide(np.imag(a), np.real(b))
            )
            q = np.where(bz, alt, q)
    return q


def _pow(a, b):
    return np.exp(_mul(b, np.log(a)))


KERNELS_F64 = {
    "exp": np.exp,
    "ln": np.log,
    "inv": lambda a: _div(np.complex128(1), a),
    "half": lambda a: np.divide(a, 2),
    "neg": np.negative,
    "sqrt": np.sqrt,
    "sqr": lambda a: _mul(a, a),
    "sigma": lambda a: _div(np.complex128(1), np.add(1, np.exp(np.negative(a)))),
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "asin": np.arcsin,
    "acos": np.arccos,
    "atan": np.arctan,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "tanh": np.tanh,
    "asinh": np.arcsinh,
    "acosh": np.arccosh,
    "atanh": np.arctanh,
    "add": np.add,
    "sub": np.subtract,
    "mul": _mul,
    "div": _div,
    "log": lambda a, b: _div(np.log(b), np.log(a)),
    "pow": _pow,
    "avg": lambda a, b: np.divide(np.add(a, b), 2),
    "hypot": lambda a, b: np.sqrt(np.add(_mul(a, a), _mul(b, b))),
    "eml": lambda a, b: np.subtract(np.exp(a), np.log(b)),
    "edl": lambda a, b: _div(np.exp(a), np.log(b)),
    "lme": lambda a, b: np.subtract(np.log(a), np.exp(b)),
    "suc": lambda a: np.add(a, 1),
    "pre": lambda a: np.subtract(a, 1),
}

TERMINALS_F64 = {
    "1": np.complex128(1),
    "2": np.complex128(2),
    "0": np.complex128(0),
    "-1": np.complex128(-1),
    "pi": np.complex128(math.pi),
    "e": np.complex128(math.e),
    "i": np.complex128(1j),
}


def terminal_value_f64(symbol: str) -> np.complex128:
    try:
        return TERMINALS_F64[symbol]
    except KeyError:
        pass
    try:
        return np.complex128(float(symbol))
    except ValueError:
        raise EvalError(f"terminal {symbol!r} has no numeric value") from None


# ----------------------------------------------------------------------
# extended-precision kernels (mpmath)


def _mp_div(a, b):
    try:
        return a / b
    except ZeroDivisionError:
        if mpmath.isnan(a.real) or a == 0:
            return mpmath.mpc("nan", "nan")

        def part(x):
            if x == 0:
                return mpmath.mpf(0)
            return mpmath.inf if x > 0 else mpmath.ninf

        return mpmath.mpc(part(a.real), part(a.imag))


def _mp_ln(a):
    if a == 0:
        return mpmath.mpc(mpmath.ninf, 0)
    return mpmath.log(a)


def _mp_pow(a, b):
    return mpmath.exp(b * _mp_ln(a))


KERNELS_MP = {
    "exp": mpmath.exp,
    "ln": _mp_ln,
    "inv": lambda a: _mp_div(mpmath.mpc(1), a),
    "half": lambda a: a / 2,
    "neg": lambda a: -a,
    "sqrt": mpmath.sqrt,
    "sqr": lambda a: a * a,
    "sigma": lambda a: _mp_div(mpmath.mpc(1), 1 + mpmath.exp(-a)),
    "sin": mpmath.sin,
    "cos": mpmath.cos,
    "tan": mpmath.tan,
    "asin": mpmath.asin,
    "acos": mpmath.acos,
    "atan": mpmath.atan,
    "sinh": mpmath.sinh,
    "cosh": mpmath.cosh,
    "tanh": mpmath.tanh,
    "asinh": mpmath.asinh,
    "acosh": mpmath.acosh,
    "atanh": mpmath.atanh,
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": _mp_div,
    "log": lambda a, b: _mp_div(_mp_ln(b), _mp_ln(a)),
    "pow": _mp_pow,
    "avg": lambda a, b: (a + b) / 2,
    "hypot": lambda a, b: mpmath.sqrt(a * a + b * b),
    "eml": lambda a, b: mpmath.exp(a) - _mp_ln(b),
    "edl": lambda a, b: _mp_div(mpmath.exp(a), _mp_ln(b)),
    "lme": lambda a, b: _mp_ln(a) - mpmath.exp(b),
    "suc": lambda a: a + 1,
    "pre": lambda a: a - 1,
}


def terminal_value_mp(symbol: str) -> mpmath.mpc:
    named = {
        "1": mpmath.mpc(1),
        "2": mpmath.mpc(2),
        "0": mpmath.mpc(0),
        "-1": mpmath.mpc(-1),
        "pi": mpmath.mpc(+mpmath.pi),
        "e": mpmath.mpc(mpmath.exp(1)),
        "i": mpmath.mpc(0, 1),
    }
    if symbol in named:
        return named[symbol]
    try:
        return mpmath.mpc(mpmath.mpf(symbol))
    except ValueError:
        raise EvalError(f"terminal {symbol!r} has no numeric value") from None


DEFAULT_MP_PRECISION = 256


# ----------------------------------------------------------------------
# contexts and evaluation


@dataclass(frozen=True)
class EvalContext:
    """Variable bindings plus the numeric mode used to evaluate them.

    ``precision=None`` selects float64; an integer selects the extended
    mantissa bit width.  ``constants`` supplies values for terminals beyond
    the built-in ones (used for bootstrapped primitives).
    """

    bindings: Mapping[str, Value] = field(default_factory=dict)
    precision: int | None = None
    registry: OperatorRegistry = TABLE1_REGISTRY
    constants: Mapping[str, Value] = field(default_factory=dict)

    def kernels(self):
        return KERNELS_MP if self.precision else KERNELS_F64

    def coerce(self, v: Value):
        if self.precision:
            return v if isinstance(v, mpmath.mpc) else mpmath.mpc(v)
        return np.complex128(v)

    def terminal(self, symbol: str):
        if symbol in self.constants:
            return self.coerce(self.constants[symbol])
        if self.precision:
            return terminal_value_mp(symbol)
        return terminal_value_f64(symbol)

    def variable(self, name: str):
        try:
            return self.coerce(self.bindings[name])
        except KeyError:
            raise UnboundVariableError(f"unbound variable {name!r}") from None


def _eval_expr(e: Expr, ctx: EvalContext):
    kernels = ctx.kernels()

    def walk(n: Expr):
        if isinstance(n, Apply):
            args = [walk(a) for a in n.args]
            try:
                kernel = kernels[ctx.registry[n.op].eval_tag]
            except KeyError:
                raise EvalError(f"no kernel for operator {n.op!r}") from None
            return kernel(*args)
        if isinstance(n, Variable):
            return ctx.variable(n.name)
        return ctx.terminal(n.symbol)

    return walk(e)


def _eval_rpn(p: RpnProgram, ctx: EvalContext):
    kernels = ctx.kernels()
    stack: list = []
    for tok in p.tokens:
        if tok in p.registry:
            sig = p.registry[tok]
            args = stack[-sig.arity :]
            del stack[-sig.arity :]
            try:
                kernel = kernels[sig.eval_tag]
            except KeyError:
                raise EvalError(f"no kernel for operator {tok!r}") from None
            stack.append(kernel(*args))
        elif tok in p.variables:
            stack.append(ctx.variable(tok))
        else:
            stack.append(ctx.terminal(tok))
    return stack[0]


def evaluate(obj: Expr | RpnProgram, ctx: EvalContext):
    """Evaluate a tree (bottom-up) or an RPN program (stack machine).

    Both paths apply identical kernels in identical operand order, so the
    float64 results are bit-identical.
    """
    if ctx.precision:
        with mpmath.workprec(ctx.precision):
            if isinstance(obj, RpnProgram):
                return _eval_rpn(obj, ctx)
            return _eval_expr(obj, ctx)
    with np.errstate(all="ignore"):
        if isinstance(obj, RpnProgram):
            return np.complex128(_eval_rpn(obj, ctx))
        return np.complex128(_eval_expr(obj, ctx))


# Convenience entry points for the Sheffer operators themselves.


def eml(x: Value, y: Value) -> np.complex128:
    """exp(x) - ln(y), the single sufficient operator."""
    with np.errstate(all="ignore"):
        return np.complex128(KERNELS_F64["eml"](np.complex128(x), np.complex128(y)))


def edl(x: Value, y: Value) -> np.complex128:
    """exp(x) / ln(y); companion operator, pairs with the constant e."""
    with np.errstate(all="ignore"):
        return np.complex128(KERNELS_F64["edl"](np.complex128(x), np.complex128(y)))


def neg_eml_swapped(x: Value, y: Value) -> np.complex128:
    """ln(x) - exp(y) == -eml(y, x); pairs with the terminal -inf."""
    with np.errstate(all="ignore"):
        return np.complex128(KERNELS_F64["lme"](np.complex128(x), np.complex128(y)))


# ----------------------------------------------------------------------
# comparison


def _parts(v) -> tuple[float, float] | None:
    """(re, im) in float where finite-ness can be judged; None for mp values."""
    if isinstance(v, mpmath.mpc):
        return None
    v = complex(v)
    return (v.real, v.imag)


def is_nan(v: Value) -> bool:
    if isinstance(v, (mpmath.mpc, mpmath.mpf)):
        return mpmath.isnan(v)
    v = complex(v)
    return math.isnan(v.real) or math.isnan(v.imag)


def is_finite(v: Value) -> bool:
    if isinstance(v, (mpmath.mpc, mpmath.mpf)):
        return mpmath.isfinite(v)
    v = complex(v)
    return math.isfinite(v.real) and math.isfinite(v.imag)


def near(a: Value, b: Value, rel_tol: float = 1e-10, abs_tol: float = 1e-300) -> bool:
    """True iff |a-b| <= abs_tol + rel_tol*max(|a|,|b|).

    NaN never matches anything (including NaN); infinities match only the
    exact same signed-infinity pattern.
    """
    if is_nan(a) or is_nan(b):
        return False
    if not (is_finite(a) and is_finite(b)):
        if isinstance(a, mpmath.mpc) or isinstance(b, mpmath.mpc):
            a = a if isinstance(a, mpmath.mpc) else mpmath.mpc(complex(a))
            b = b if isinstance(b, mpmath.mpc) else mpmath.mpc(complex(b))
            return a.real == b.real and a.imag == b.imag
        return complex(a) == complex(b)
    d = abs(a - b)
    return d <= abs_tol + rel_tol * max(abs(a), abs(b))


def format_value(v: Value, digits: int | None = None) -> str:
    """Render like ``2.718281828459045+0i`` (paper-style, i not j)."""
    if isinstance(v, mpmath.mpc):
        re = mpmath.nstr(v.real, digits or 20)
        im = mpmath.nstr(v.imag, digits or 20)
        sign = "" if im.startswith("-") else "+"
        return f"{re}{sign}{im}i"
    v = complex(v)
    re = repr(v.real) if digits is None else f"{v.real:.{digits}g}"
    im = repr(v.imag) if digits is None else f"{v.imag:.{digits}g}"
    if re.endswith(".0"):
        re = re[:-2]
    if im.endswith(".0"):
        im = im[:-2]
    sign = "" if im.startswith("-") else "+"
    return f"{re}{sign}{im}i"
