"""Single-instruction stack machine: the one-button RPN calculator.

The machine accepts only pure-EML programs (tokens ``1``, declared variables
and ``eml``); anything else is rejected.  Programs are straight line, so the
step count always equals K and the step limit only guards malformed input.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from .ceval import KERNELS_F64, UnboundVariableError, Value
from .expr import RpnProgram

DEFAULT_STEP_LIMIT = 10**6


class VmError(ValueError):
    pass


class NonEmlTokenError(VmError):
    pass


def _check(p: RpnProgram, step_limit: int) -> None:
    if len(p.tokens) > step_limit:
        raise VmError(f"program length {len(p.tokens)} exceeds step limit {step_limit}")
    for tok in p.tokens:
        if tok != "eml" and tok != "1" and tok not in p.variables:
            raise NonEmlTokenError(f"token {tok!r} is not part of the one-instruction set")


def run(p: RpnProgram, env: Mapping[str, Value], step_limit: int = DEFAULT_STEP_LIMIT) -> np.complex128:
    """Execute a pure-EML program; returns the single value left on the stack."""
    _check(p, step_limit)
    eml = KERNELS_F64["eml"]
    one = np.complex128(1)
    stack: list[np.complex128] = []
    with np.errstate(all="ignore"):
        for tok in p.tokens:
            if tok == "eml":
                y = stack.pop()
                x = stack.pop()
                stack.append(np.complex128(eml(x, y)))
            elif tok == "1":
                stack.append(one)
            else:
                try:
                    stack.append(np.complex128(env[tok]))
                except KeyError:
                    raise UnboundVariableError(f"unbound variable {tok!r}") from None
    return stack[0]


def trace(
    p: RpnProgram, env: Mapping[str, Value], step_limit: int = DEFAULT_STEP_LIMIT
) -> list[tuple[str, tuple[np.complex128, ...]]]:
    """As run, but returns one (token, stack snapshot) pair per step."""
    _check(p, step_limit)
    eml = KERNELS_F64["eml"]
    one = np.complex128(1)
    stack: list[np.complex128] = []
    steps: list[tuple[str, tuple[np.complex128, ...]]] = []
    with np.errstate(all="ignore"):
        for tok in p.tokens:
            if tok == "eml":
                y = stack.pop()
                x = stack.pop()
                stack.append(np.complex128(eml(x, y)))
            elif tok == "1":
                stack.append(one)
            else:
                try:
                    stack.append(np.complex128(env[tok]))
                except KeyError:
                    raise UnboundVariableError(f"unbound variable {tok!r}") from None
            steps.append((tok, tuple(stack)))
    return steps
