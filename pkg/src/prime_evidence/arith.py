"""Integer primitives used by the witness function and the testers.

Python's ``int`` is the arbitrary-magnitude carrier throughout; nothing here
wraps it.
"""
from __future__ import annotations

import math
from typing import NamedTuple

from prime_evidence.errors import DomainError


class TwoAdicSplit(NamedTuple):
    s: int
    d: int


def _check_natural(name: str, value: int) -> None:
    if not isinstance(value, int) or isinstance(value, bool):
        raise DomainError(f"{name} must be an integer, got {type(value).__name__}")
    if value < 0:
        raise DomainError(f"{name} must be nonnegative, got {value}")


def mod_pow(base: int, exponent: int, modulus: int) -> int:
    """Return ``base ** exponent % modulus``.

    A modulus of 1 yields 0, the only residue.
    """
    _check_natural("base", base)
    _check_natural("exponent", exponent)
    _check_natural("modulus", modulus)
    if modulus == 0:
        raise DomainError("modulus must be at least 1")
    # CPython's three-argument pow is binary square-and-multiply (windowed for
    # long exponents); it is exact for every size we handle.
    return pow(base, exponent, modulus)


def gcd(a: int, b: int) -> int:
    _check_natural("a", a)
    _check_natural("b", b)
    return math.gcd(a, b)


def two_adic_split(m: int) -> TwoAdicSplit:
    """Write ``m = 2**s * d`` with ``d`` odd."""
    _check_natural("m", m)
    if m == 0:
        raise DomainError("two_adic_split is undefined for 0")
    s = (m & -m).bit_length() - 1
    return TwoAdicSplit(s, m >> s)
