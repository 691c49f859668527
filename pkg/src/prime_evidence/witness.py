"""The witness-to-compositeness function and exhaustive density counts.

``eval_witness(n, b)`` reports ``Outcome.COMPOSITE`` when either

* ``b**(n-1) % n != 1`` (a Fermat failure), or
* some ``i`` with ``2**i | n-1`` makes ``gcd(b**((n-1)/2**i) - 1, n)``
  a proper divisor of ``n`` (a gcd split),

and ``Outcome.INDETERMINATE`` otherwise.  Only ``i`` in ``[1, s]`` is tried,
where ``2**s`` exactly divides ``n - 1``: at ``i = 0`` the gcd is ``n``
whenever the Fermat check passed, so that case can never fire.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

from prime_evidence.arith import gcd, mod_pow, two_adic_split
from prime_evidence.errors import DomainError, ResourceLimitError

DEFAULT_DENSITY_CAP = 10**6


class Outcome(str, enum.Enum):
    COMPOSITE = "composite"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class FermatFail:
    residue: int

    def describe(self) -> str:
        return f"b^(n-1) mod n = {self.residue}"


@dataclass(frozen=True)
class GcdSplit:
    i: int
    divisor: int

    def describe(self) -> str:
        return f"gcd(b^((n-1)/2^{self.i}) - 1, n) = {self.divisor}"


@dataclass(frozen=True)
class WitnessEvaluation:
    n: int
    b: int
    outcome: Outcome
    failing_condition: FermatFail | GcdSplit | None = None

    @property
    def is_composite(self) -> bool:
        return self.outcome is Outcome.COMPOSITE


def eval_witness(n: int, b: int) -> WitnessEvaluation:
    if not isinstance(n, int) or n < 3:
        raise DomainError(f"eval_witness needs n >= 3, got {n}")
    if not isinstance(b, int) or not 1 <= b < n:
        raise DomainError(f"witness b must lie in [1, {n}), got {b}")
    s, d = two_adic_split(n - 1)
    # powers[j] = b**(d * 2**j) mod n, so b**((n-1)/2**i) is powers[s - i]
    x = mod_pow(b, d, n)
    powers = [x]
    for _ in range(s):
        x = x * x % n
        powers.append(x)
    if powers[s] != 1:
        return WitnessEvaluation(n, b, Outcome.COMPOSITE, FermatFail(powers[s]))
    for i in range(1, s + 1):
        # residue r stands for the integer r - 1; r = 1 gives gcd(0, n) = n
        g = gcd((powers[s - i] + n - 1) % n, n)
        if g != 1 and g != n:
            return WitnessEvaluation(n, b, Outcome.COMPOSITE, GcdSplit(i, g))
    return WitnessEvaluation(n, b, Outcome.INDETERMINATE)


def _check_density_input(n: int, cap: int) -> None:
    if not isinstance(n, int) or n < 5:
        raise DomainError(f"witness density needs n >= 5, got {n}")
    if n > cap:
        raise ResourceLimitError(f"n = {n} exceeds the enumeration cap {cap}")


def witness_count(n: int, *, cap: int = DEFAULT_DENSITY_CAP) -> int:
    """Number of ``b`` in ``[1, n)`` for which ``eval_witness`` says composite."""
    _check_density_input(n, cap)
    return sum(1 for b in range(1, n) if eval_witness(n, b).is_composite)


def witness_density(n: int, *, cap: int = DEFAULT_DENSITY_CAP) -> Fraction:
    """Exact fraction of ``[1, n)`` that witnesses the compositeness of ``n``."""
    return Fraction(witness_count(n, cap=cap), n - 1)
