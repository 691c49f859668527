"""Primality decision procedures.

* ``miller_rabin_test``: ``k`` witnesses drawn with replacement from an
  entropy source; a composite survives with probability at most ``4**-k``.
* ``exhaustive_deterministic_test``: tries ``b = 1 .. (n-1)//4 + 1``.  At most
  a quarter of ``[1, n)`` are liars for composite ``n > 4``, so that many
  values always contain a witness.
* ``lucas_lehmer``: the Mersenne recurrence ``s0 = 4, s -> s*s - 2 mod 2**p - 1``.
* ``trial_division``: the independent oracle used for cross-checks.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

from prime_evidence.entropy import EntropySource, sample_uniform
from prime_evidence.errors import DomainError, ResourceLimitError
from prime_evidence.witness import WitnessEvaluation, eval_witness

DEFAULT_EXHAUSTIVE_CAP = 10**6
DEFAULT_ORACLE_CAP = 2**32


class Method(str, enum.Enum):
    MILLER_RABIN = "miller-rabin"
    EXHAUSTIVE = "exhaustive"
    LUCAS_LEHMER = "lucas-lehmer"
    TRIAL_DIVISION = "trial-division"


class Tag(str, enum.Enum):
    PRIME = "prime"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class Verdict:
    tag: Tag
    method: Method
    error_bound_exponent: int | None = None

    def __post_init__(self):
        # pre-screened small primes carry no bound, so only one direction holds
        if self.error_bound_exponent is None:
            return
        if self.method is not Method.MILLER_RABIN or self.tag is not Tag.PRIME:
            raise DomainError("error_bound_exponent is only meaningful for a Miller-Rabin prime")
        if self.error_bound_exponent < 1:
            raise DomainError("error_bound_exponent must be positive")

    @property
    def is_prime(self) -> bool:
        return self.tag is Tag.PRIME


@dataclass(frozen=True)
class LLTrace:
    p: int
    residues: tuple[int, ...] = field(default_factory=tuple)

    @property
    def modulus(self) -> int:
        return (1 << self.p) - 1


def prescreen(n: int) -> tuple[Tag, str] | None:
    """Classify inputs the witness theorems say nothing about.

    Returns ``(tag, note)`` for ``n < 4`` and even ``n``, else ``None``.
    0 and 1 are units or zero, not primes, and are filed under composite.
    """
    if n < 0:
        raise DomainError(f"n must be nonnegative, got {n}")
    if n in (0, 1):
        return Tag.COMPOSITE, "unit: 0 and 1 are not prime"
    if n in (2, 3):
        return Tag.PRIME, "small prime"
    if n % 2 == 0:
        return Tag.COMPOSITE, "even"
    return None


def miller_rabin_test(n: int, k: int, source: EntropySource
                      ) -> tuple[Verdict, list[WitnessEvaluation]]:
    if not isinstance(k, int) or k < 1:
        raise DomainError(f"k must be a positive integer, got {k}")
    screened = prescreen(n)
    if screened is not None:
        return Verdict(screened[0], Method.MILLER_RABIN), []
    evaluations = []
    for _ in range(k):
        ev = eval_witness(n, sample_uniform(source, n))
        evaluations.append(ev)
        if ev.is_composite:
            return Verdict(Tag.COMPOSITE, Method.MILLER_RABIN), evaluations
    return Verdict(Tag.PRIME, Method.MILLER_RABIN, error_bound_exponent=k), evaluations


def exhaustive_witness_count(n: int) -> int:
    return (n - 1) // 4 + 1


def exhaustive_deterministic_test(n: int, *, cap: int = DEFAULT_EXHAUSTIVE_CAP
                                  ) -> tuple[Verdict, list[WitnessEvaluation]]:
    if not isinstance(n, int) or n < 5 or n % 2 == 0:
        raise DomainError(f"the exhaustive test needs odd n >= 5, got {n}")
    if n > cap:
        raise ResourceLimitError(f"n = {n} exceeds the exhaustion cap {cap}")
    evaluations = []
    for b in range(1, exhaustive_witness_count(n) + 1):
        ev = eval_witness(n, b)
        evaluations.append(ev)
        if ev.is_composite:
            return Verdict(Tag.COMPOSITE, Method.EXHAUSTIVE), evaluations
    return Verdict(Tag.PRIME, Method.EXHAUSTIVE), evaluations


def lucas_lehmer_residues(p: int, progress: Callable[[int, int], None] | None = None
                          ) -> tuple[int, ...]:
    """``s_0 .. s_{p-2}`` reduced mod ``2**p - 1``; empty for ``p = 2``."""
    if p == 2:
        return ()
    m = (1 << p) - 1
    s = 4
    residues = [s]
    for i in range(p - 2):
        s = (s * s - 2) % m
        residues.append(s)
        if progress is not None:
            progress(i + 1, p - 2)
    return tuple(residues)


def lucas_lehmer(p: int, *, progress: Callable[[int, int], None] | None = None
                 ) -> tuple[Verdict, LLTrace]:
    if not isinstance(p, int) or p < 2:
        raise DomainError(f"Lucas-Lehmer needs an exponent p >= 2, got {p}")
    if not trial_division(p).is_prime:
        raise DomainError(f"Lucas-Lehmer needs a prime exponent; {p} is composite")
    residues = lucas_lehmer_residues(p, progress)
    prime = p == 2 or residues[-1] == 0
    tag = Tag.PRIME if prime else Tag.COMPOSITE
    return Verdict(tag, Method.LUCAS_LEHMER), LLTrace(p, residues)


def trial_division(n: int, *, cap: int = DEFAULT_ORACLE_CAP) -> Verdict:
    if not isinstance(n, int) or n < 0:
        raise DomainError(f"n must be a nonnegative integer, got {n}")
    if n > cap:
        raise ResourceLimitError(f"n = {n} exceeds the trial-division cap {cap}")

    def verdict(prime: bool) -> Verdict:
        return Verdict(Tag.PRIME if prime else Tag.COMPOSITE, Method.TRIAL_DIVISION)

    if n < 2:
        return verdict(False)
    if n < 4:
        return verdict(True)
    if n % 2 == 0:
        return verdict(False)
    for d in range(3, math.isqrt(n) + 1, 2):
        if n % d == 0:
            return verdict(False)
    return verdict(True)
