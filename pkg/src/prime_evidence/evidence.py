"""Certificates: randomized evidence records and deterministic proof transcripts.

An :class:`EvidenceRecord` stores the witnesses a Miller-Rabin run drew and
what the witness function said about each.  It is evidence that a primality
proof exists, not a proof.  A :class:`ProofTranscript` stores a complete
deterministic trail (every exhaustive witness, or every Lucas-Lehmer residue).

Both serialize to canonical JSON (``.pev`` files): sorted keys, no
insignificant whitespace, UTF-8, a trailing newline, and every unbounded
integer written as a decimal string without leading zeros.

Replay re-derives the deterministic consequences of what was recorded.  It
never draws new randomness.
"""
from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Union

from prime_evidence.entropy import EntropyDescriptor, EntropySource
from prime_evidence.errors import DomainError, MalformedError, PrimeEvidenceError
from prime_evidence.testers import (
    LLTrace,
    Method,
    Tag,
    Verdict,
    exhaustive_deterministic_test,
    exhaustive_witness_count,
    lucas_lehmer,
    lucas_lehmer_residues,
    miller_rabin_test,
    prescreen,
    trial_division,
)
from prime_evidence.witness import Outcome, WitnessEvaluation, eval_witness

FORMAT_VERSION = 1
FILE_SUFFIX = ".pev"
DISCLAIMER = (
    "Replay confirms that the recorded computation was carried out faithfully; "
    "it does not independently establish that the verdict is true."
)

_NUMERAL = re.compile(r"(0|[1-9][0-9]*)\Z")


class InvariantError(DomainError):
    """A record or transcript would violate its structural invariants."""


def utc_timestamp() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class EvidenceRecord:
    n: int
    k: int
    witnesses: tuple[int, ...]
    outcomes: tuple[Outcome, ...]
    verdict: Verdict
    entropy: EntropyDescriptor
    created_at: str | None = None
    note: str | None = None
    format_version: int = FORMAT_VERSION

    @property
    def error_bound_exponent(self) -> int | None:
        return self.verdict.error_bound_exponent

    def problems(self) -> list[str]:
        """Structural invariant violations; empty for a well-formed record."""
        out = []
        if self.k < 1:
            out.append(f"k = {self.k} is not positive")
        if self.verdict.method is not Method.MILLER_RABIN:
            out.append(f"evidence verdict has method {self.verdict.method.value}")
        if len(self.witnesses) != len(self.outcomes):
            out.append("witnesses and outcomes differ in length")
        if len(self.witnesses) > self.k:
            out.append(f"{len(self.witnesses)} witnesses recorded for k = {self.k}")
        out.extend(_range_problems(self.n, self.witnesses))
        if self.note is not None or prescreen(self.n) is not None:
            out.extend(_prescreen_problems(self.n, self.note, self.verdict, self.witnesses))
            return out
        if self.verdict.is_prime:
            if len(self.outcomes) != self.k:
                out.append(f"prime verdict after {len(self.outcomes)} of {self.k} witnesses")
            if self.error_bound_exponent != self.k:
                out.append(f"error bound exponent {self.error_bound_exponent} != k = {self.k}")
        elif self.error_bound_exponent is not None:
            out.append("composite verdict carries an error bound")
        out.extend(_short_circuit_problems(self.outcomes, self.verdict))
        return out


@dataclass(frozen=True)
class ProofTranscript:
    n: int
    method: Method
    verdict: Verdict
    witnesses: tuple[int, ...] = ()
    outcomes: tuple[Outcome, ...] = ()
    ll_trace: LLTrace | None = None
    created_at: str | None = None
    note: str | None = None
    format_version: int = FORMAT_VERSION

    def problems(self) -> list[str]:
        out = []
        if self.verdict.method is not self.method:
            out.append(f"verdict method {self.verdict.method.value} != {self.method.value}")
        if self.method is Method.EXHAUSTIVE:
            if self.ll_trace is not None:
                out.append("exhaustive transcript carries a Lucas-Lehmer trace")
            if len(self.witnesses) != len(self.outcomes):
                out.append("witnesses and outcomes differ in length")
            if self.note is not None or prescreen(self.n) is not None:
                out.extend(_prescreen_problems(self.n, self.note, self.verdict, self.witnesses))
                return out
            if self.witnesses != tuple(range(1, len(self.witnesses) + 1)):
                out.append("exhaustive witnesses are not 1, 2, ..., m")
            m = exhaustive_witness_count(self.n)
            if len(self.witnesses) > m:
                out.append(f"{len(self.witnesses)} witnesses recorded, at most {m} needed")
            if self.verdict.is_prime and len(self.outcomes) != m:
                out.append(f"prime verdict after {len(self.outcomes)} of {m} witnesses")
            out.extend(_short_circuit_problems(self.outcomes, self.verdict))
        elif self.method is Method.LUCAS_LEHMER:
            if self.witnesses or self.outcomes or self.note is not None:
                out.append("Lucas-Lehmer transcript carries witnesses or a note")
            trace = self.ll_trace
            if trace is None:
                return out + ["Lucas-Lehmer transcript has no trace"]
            if trace.p < 2:
                return out + [f"exponent p = {trace.p} is below 2"]
            if self.n != trace.modulus:
                out.append(f"n is not 2^{trace.p} - 1")
            expected_len = 0 if trace.p == 2 else trace.p - 1
            if len(trace.residues) != expected_len:
                out.append(f"trace has {len(trace.residues)} residues, expected {expected_len}")
            if any(r >= trace.modulus for r in trace.residues):
                out.append("trace residue not reduced mod 2^p - 1")
        else:
            out.append(f"method {self.method.value} cannot back a proof transcript")
        return out


Certificate = Union[EvidenceRecord, ProofTranscript]


def _range_problems(n: int, witnesses) -> list[str]:
    bad = [b for b in witnesses if not 1 <= b < n]
    return [f"witness {b} outside [1, {n})" for b in bad[:3]]


def _prescreen_problems(n, note, verdict, witnesses) -> list[str]:
    screened = prescreen(n)
    if screened is None:
        return [f"note {note!r} on an input that needs witnesses"]
    out = []
    if witnesses:
        out.append("pre-screened input carries witnesses")
    if note != screened[1]:
        out.append(f"note {note!r} != {screened[1]!r}")
    if verdict.error_bound_exponent is not None:
        out.append("pre-screened verdict carries an error bound")
    return out


def _short_circuit_problems(outcomes, verdict: Verdict) -> list[str]:
    hits = [i for i, o in enumerate(outcomes) if o is Outcome.COMPOSITE]
    if verdict.is_prime:
        return [f"prime verdict with composite outcome at index {i}" for i in hits[:1]]
    if not hits:
        return ["composite verdict without a composite outcome"]
    if hits != [len(outcomes) - 1]:
        return ["composite outcome recorded before the last witness"]
    return []


def _check(cert):
    problems = cert.problems()
    if problems:
        raise InvariantError("; ".join(problems))
    return cert


def build_record(n: int, k: int, run: tuple[Verdict, list[WitnessEvaluation]],
                 entropy: EntropyDescriptor, *, created_at: str | None = None
                 ) -> EvidenceRecord:
    verdict, evaluations = run
    screened = prescreen(n) if isinstance(n, int) and n >= 0 else None
    if any(ev.n != n for ev in evaluations):
        raise InvariantError("evaluations were made for a different n")
    record = EvidenceRecord(
        n=n, k=k,
        witnesses=tuple(ev.b for ev in evaluations),
        outcomes=tuple(ev.outcome for ev in evaluations),
        verdict=verdict, entropy=entropy, created_at=created_at,
        note=screened[1] if screened else None)
    return _check(record)


def build_exhaustive_proof(n: int, run: tuple[Verdict, list[WitnessEvaluation]] | None = None,
                           *, created_at: str | None = None) -> ProofTranscript:
    screened = prescreen(n)
    if screened is not None:
        return _check(ProofTranscript(n, Method.EXHAUSTIVE, Verdict(screened[0], Method.EXHAUSTIVE),
                                      created_at=created_at, note=screened[1]))
    verdict, evaluations = run if run is not None else exhaustive_deterministic_test(n)
    return _check(ProofTranscript(
        n, Method.EXHAUSTIVE, verdict,
        witnesses=tuple(ev.b for ev in evaluations),
        outcomes=tuple(ev.outcome for ev in evaluations),
        created_at=created_at))


def build_lucas_lehmer_proof(p: int, run: tuple[Verdict, LLTrace] | None = None,
                             *, created_at: str | None = None) -> ProofTranscript:
    verdict, trace = run if run is not None else lucas_lehmer(p)
    return _check(ProofTranscript(trace.modulus, Method.LUCAS_LEHMER, verdict,
                                  ll_trace=trace, created_at=created_at))


def build_proof(run, *, created_at: str | None = None) -> ProofTranscript:
    """Wrap the output of either deterministic tester in a transcript."""
    verdict, detail = run
    if isinstance(detail, LLTrace):
        return build_lucas_lehmer_proof(detail.p, run, created_at=created_at)
    if not detail:
        raise InvariantError("an exhaustive run records at least one evaluation")
    return build_exhaustive_proof(detail[0].n, run, created_at=created_at)


def collect_evidence(n: int, k: int, source: EntropySource, *, timestamp: bool = True
                     ) -> EvidenceRecord:
    run = miller_rabin_test(n, k, source)
    return build_record(n, k, run, source.descriptor(),
                        created_at=utc_timestamp() if timestamp else None)


# -- replay -----------------------------------------------------------------

class ReplayStatus(str, enum.Enum):
    VALID = "valid"
    MISMATCH = "mismatch"
    MALFORMED = "malformed"


@dataclass(frozen=True)
class Mismatch:
    field: str
    index: int | None
    recorded: Any
    recomputed: Any

    def describe(self) -> str:
        where = self.field if self.index is None else f"{self.field}[{self.index}]"
        return f"{where}: recorded {_plain(self.recorded)}, recomputed {_plain(self.recomputed)}"


def _plain(value):
    return value.value if isinstance(value, enum.Enum) else value


@dataclass(frozen=True)
class ReplayReport:
    status: ReplayStatus
    mismatches: tuple[Mismatch, ...] = ()
    problems: tuple[str, ...] = ()
    note: str = DISCLAIMER

    @property
    def valid(self) -> bool:
        return self.status is ReplayStatus.VALID

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "mismatches": [
                {"field": m.field, "index": m.index,
                 "recorded": _json_value(m.recorded), "recomputed": _json_value(m.recomputed)}
                for m in self.mismatches],
            "problems": list(self.problems),
            "note": self.note,
        }


def _json_value(value):
    value = _plain(value)
    return str(value) if isinstance(value, int) and not isinstance(value, bool) else value


def _outcome_mismatches(n, witnesses, outcomes) -> list[Mismatch]:
    out = []
    for i, (b, recorded) in enumerate(zip(witnesses, outcomes)):
        recomputed = eval_witness(n, b).outcome
        if recomputed is not recorded:
            out.append(Mismatch("outcomes", i, recorded, recomputed))
    return out


def _derived_tag(n, outcomes, needed: int, note) -> Tag | None:
    """Verdict implied by recomputed outcomes, or None if the run is unfinished."""
    if note is not None:
        screened = prescreen(n)
        return screened[0] if screened else None
    if any(o is Outcome.COMPOSITE for o in outcomes):
        return Tag.COMPOSITE
    return Tag.PRIME if len(outcomes) == needed else None


def _replay_witness_trail(cert, needed: int) -> tuple[list[Mismatch], list[str]]:
    early = _range_problems(cert.n, cert.witnesses)
    if len(cert.witnesses) != len(cert.outcomes):
        early.append("witnesses and outcomes differ in length")
    if cert.n < 3 and cert.witnesses:
        early.append(f"n = {cert.n} admits no witnesses")
    if early:
        return [], early
    mismatches = _outcome_mismatches(cert.n, cert.witnesses, cert.outcomes)
    recomputed = [eval_witness(cert.n, b).outcome for b in cert.witnesses]
    tag = _derived_tag(cert.n, recomputed, needed, cert.note)
    if tag is not None and tag is not cert.verdict.tag:
        mismatches.append(Mismatch("verdict", None, cert.verdict.tag, tag))
    return mismatches, []


def _replay_lucas_lehmer(cert: ProofTranscript) -> tuple[list[Mismatch], list[str]]:
    trace = cert.ll_trace
    if trace is None or trace.p < 2:
        return [], ["Lucas-Lehmer transcript lacks a usable exponent"]
    if not trial_division(trace.p).is_prime:
        return [], [f"exponent {trace.p} is not prime"]
    residues = lucas_lehmer_residues(trace.p)
    mismatches = [Mismatch("ll_trace", i, rec, new)
                  for i, (rec, new) in enumerate(zip(trace.residues, residues)) if rec != new]
    tag = Tag.PRIME if trace.p == 2 or residues[-1] == 0 else Tag.COMPOSITE
    if tag is not cert.verdict.tag:
        mismatches.append(Mismatch("verdict", None, cert.verdict.tag, tag))
    return mismatches, []


def replay_verify(cert: Certificate) -> ReplayReport:
    """Recompute every recorded step and compare.

    Outcome and verdict disagreements give ``MISMATCH``; a record whose
    shape is broken but whose recorded steps all recompute correctly gives
    ``MALFORMED``.
    """
    try:
        if isinstance(cert, EvidenceRecord):
            mismatches, early = _replay_witness_trail(cert, cert.k)
        elif isinstance(cert, ProofTranscript) and cert.method is Method.LUCAS_LEHMER:
            mismatches, early = _replay_lucas_lehmer(cert)
        elif isinstance(cert, ProofTranscript) and cert.method is Method.EXHAUSTIVE:
            needed = exhaustive_witness_count(cert.n) if cert.n >= 5 else 0
            mismatches, early = _replay_witness_trail(cert, needed)
        else:
            return ReplayReport(ReplayStatus.MALFORMED, problems=("not a certificate",))
    except PrimeEvidenceError as exc:
        return ReplayReport(ReplayStatus.MALFORMED, problems=(str(exc),))
    if early:
        return ReplayReport(ReplayStatus.MALFORMED, problems=tuple(early))
    problems = tuple(cert.problems())
    if mismatches:
        return ReplayReport(ReplayStatus.MISMATCH, tuple(mismatches), problems)
    if problems:
        return ReplayReport(ReplayStatus.MALFORMED, problems=problems)
    return ReplayReport(ReplayStatus.VALID)


def verify_document(data: bytes) -> ReplayReport:
    try:
        cert = deserialize(data)
    except MalformedError as exc:
        return ReplayReport(ReplayStatus.MALFORMED, problems=(str(exc),))
    return replay_verify(cert)


# -- error threshold ----------------------------------------------------------

def parse_rational(value) -> Fraction:
    if isinstance(value, bool):
        raise DomainError("epsilon must be a number")
    if isinstance(value, float):
        # honour the decimal literal the caller wrote, not its binary image
        return Fraction(repr(value))
    try:
        return Fraction(value)
    except (TypeError, ValueError, ZeroDivisionError):
        raise DomainError(f"cannot read {value!r} as a rational number") from None


def required_rounds(epsilon) -> int:
    """Least ``k`` with ``4**-k <= epsilon``, found by exact integer comparison."""
    eps = parse_rational(epsilon)
    if not 0 < eps < 1:
        raise DomainError(f"epsilon must lie strictly between 0 and 1, got {eps}")
    # 4**-k <= p/q  <=>  q <= p * 4**k
    k = 1
    while eps.denominator > eps.numerator * 4**k:
        k += 1
    return k


# -- codec ----------------------------------------------------------------------

def canonical_json(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
            + "\n").encode("utf-8")


def _entropy_json(desc: EntropyDescriptor) -> dict:
    out = {"kind": desc.kind, "bits_consumed": desc.bits_consumed}
    if desc.seed is not None:
        out["seed"] = str(desc.seed)
    if desc.endpoint is not None:
        out["endpoint"] = desc.endpoint
    return out


def to_json(cert: Certificate) -> dict:
    doc = {
        "format_version": cert.format_version,
        "n": str(cert.n),
        "witnesses": [str(b) for b in cert.witnesses],
        "outcomes": [o.value for o in cert.outcomes],
        "verdict": cert.verdict.tag.value,
        "error_bound_exponent": cert.verdict.error_bound_exponent,
        "created_at": cert.created_at,
        "note": cert.note,
    }
    if isinstance(cert, EvidenceRecord):
        doc.update(kind="evidence", method=Method.MILLER_RABIN.value, k=cert.k,
                   entropy=_entropy_json(cert.entropy))
    else:
        doc.update(kind="proof", method=cert.method.value)
        if cert.ll_trace is not None:
            doc["p"] = str(cert.ll_trace.p)
            doc["ll_trace"] = [str(r) for r in cert.ll_trace.residues]
    return doc


def serialize(cert: Certificate) -> bytes:
    return canonical_json(to_json(cert))


_COMMON_KEYS = {"format_version", "kind", "n", "method", "witnesses", "outcomes", "verdict",
                "error_bound_exponent", "created_at", "note"}
_EVIDENCE_KEYS = _COMMON_KEYS | {"k", "entropy"}
_EXHAUSTIVE_KEYS = _COMMON_KEYS
_LL_KEYS = _COMMON_KEYS | {"p", "ll_trace"}


def _natural(value, where: str) -> int:
    if not isinstance(value, str) or not _NUMERAL.match(value):
        raise MalformedError(f"{where}: expected a canonical decimal string, got {value!r}")
    return int(value)


def _count(value, where: str, *, nullable: bool = False) -> int | None:
    if value is None and nullable:
        return None
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise MalformedError(f"{where}: expected a nonnegative JSON integer, got {value!r}")
    return value


def _optional_str(value, where: str) -> str | None:
    if value is not None and not isinstance(value, str):
        raise MalformedError(f"{where}: expected a string or null")
    return value


def _list(value, where: str) -> list:
    if not isinstance(value, list):
        raise MalformedError(f"{where}: expected an array")
    return value


def _timestamp(value) -> str | None:
    value = _optional_str(value, "created_at")
    if value is not None:
        try:
            parsed = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except ValueError:
            raise MalformedError(f"created_at: {value!r} is not an RFC 3339 timestamp") from None
        if parsed.utcoffset() is None or parsed.utcoffset().total_seconds() != 0:
            raise MalformedError("created_at must be in UTC")
    return value


def _entropy(value) -> EntropyDescriptor:
    if not isinstance(value, dict):
        raise MalformedError("entropy: expected an object")
    kind = value.get("kind")
    allowed = {"seeded": {"kind", "bits_consumed", "seed"},
               "os": {"kind", "bits_consumed"},
               "qrng": {"kind", "bits_consumed", "endpoint"}}
    if kind not in allowed:
        raise MalformedError(f"entropy.kind: unknown provenance {kind!r}")
    if set(value) != allowed[kind]:
        raise MalformedError(f"entropy: fields {sorted(value)} do not match kind {kind!r}")
    bits = _count(value["bits_consumed"], "entropy.bits_consumed")
    if kind == "seeded":
        seed = _natural(value["seed"], "entropy.seed")
        if seed >= 1 << 64:
            raise MalformedError("entropy.seed exceeds 64 bits")
        return EntropyDescriptor(kind, bits, seed=seed)
    if kind == "qrng":
        endpoint = value["endpoint"]
        if not isinstance(endpoint, str) or not endpoint:
            raise MalformedError("entropy.endpoint: expected a non-empty string")
        return EntropyDescriptor(kind, bits, endpoint=endpoint)
    return EntropyDescriptor(kind, bits)


def deserialize(data: bytes | str) -> Certificate:
    """Decode a certificate; any defect raises :class:`MalformedError`.

    Only the encoding is validated here.  Whether the recorded steps are
    correct is for :func:`replay_verify` to decide.
    """
    try:
        text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
        doc = json.loads(text)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedError(f"not a JSON document: {exc}") from None
    if not isinstance(doc, dict):
        raise MalformedError("certificate must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION or isinstance(version, bool):
        raise MalformedError(f"unsupported format_version {version!r}")
    kind, method = doc.get("kind"), doc.get("method")
    if kind == "evidence" and method == Method.MILLER_RABIN.value:
        keys = _EVIDENCE_KEYS
    elif kind == "proof" and method == Method.EXHAUSTIVE.value:
        keys = _EXHAUSTIVE_KEYS
    elif kind == "proof" and method == Method.LUCAS_LEHMER.value:
        keys = _LL_KEYS
    else:
        raise MalformedError(f"unknown kind/method combination {kind!r}/{method!r}")
    missing, extra = keys - set(doc), set(doc) - keys
    if missing or extra:
        raise MalformedError(f"missing fields {sorted(missing)}, unexpected fields {sorted(extra)}")

    n = _natural(doc["n"], "n")
    witnesses = tuple(_natural(b, f"witnesses[{i}]")
                      for i, b in enumerate(_list(doc["witnesses"], "witnesses")))
    try:
        outcomes = tuple(Outcome(o) for o in _list(doc["outcomes"], "outcomes"))
        tag = Tag(doc["verdict"])
    except (ValueError, TypeError) as exc:
        raise MalformedError(str(exc)) from None
    bound = _count(doc["error_bound_exponent"], "error_bound_exponent", nullable=True)
    created_at = _timestamp(doc["created_at"])
    note = _optional_str(doc["note"], "note")
    method = Method(method)
    try:
        verdict = Verdict(tag, method, bound)
    except DomainError as exc:
        raise MalformedError(str(exc)) from None

    if kind == "evidence":
        k = _count(doc["k"], "k")
        return EvidenceRecord(n, k, witnesses, outcomes, verdict, _entropy(doc["entropy"]),
                              created_at=created_at, note=note)
    trace = None
    if method is Method.LUCAS_LEHMER:
        p = _natural(doc["p"], "p")
        residues = tuple(_natural(r, f"ll_trace[{i}]")
                         for i, r in enumerate(_list(doc["ll_trace"], "ll_trace")))
        trace = LLTrace(p, residues)
    return ProofTranscript(n, method, verdict, witnesses, outcomes, trace,
                           created_at=created_at, note=note)
