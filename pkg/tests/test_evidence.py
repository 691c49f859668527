import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from prime_evidence.entropy import EntropyDescriptor, SeededSource
from prime_evidence.errors import DomainError, MalformedError
from prime_evidence.evidence import (
    DISCLAIMER,
    EvidenceRecord,
    InvariantError,
    ProofTranscript,
    ReplayStatus,
    build_exhaustive_proof,
    build_lucas_lehmer_proof,
    build_proof,
    build_record,
    collect_evidence,
    deserialize,
    replay_verify,
    required_rounds,
    serialize,
    verify_document,
)
from prime_evidence.testers import (
    LLTrace,
    Method,
    Tag,
    Verdict,
    exhaustive_deterministic_test,
    lucas_lehmer,
    miller_rabin_test,
)
from prime_evidence.witness import Outcome, WitnessEvaluation, eval_witness

I, C = Outcome.INDETERMINATE, Outcome.COMPOSITE
SEEDED = EntropyDescriptor("seeded", 40, seed=42)


def mr_record(n, witnesses, outcomes, tag, k, bound=None):
    return EvidenceRecord(n, k, tuple(witnesses), tuple(outcomes),
                          Verdict(tag, Method.MILLER_RABIN, bound), SEEDED)


def test_build_record_prime():
    run = miller_rabin_test(7, 5, SeededSource(42))
    rec = build_record(7, 5, run, SEEDED)
    assert rec.error_bound_exponent == 5 and len(rec.witnesses) == 5


def test_build_record_short_circuit():
    evs = [eval_witness(15, 1), eval_witness(15, 2)]
    rec = build_record(15, 8, (Verdict(Tag.COMPOSITE, Method.MILLER_RABIN), evs), SEEDED)
    assert rec.witnesses == (1, 2) and rec.error_bound_exponent is None


def test_build_record_rejects_inconsistent_runs():
    evs = [eval_witness(15, 2)] + [eval_witness(15, 1)] * 4
    with pytest.raises(InvariantError):
        build_record(15, 5, (Verdict(Tag.PRIME, Method.MILLER_RABIN, 5), evs), SEEDED)
    with pytest.raises(InvariantError):
        build_record(7, 5, (Verdict(Tag.PRIME, Method.MILLER_RABIN, 5),
                            [eval_witness(7, 2)] * 3), SEEDED)
    with pytest.raises(InvariantError):
        build_record(9, 5, (Verdict(Tag.PRIME, Method.MILLER_RABIN, 5),
                            [eval_witness(7, 2)] * 5), SEEDED)
    assert issubclass(InvariantError, DomainError)


def test_build_record_prescreened():
    rec = build_record(10, 4, miller_rabin_test(10, 4, SeededSource(0)), SEEDED)
    assert rec.note == "even" and rec.witnesses == ()
    assert replay_verify(rec).status is ReplayStatus.VALID


def test_replay_valid_seven():
    rec = mr_record(7, [3, 5, 6], [I, I, I], Tag.PRIME, 3, 3)
    report = replay_verify(rec)
    assert report.status is ReplayStatus.VALID and report.note == DISCLAIMER


def test_replay_detects_flipped_outcome():
    rec = mr_record(7, [3, 5, 6], [I, C, I], Tag.PRIME, 3, 3)
    report = replay_verify(rec)
    assert report.status is ReplayStatus.MISMATCH
    assert [(m.field, m.index, m.recorded, m.recomputed) for m in report.mismatches] == [
        ("outcomes", 1, C, I)]
    assert report.note == DISCLAIMER


def test_replay_faithful_but_wrong():
    rec = mr_record(15, [1, 14], [I, I], Tag.PRIME, 2, 2)
    assert [eval_witness(15, b).outcome for b in (1, 14)] == [I, I]
    report = replay_verify(rec)
    assert report.status is ReplayStatus.VALID
    assert "does not" in report.note


def test_replay_detects_verdict_tamper():
    rec = mr_record(7, [3, 5], [I, I], Tag.COMPOSITE, 2)
    report = replay_verify(rec)
    assert report.status is ReplayStatus.MISMATCH
    assert report.mismatches[-1].field == "verdict"


def test_replay_malformed_shapes():
    out_of_range = mr_record(7, [9], [I], Tag.COMPOSITE, 2)
    assert replay_verify(out_of_range).status is ReplayStatus.MALFORMED
    short_prime = mr_record(7, [3], [I], Tag.PRIME, 2, 2)
    assert replay_verify(short_prime).status is ReplayStatus.MALFORMED
    wrong_bound = mr_record(7, [3, 5], [I, I], Tag.PRIME, 2, 1)
    assert replay_verify(wrong_bound).status is ReplayStatus.MALFORMED


def test_exhaustive_proof_replay():
    proof = build_exhaustive_proof(13)
    assert proof.witnesses == (1, 2, 3, 4)
    assert replay_verify(proof).valid
    composite = build_proof(exhaustive_deterministic_test(91))
    assert composite.verdict.tag is Tag.COMPOSITE and replay_verify(composite).valid
    truncated = ProofTranscript(13, Method.EXHAUSTIVE, proof.verdict, (1, 2, 3), (I, I, I))
    assert replay_verify(truncated).status is ReplayStatus.MALFORMED
    for n in (0, 1, 2, 3, 4, 100):
        assert replay_verify(build_exhaustive_proof(n)).valid


def test_lucas_lehmer_proof_replay():
    proof = build_lucas_lehmer_proof(5)
    assert proof.n == 31 and replay_verify(proof).valid
    assert replay_verify(build_proof(lucas_lehmer(11))).valid
    assert replay_verify(build_lucas_lehmer_proof(2)).valid
    bad = ProofTranscript(31, Method.LUCAS_LEHMER, proof.verdict,
                          ll_trace=LLTrace(5, (4, 14, 9, 0)))
    report = replay_verify(bad)
    assert report.status is ReplayStatus.MISMATCH
    assert [(m.field, m.index) for m in report.mismatches] == [("ll_trace", 2)]
    wrong_n = ProofTranscript(32, Method.LUCAS_LEHMER, proof.verdict, ll_trace=proof.ll_trace)
    assert replay_verify(wrong_n).status is ReplayStatus.MALFORMED
    flipped = ProofTranscript(2047, Method.LUCAS_LEHMER, proof.verdict,
                              ll_trace=lucas_lehmer(11)[1])
    assert replay_verify(flipped).status is ReplayStatus.MISMATCH


def test_invariant_ledger_exhaustive_prime_count():
    proof = build_exhaustive_proof(101)
    assert len(proof.outcomes) == (101 - 1) // 4 + 1
    assert all(o is I for o in proof.outcomes)


def test_required_rounds_examples():
    assert required_rounds(Fraction(1, 4)) == 1
    assert required_rounds(Fraction(1, 4**10)) == 10
    assert required_rounds(Fraction(1, 10**9)) == 15
    assert required_rounds("1e-9") == 15
    assert required_rounds(1e-9) == 15
    assert 4**14 < 10**9 <= 4**15


@pytest.mark.parametrize("eps", [0, 1, -1, 2, "x", True])
def test_required_rounds_domain(eps):
    with pytest.raises(DomainError):
        required_rounds(eps)


@given(st.fractions(min_value=Fraction(1, 10**30), max_value=Fraction(999, 1000)),
       st.fractions(min_value=Fraction(1, 10**30), max_value=Fraction(999, 1000)))
def test_required_rounds_monotone_and_bracketed(a, b):
    lo, hi = sorted((a, b))
    assert required_rounds(lo) >= required_rounds(hi)
    k = required_rounds(a)
    assert Fraction(1, 4**k) <= a < Fraction(1, 4**(k - 1))


# -- codec ----------------------------------------------------------------------

@st.composite
def evidence_records(draw):
    n = 2 * draw(st.integers(2, 10**40)) + 1
    k = draw(st.integers(1, 12))
    length = draw(st.integers(0, k))
    witnesses = draw(st.lists(st.integers(1, n - 1), min_size=length, max_size=length))
    outcomes = [I] * length
    tag = Tag.PRIME if length == k else Tag.COMPOSITE
    if tag is Tag.COMPOSITE:
        if length:
            outcomes[-1] = C
    kind = draw(st.sampled_from(["seeded", "os", "qrng"]))
    desc = EntropyDescriptor(
        kind, draw(st.integers(0, 10**6)),
        seed=draw(st.integers(0, 2**64 - 1)) if kind == "seeded" else None,
        endpoint=draw(st.text(min_size=1)) if kind == "qrng" else None)
    stamp = draw(st.one_of(st.none(), st.just("2026-01-02T03:04:05Z")))
    return EvidenceRecord(n, k, tuple(witnesses), tuple(outcomes),
                          Verdict(tag, Method.MILLER_RABIN, k if tag is Tag.PRIME else None),
                          desc, created_at=stamp)


@settings(max_examples=300)
@given(evidence_records())
def test_codec_roundtrip(record):
    data = serialize(record)
    assert deserialize(data) == record
    assert serialize(deserialize(data)) == data
    assert data.endswith(b"\n") and data.count(b"\n") == 1


def test_serialization_is_canonical():
    rec = collect_evidence(1009, 6, SeededSource(3), timestamp=False)
    data = serialize(rec)
    doc = json.loads(data)
    assert data == (json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n").encode()
    assert doc["n"] == "1009" and all(isinstance(w, str) for w in doc["witnesses"])
    assert doc["entropy"] == {"kind": "seeded", "seed": "3",
                              "bits_consumed": rec.entropy.bits_consumed}
    assert doc["created_at"] is None and doc["format_version"] == 1


def test_proof_roundtrip():
    for proof in (build_exhaustive_proof(13), build_lucas_lehmer_proof(13),
                  build_exhaustive_proof(1)):
        assert deserialize(serialize(proof)) == proof
    doc = json.loads(serialize(build_lucas_lehmer_proof(5)))
    assert doc["ll_trace"] == ["4", "14", "8", "0"] and doc["p"] == "5"
    assert "k" not in doc and "entropy" not in doc


def _mutate(record, **changes):
    doc = json.loads(serialize(record))
    doc.update(changes)
    return json.dumps(doc).encode()


@pytest.mark.parametrize("changes", [
    {"format_version": 999},
    {"n": "007"},
    {"n": 7},
    {"witnesses": ["03", "5", "6"]},
    {"k": "3"},
    {"kind": "rumour"},
    {"outcomes": ["maybe", "indeterminate", "indeterminate"]},
    {"created_at": "yesterday"},
    {"created_at": "2026-01-01T00:00:00+02:00"},
    {"extra": 1},
    {"entropy": {"kind": "seeded", "bits_consumed": 3}},
    {"error_bound_exponent": 3, "verdict": "composite"},
])
def test_deserialize_rejects(changes):
    rec = mr_record(7, [3, 5, 6], [I, I, I], Tag.PRIME, 3, 3)
    with pytest.raises(MalformedError):
        deserialize(_mutate(rec, **changes))


def test_deserialize_rejects_garbage():
    for data in (b"", b"\xff\xfe", b"[]", b"null", b'{"format_version": 1}'):
        with pytest.raises(MalformedError):
            deserialize(data)
        assert verify_document(data).status is ReplayStatus.MALFORMED


def test_missing_field():
    doc = json.loads(serialize(mr_record(7, [3], [I], Tag.COMPOSITE, 3)))
    del doc["note"]
    with pytest.raises(MalformedError, match="missing"):
        deserialize(json.dumps(doc))


def test_tamper_witness_value():
    rec = collect_evidence(7919, 10, SeededSource(1), timestamp=False)
    assert replay_verify(rec).valid
    # 7919 is prime, so swap in a composite-witness-bearing n instead
    rec = mr_record(561, [1, 1, 1], [I, I, I], Tag.PRIME, 3, 3)
    assert replay_verify(rec).valid
    tampered = mr_record(561, [1, 2, 1], [I, I, I], Tag.PRIME, 3, 3)
    report = replay_verify(tampered)
    assert report.status is ReplayStatus.MISMATCH and report.mismatches[0].index == 1
