"""Miller-Rabin witness machinery with replayable primality certificates."""

from prime_evidence.arith import TwoAdicSplit, gcd, mod_pow, two_adic_split
from prime_evidence.entropy import (
    EntropySource,
    OsEntropySource,
    RemoteQrngSource,
    SeededSource,
    fetch_remote_bits,
    next_bits,
    sample_uniform,
)
from prime_evidence.errors import (
    DomainError,
    MalformedError,
    PrimeEvidenceError,
    ResourceLimitError,
    TransportError,
)
from prime_evidence.evidence import (
    EvidenceRecord,
    ProofTranscript,
    ReplayReport,
    build_proof,
    build_record,
    deserialize,
    replay_verify,
    required_rounds,
    serialize,
)
from prime_evidence.testers import (
    LLTrace,
    Method,
    Verdict,
    exhaustive_deterministic_test,
    lucas_lehmer,
    miller_rabin_test,
    trial_division,
)
from prime_evidence.witness import (
    Outcome,
    WitnessEvaluation,
    eval_witness,
    witness_count,
    witness_density,
)

__version__ = "0.1.0"
