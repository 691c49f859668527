"""Command-line front end.

Exit codes: 0 for a prime verdict or a valid replay, 1 for a composite
verdict or a replay mismatch, 2 for usage, domain, resource-limit, transport
and malformed-certificate errors.
"""
from __future__ import annotations

import argparse
import os
import re
import sys
from fractions import Fraction
from pathlib import Path

from prime_evidence import evidence
from prime_evidence.entropy import parse_entropy_spec
from prime_evidence.errors import PrimeEvidenceError
from prime_evidence.testers import Tag, lucas_lehmer
from prime_evidence.witness import witness_count

EXIT_PRIME = 0
EXIT_COMPOSITE = 1
EXIT_ERROR = 2

_POWER_FORM = re.compile(r"2\^(\d+)(-1)?\Z")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def parse_natural(text: str) -> int:
    """Decimal literal, ``2^E`` or ``2^E-1``."""
    text = text.strip()
    if text.isdigit():
        return int(text)
    m = _POWER_FORM.match(text.replace(" ", ""))
    if m:
        return (1 << int(m.group(1))) - (1 if m.group(2) else 0)
    raise argparse.ArgumentTypeError(f"not a natural number: {text!r}")


def parse_exponent(text: str) -> int:
    """A Mersenne exponent, given either as ``p`` or as ``2^p-1``."""
    m = _POWER_FORM.match(text.strip().replace(" ", ""))
    if m and m.group(2):
        return int(m.group(1))
    if text.strip().isdigit():
        return int(text)
    raise argparse.ArgumentTypeError(f"not a Mersenne exponent: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prime-evidence",
                     description="Miller-Rabin evidence records and deterministic primality proofs.")
    parser.add_argument("--json", action="store_true", help="print one canonical JSON object")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def certifying(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
        p.add_argument("--emit", type=Path, metavar="FILE", help="write the certificate here")
        p.add_argument("--no-timestamp", action="store_true",
                       help="leave created_at null so output is byte-reproducible")
        return p

    p = certifying("test", "randomized Miller-Rabin test with an evidence record")
    p.add_argument("n", type=parse_natural)
    p.add_argument("--k", type=int, default=20, help="number of witnesses (default 20)")
    p.add_argument("--entropy", default="seeded:0", metavar="SPEC",
                   help="seeded:<u64>, os, or qrng[:<url>] (default seeded:0)")

    p = certifying("prove", "exhaustive deterministic proof for small n")
    p.add_argument("n", type=parse_natural)

    p = certifying("mersenne", "Lucas-Lehmer test of 2^p - 1")
    p.add_argument("p", type=parse_exponent)
    p.add_argument("--progress", action="store_true", help="iteration counter on stderr")

    p = sub.add_parser("verify", help="replay a certificate file")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("file", type=Path)

    p = sub.add_parser("threshold", help="rounds needed for a target error bound")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("--epsilon", required=True, help="e.g. 1e-9, 1/1000, 4^-10")

    p = sub.add_parser("density", help="exact witness density of a small n")
    p.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    p.add_argument("n", type=parse_natural)
    return parser


def _parse_epsilon(text: str):
    m = re.fullmatch(r"\s*(\d+)\^(-?\d+)\s*", text)
    if m:
        return Fraction(int(m.group(1))) ** int(m.group(2))
    return text.strip()


class _Runner:
    def __init__(self, args, environ, stdout, stderr):
        self.args = args
        self.environ = environ
        self.out = stdout
        self.err = stderr

    def emit(self, cert) -> int:
        data = evidence.serialize(cert)
        if self.args.emit is not None:
            self.args.emit.write_bytes(data)
        if self.args.json:
            self.out.write(data.decode("utf-8"))
        else:
            self.out.write(self.summary(cert) + "\n")
            if self.args.emit is not None:
                self.out.write(f"certificate written to {self.args.emit}\n")
        return EXIT_PRIME if cert.verdict.tag is Tag.PRIME else EXIT_COMPOSITE

    @staticmethod
    def summary(cert) -> str:
        v = cert.verdict
        head = f"n = {cert.n}: {v.tag.value} ({v.method.value})"
        if isinstance(cert, evidence.EvidenceRecord):
            tail = f"{len(cert.witnesses)} of k = {cert.k} witnesses evaluated"
            if v.error_bound_exponent is not None:
                tail += f", error probability <= 4^-{v.error_bound_exponent}"
            else:
                tail += ", composite: witness found" if cert.witnesses and v.tag is Tag.COMPOSITE else ""
        elif cert.ll_trace is not None:
            tail = f"Lucas-Lehmer with p = {cert.ll_trace.p}, {len(cert.ll_trace.residues)} residues"
        else:
            tail = f"{len(cert.witnesses)} witnesses evaluated"
        if cert.note:
            tail += f" [{cert.note}]"
        return f"{head}; {tail}"

    def timestamp(self):
        return None if self.args.no_timestamp else evidence.utc_timestamp()

    def test(self) -> int:
        source = parse_entropy_spec(self.args.entropy, self.environ)
        record = evidence.collect_evidence(self.args.n, self.args.k, source,
                                           timestamp=not self.args.no_timestamp)
        return self.emit(record)

    def prove(self) -> int:
        return self.emit(evidence.build_exhaustive_proof(self.args.n, created_at=self.timestamp()))

    def mersenne(self) -> int:
        progress = None
        if self.args.progress:
            step = max(1, self.args.p // 100)

            def progress(i, total):
                if i % step == 0 or i == total:
                    self.err.write(f"\riteration {i}/{total}")
                    if i == total:
                        self.err.write("\n")
        run = lucas_lehmer(self.args.p, progress=progress)
        return self.emit(evidence.build_lucas_lehmer_proof(self.args.p, run,
                                                           created_at=self.timestamp()))

    def verify(self) -> int:
        try:
            data = self.args.file.read_bytes()
        except OSError as exc:
            self.err.write(f"prime-evidence: cannot read {self.args.file}: {exc.strerror}\n")
            return EXIT_ERROR
        report = evidence.verify_document(data)
        if self.args.json:
            self.out.write(evidence.canonical_json(report.to_json()).decode("utf-8"))
        else:
            self.out.write(f"{self.args.file}: {report.status.value}\n")
            for m in report.mismatches:
                self.out.write(f"  mismatch {m.describe()}\n")
            for problem in report.problems:
                self.out.write(f"  problem: {problem}\n")
            self.out.write(f"note: {report.note}\n")
        return {evidence.ReplayStatus.VALID: EXIT_PRIME,
                evidence.ReplayStatus.MISMATCH: EXIT_COMPOSITE}.get(report.status, EXIT_ERROR)

    def threshold(self) -> int:
        eps = evidence.parse_rational(_parse_epsilon(self.args.epsilon))
        k = evidence.required_rounds(eps)
        if self.args.json:
            doc = {"epsilon": str(eps), "k": k}
            self.out.write(evidence.canonical_json(doc).decode("utf-8"))
        else:
            self.out.write(f"{k}\n")
        return EXIT_PRIME

    def density(self) -> int:
        n = self.args.n
        count = witness_count(n)
        if self.args.json:
            doc = {"n": str(n), "witnesses": str(count), "candidates": str(n - 1),
                   "density": str(Fraction(count, n - 1))}
            self.out.write(evidence.canonical_json(doc).decode("utf-8"))
        else:
            self.out.write(f"{count}/{n - 1}\n")
        return EXIT_PRIME


def run(argv, environ=None, stdout=None, stderr=None) -> int:
    environ = os.environ if environ is None else environ
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_ERROR
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else EXIT_ERROR
    runner = _Runner(args, environ, stdout, stderr)
    try:
        return getattr(runner, args.command)()
    except PrimeEvidenceError as exc:
        stderr.write(f"prime-evidence: {exc}\n")
        return EXIT_ERROR
    except OSError as exc:
        stderr.write(f"prime-evidence: {exc}\n")
        return EXIT_ERROR


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
