"""Bit streams for witness selection and uniform sampling from them.

Three provenances are supported and never substituted for one another:

``seeded``
    SplitMix64, so a certificate can be replayed bit for bit in any language.
``os``
    ``os.urandom``.
``qrng``
    A remote quantum random number service speaking the ANU-style JSON API:
    ``GET {endpoint}?length=N&type=uint8`` returning
    ``{"type": "uint8", "length": N, "data": [...], "success": true}``.

Every stream is consumed most-significant-bit first.
"""
from __future__ import annotations

import json
import logging
import os
import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass

from prime_evidence.errors import DomainError, TransportError

log = logging.getLogger(__name__)

QRNG_URL_ENV = "PRIME_EVIDENCE_QRNG_URL"
DEFAULT_TIMEOUT = 10.0
MAX_REQUEST_BYTES = 1024

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class EntropyDescriptor:
    """Provenance snapshot stored in certificates."""

    kind: str
    bits_consumed: int = 0
    seed: int | None = None
    endpoint: str | None = None


@dataclass(frozen=True)
class BitBlock:
    bits: tuple[int, ...]
    origin: EntropyDescriptor

    def __post_init__(self):
        if not self.bits:
            raise DomainError("a BitBlock holds at least one bit")

    def __len__(self) -> int:
        return len(self.bits)

    def to_int(self) -> int:
        return int("".join(map(str, self.bits)), 2)


def _expand(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> (width - 1 - j)) & 1 for j in range(width))


class EntropySource:
    """A stateful bit stream owned by one consumer at a time.

    Subclasses supply ``_chunk()``, which returns ``(value, width)`` for the
    next block of raw bits.  Bits left over from a chunk are kept for the
    following read, so two reads of 32 bits equal one read of 64.
    """

    kind = "abstract"

    def __init__(self):
        self.bits_consumed = 0
        self._buf = 0
        self._nbuf = 0

    def _chunk(self) -> tuple[int, int]:
        raise NotImplementedError

    def read_int(self, nbits: int) -> int:
        """Consume ``nbits`` bits and return them as an unsigned integer."""
        if nbits < 0:
            raise DomainError("bit count must be nonnegative")
        while self._nbuf < nbits:
            value, width = self._chunk()
            self._buf = (self._buf << width) | value
            self._nbuf += width
        self._nbuf -= nbits
        out = self._buf >> self._nbuf
        self._buf &= (1 << self._nbuf) - 1
        self.bits_consumed += nbits
        return out

    def next_bits(self, count: int) -> BitBlock:
        if count < 1:
            raise DomainError(f"count must be positive, got {count}")
        value = self.read_int(count)
        return BitBlock(_expand(value, count), self.descriptor())

    def descriptor(self) -> EntropyDescriptor:
        return EntropyDescriptor(self.kind, self.bits_consumed)


class SeededSource(EntropySource):
    kind = "seeded"

    def __init__(self, seed: int):
        super().__init__()
        if not 0 <= seed <= MASK64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = seed
        self._state = seed

    def next_word(self) -> int:
        self._state = (self._state + GOLDEN_GAMMA) & MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def _chunk(self) -> tuple[int, int]:
        return self.next_word(), 64

    def descriptor(self) -> EntropyDescriptor:
        return EntropyDescriptor(self.kind, self.bits_consumed, seed=self.seed)


class OsEntropySource(EntropySource):
    kind = "os"

    def _chunk(self) -> tuple[int, int]:
        return int.from_bytes(os.urandom(8), "big"), 64


class RemoteQrngSource(EntropySource):
    """Pulls ``batch_bytes`` bytes per request from a remote QRNG endpoint.

    Bytes fetched but not yet consumed are discarded with the source; only
    consumed bits are counted in ``bits_consumed``.
    """

    kind = "qrng"

    def __init__(self, endpoint: str | None = None, *, batch_bytes: int = 128,
                 timeout: float = DEFAULT_TIMEOUT, retries: int = 0):
        super().__init__()
        endpoint = endpoint or os.environ.get(QRNG_URL_ENV)
        if not endpoint:
            raise DomainError(f"no QRNG endpoint given and {QRNG_URL_ENV} is unset")
        if not 1 <= batch_bytes <= MAX_REQUEST_BYTES:
            raise DomainError(f"batch_bytes must lie in [1, {MAX_REQUEST_BYTES}]")
        self.endpoint = endpoint
        self.batch_bytes = batch_bytes
        self.timeout = timeout
        self.retries = retries

    def _chunk(self) -> tuple[int, int]:
        data = fetch_remote_bytes(self.endpoint, self.batch_bytes,
                                  timeout=self.timeout, retries=self.retries)
        return int.from_bytes(data, "big"), 8 * len(data)

    def descriptor(self) -> EntropyDescriptor:
        return EntropyDescriptor(self.kind, self.bits_consumed, endpoint=self.endpoint)


def _request_url(endpoint: str, byte_count: int) -> str:
    query = urllib.parse.urlencode({"length": byte_count, "type": "uint8"})
    sep = "&" if urllib.parse.urlsplit(endpoint).query else "?"
    return f"{endpoint}{sep}{query}"


def _decode_body(raw: bytes, byte_count: int) -> bytes:
    try:
        body = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise TransportError(f"QRNG response is not JSON: {exc}") from None
    if not isinstance(body, dict):
        raise TransportError("QRNG response is not a JSON object")
    if body.get("success") is not True:
        raise TransportError(f"QRNG service reported failure: {body.get('message', body)!r}")
    if body.get("type", "uint8") != "uint8":
        raise TransportError(f"QRNG response has type {body['type']!r}, expected 'uint8'")
    data = body.get("data")
    if not isinstance(data, list):
        raise TransportError("QRNG response lacks a data array")
    if len(data) != byte_count or body.get("length", byte_count) != byte_count:
        raise TransportError(
            f"QRNG returned {len(data)} values (length field {body.get('length')!r}), "
            f"requested {byte_count}")
    for pos, v in enumerate(data):
        if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= 255:
            raise TransportError(f"QRNG data[{pos}] = {v!r} is not a uint8")
    return bytes(data)


def fetch_remote_bytes(endpoint: str, byte_count: int, *, timeout: float = DEFAULT_TIMEOUT,
                       retries: int = 0, cap: int = MAX_REQUEST_BYTES) -> bytes:
    if not 1 <= byte_count <= cap:
        raise DomainError(f"byte_count must lie in [1, {cap}], got {byte_count}")
    url = _request_url(endpoint, byte_count)
    for attempt in range(retries + 1):
        try:
            with urllib.request.urlopen(url, timeout=timeout) as resp:
                status = resp.status
                raw = resp.read()
        except urllib.error.HTTPError as exc:
            err = TransportError(f"QRNG request failed with HTTP {exc.code}")
        except (urllib.error.URLError, OSError) as exc:
            err = TransportError(f"QRNG request to {endpoint} failed: {exc}")
        else:
            if status != 200:
                err = TransportError(f"QRNG request failed with HTTP {status}")
            else:
                return _decode_body(raw, byte_count)
        if attempt < retries:
            log.warning("%s; retrying (%d/%d)", err, attempt + 1, retries)
    raise err


def fetch_remote_bits(endpoint: str, byte_count: int, *, timeout: float = DEFAULT_TIMEOUT,
                      retries: int = 0, cap: int = MAX_REQUEST_BYTES) -> BitBlock:
    """One request for ``byte_count`` bytes, expanded to bits MSB first."""
    data = fetch_remote_bytes(endpoint, byte_count, timeout=timeout, retries=retries, cap=cap)
    origin = EntropyDescriptor("qrng", 8 * byte_count, endpoint=endpoint)
    return BitBlock(_expand(int.from_bytes(data, "big"), 8 * byte_count), origin)


def next_bits(source: EntropySource, count: int) -> BitBlock:
    return source.next_bits(count)


def sample_uniform(source: EntropySource, n: int) -> int:
    """Draw ``b`` uniformly from ``[1, n)`` by rejection sampling.

    Each attempt reads ``(n - 2).bit_length()`` bits; values above ``n - 2``
    are discarded.  For ``n = 2`` no bits are read.
    """
    if not isinstance(n, int) or n < 2:
        raise DomainError(f"sample_uniform needs n >= 2, got {n}")
    top = n - 2
    width = top.bit_length()
    while True:
        v = source.read_int(width)
        if v <= top:
            return v + 1


def parse_entropy_spec(spec: str, environ=None) -> EntropySource:
    """Build a source from ``seeded:<u64>``, ``os`` or ``qrng[:<url>]``."""
    environ = os.environ if environ is None else environ
    if spec == "os":
        return OsEntropySource()
    kind, _, arg = spec.partition(":")
    if kind == "seeded":
        if not arg.isdigit():
            raise DomainError(f"bad seed in entropy spec {spec!r}")
        return SeededSource(int(arg))
    if kind == "qrng":
        endpoint = arg or environ.get(QRNG_URL_ENV)
        if not endpoint:
            raise DomainError(f"qrng entropy needs a URL or {QRNG_URL_ENV}")
        return RemoteQrngSource(endpoint)
    raise DomainError(f"unknown entropy spec {spec!r}; use seeded:<u64>, os, or qrng[:<url>]")
