"""Exception hierarchy shared by every module."""


class PrimeEvidenceError(Exception):
    pass


class DomainError(PrimeEvidenceError, ValueError):
    """An argument lies outside the operation's mathematical domain."""


class ResourceLimitError(PrimeEvidenceError):
    """The input exceeds a configured enumeration or oracle cap."""


class TransportError(PrimeEvidenceError):
    """A remote entropy request failed or returned an unusable body."""


class MalformedError(PrimeEvidenceError):
    """A certificate document could not be decoded."""
