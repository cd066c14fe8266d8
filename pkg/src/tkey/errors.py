"""Exception hierarchy shared across the package."""


class TKeyError(Exception):
    """Base class for all errors raised by tkey."""


# chain primitives
class StepBelowTail(TKeyError):
    pass


class TargetOutOfRange(TKeyError):
    pass


class RngFailure(TKeyError):
    pass


class InvalidParams(TKeyError, ValueError):
    pass


# checkpoint solvers
class NonConvergence(TKeyError, ArithmeticError):
    pass


# prover
class Expired(TKeyError):
    pass


class NotYetValid(TKeyError):
    pass


class ClockRegression(TKeyError):
    """The requested slot is not after the last slot a password was emitted for."""


class MalformedState(TKeyError, ValueError):
    pass


class UnsupportedVersion(TKeyError, ValueError):
    pass


# verifier
class VerificationError(TKeyError):
    """A rejected password. ``reason`` is a stable short string used on the wire."""

    reason = "rejected"


class ReplayOrStale(VerificationError):
    reason = "replay_or_stale"


class BadPassword(VerificationError):
    reason = "bad_password"


class ExpiredChain(VerificationError, Expired):
    reason = "expired"


class MalformedPassword(VerificationError, ValueError):
    reason = "malformed"


class Malformed(TKeyError, ValueError):
    pass


class DuplicateCredential(TKeyError):
    pass


class UnknownCredential(TKeyError, KeyError):
    pass


# encodings
class BadLength(TKeyError, ValueError):
    pass


class BadAlphabet(TKeyError, ValueError):
    pass


class UnknownWord(TKeyError, ValueError):
    pass


class BadPadBits(TKeyError, ValueError):
    pass


class BadCount(TKeyError, ValueError):
    pass


class UnsupportedAlg(TKeyError, ValueError):
    pass
