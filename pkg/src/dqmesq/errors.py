"""Exception types raised across the package."""


class DqmeError(Exception):
    """Base class for all package errors."""


class UnpairableMode(DqmeError):
    pass


class AmbiguousPairing(DqmeError):
    pass


class DegenerateZeta(DqmeError):
    pass


class ResonantMatsubara(DqmeError):
    pass


class DimensionMismatch(DqmeError):
    pass


class MissingModeSet(DqmeError):
    pass


class UnpairedSigma(DqmeError):
    pass


class IndexOutOfRange(DqmeError):
    pass


class NonFinite(DqmeError):
    """Propagation produced NaN/inf; usually a too-large step or a bad truncation."""


class ZeroTrace(DqmeError):
    pass


class UnknownObservable(DqmeError):
    pass


class ZeroState(DqmeError):
    pass


class VanishingProjection(DqmeError):
    pass


class ComplexModeRejected(DqmeError):
    pass


class UnknownModel(DqmeError):
    pass


class UnknownParameter(DqmeError):
    pass


class NoTableAvailable(DqmeError):
    pass


class ConfigError(DqmeError):
    """Invalid job configuration.

    ``field`` names the offending config path (dotted) and ``line`` the
    source line when the document failed to parse.
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        parts = [message]
        if field is not None:
            parts.append(f"(field: {field})")
        if line is not None:
            parts.append(f"(line {line})")
        super().__init__(" ".join(parts))


class IncompatibleMethods(DqmeError):
    pass
