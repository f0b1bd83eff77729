"""Exception types shared across the package."""


class NlwaveError(Exception):
    """Base class for all package errors."""


class GridMismatch(NlwaveError):
    """Fields or states living on incompatible grids."""


class NonFiniteField(NlwaveError):
    """A field picked up NaN or Inf entries during evolution."""


class NoContraction(NlwaveError):
    """The fixed-point iteration failed to contract on the requested window."""


class SingularEvaluation(NlwaveError):
    """Radial reconstruction near r = 0 violated its boundedness invariant."""


class AlphaOutOfRange(NlwaveError):
    """Nonlinearity exponent outside the admissible range."""


class ZeroAcceptance(NlwaveError):
    """Rejection sampler exhausted its proposal budget without an accept."""


class InadmissiblePair(NlwaveError):
    """A space-time exponent pair outside the admissible range."""


class UnsupportedS(NlwaveError):
    """Modified-energy machinery requested at an unsupported regularity index."""


class UnderResolved(NlwaveError):
    """The mode grid cannot resolve the requested concentration scale."""


class ConfigError(NlwaveError):
    """Base class for configuration-file problems."""


class UnknownKey(ConfigError):
    """A configuration document contained an unrecognized key."""


class ConstraintViolation(ConfigError):
    """A configuration value violated a declared constraint."""


class FormatVersionMismatch(NlwaveError):
    """A snapshot file header failed validation."""


class ChecksumMismatch(NlwaveError):
    """A snapshot file payload is truncated or corrupt."""
