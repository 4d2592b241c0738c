"""Exception types raised across the package."""


class AdcertError(ValueError):
    """Base class for every typed error raised by adcert."""


class GapOrOverlap(AdcertError):
    pass


class Discontinuous(AdcertError):
    pass


class BadParams(AdcertError):
    pass


class InvalidPolicy(AdcertError):
    """An adf override or singleton piece disagrees with the true derivative."""


class DimMismatch(AdcertError):
    pass


class BadBiaffinePattern(AdcertError):
    pass


class LengthMismatch(AdcertError):
    pass


class PreconditionViolated(AdcertError):
    pass


class ExplosionGuard(AdcertError):
    pass


class RequiresBias(AdcertError):
    pass


class GridTooLarge(AdcertError):
    pass


class NotApplicable(AdcertError):
    pass


class IncompleteReport(AdcertError):
    pass


class ConfigError(AdcertError):
    pass
