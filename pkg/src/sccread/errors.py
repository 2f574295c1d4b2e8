"""Exception hierarchy shared across the package.

Everything raised deliberately by this package derives from
:class:`SccReadError`, so callers can catch one base class at the
boundary (the CLI does exactly that to map failures to exit codes).
"""


class SccReadError(Exception):
    """Base class for every error this package raises on purpose."""


class ConfigError(SccReadError):
    """A run configuration is missing, malformed, or physically invalid."""


class DataFormatError(SccReadError):
    """An input data file could not be parsed.

    Where possible the message names the file, line, and column of the
    offending token.
    """

    def __init__(self, message, path=None, line=None, column=None):
        loc = ""
        if path is not None:
            loc = str(path)
            if line is not None:
                loc += f":{line}"
                if column is not None:
                    loc += f":{column}"
            loc = f"{loc}: "
        super().__init__(loc + message)
        self.path = path
        self.line = line
        self.column = column


class UnitError(ConfigError):
    """A quantity string has a missing, unknown, or mismatched unit."""


class DegenerateRatesError(SccReadError):
    """Both charge jump rates are zero where a steady state is required."""


class QuadratureError(SccReadError):
    """The count-distribution integral failed to converge within budget."""


class NonIdentifiableError(SccReadError):
    """The data cannot constrain the model (e.g. no two-level blinking
    signature in a histogram that a single Poisson already explains)."""


class RankDeficiencyError(SccReadError):
    """A regression design has fewer independent rows than parameters."""


class InvalidDomainError(SccReadError):
    """An input lies outside the mathematical domain of a model."""


class NoContrastError(SccReadError):
    """The two outcome probabilities are equal, so no measurement can
    distinguish the states and noise/sensitivity figures diverge."""


class ZeroSuccessError(SccReadError):
    """A heralded-initialization success probability of zero was given."""


class UnknownLevelError(SccReadError):
    """A level name does not exist in the level system."""


class UnknownTransitionError(SccReadError):
    """A transition name does not exist in the level system."""
