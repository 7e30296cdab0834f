"""Exception types shared across the package."""


class SwarmError(Exception):
    """Base class for all swarmctl errors."""


class ConfigError(SwarmError, ValueError):
    """Invalid scenario file or command-line input."""


class NumericalError(SwarmError):
    """A computation could not produce a meaningful result."""


class UnstableSystemError(NumericalError):
    """The undelayed error dynamics M1 + M2 are not Hurwitz."""

    def __init__(self, detail: str = ""):
        msg = "undelayed system unstable"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class DivergenceError(NumericalError):
    """Raised by callers that treat a diverged trajectory as fatal."""
