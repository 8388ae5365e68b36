"""Exception hierarchy shared by every seglab module."""


class SeglabError(Exception):
    """Base class for all seglab errors."""


# grouping
class DecompositionError(SeglabError, ValueError):
    pass


class NonMonotoneBreakpoints(DecompositionError):
    pass


class EndpointMismatch(DecompositionError):
    pass


class IndexOutOfRange(SeglabError, IndexError):
    pass


class CouplingError(SeglabError, ValueError):
    pass


class NotSymmetric(CouplingError):
    pass


class NonzeroIntraGroup(CouplingError):
    pass


class ZeroCrossGroup(CouplingError):
    pass


class NegativeEntry(CouplingError):
    pass


# grid / quadrature
class GridError(SeglabError, ValueError):
    pass


class BallOutsideDomain(GridError):
    pass


class RadiusBelowResolution(GridError):
    pass


class WindowOutsideDomain(GridError):
    pass


class ShapeMismatch(SeglabError, ValueError):
    pass


class DumpFormatError(SeglabError, ValueError):
    pass


# solver
class ForcingError(SeglabError, ValueError):
    pass


class SolveError(SeglabError, RuntimeError):
    """Raised by the solver; carries the (possibly partial) result."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class MaxItersExceeded(SolveError):
    pass


class DivergedToNaN(SolveError):
    pass


class ScheduleTooShort(SeglabError, ValueError):
    pass


class ScheduleNotAscending(SeglabError, ValueError):
    pass


# diagnostics
class AlphaOutOfRange(SeglabError, ValueError):
    pass


class NotCrossPair(SeglabError, ValueError):
    pass


# free boundary
class ThresholdOutOfRange(SeglabError, ValueError):
    pass


class ZeroH(SeglabError, ValueError):
    pass


class NotOnNodalSet(SeglabError, ValueError):
    pass


class VanishingSideGradient(SeglabError, ValueError):
    pass


class WrongClass(SeglabError, ValueError):
    pass


class NoRaysFound(SeglabError, ValueError):
    pass


class DimensionMismatch(SeglabError, ValueError):
    pass


# configuration
class ConfigError(SeglabError):
    """Collects every problem found in an experiment configuration."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class ConfigSyntaxError(ConfigError):
    def __init__(self, message, line=None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__([f"{where}{message}"])


class ConfigSemanticError(ConfigError):
    pass
