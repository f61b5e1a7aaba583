"""Exception hierarchy shared by all modules."""


class NqsError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(NqsError, ValueError):
    """Unknown tag, bad key or otherwise invalid configuration."""


class DomainError(NqsError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(NqsError, ValueError):
    """Dimension mismatch between a state and its input."""


class SingularityError(NqsError, ArithmeticError):
    """A complex activation was evaluated on (or numerically at) a pole."""


class CapacityError(NqsError, ValueError):
    """Requested work exceeds an exponential-enumeration guard."""


class ZeroAmplitudeError(NqsError, ArithmeticError):
    """The wavefunction vanishes where a finite log-amplitude is needed."""


class TrainingError(NqsError, RuntimeError):
    """Optimization produced non-finite values or diverged."""


class UnsupportedConventionError(NqsError, ValueError):
    """An operation requires a different spin/hidden-unit convention."""


class ConsistencyError(NqsError, RuntimeError):
    """An internal invariant (hermiticity, gate identity, ...) failed."""


class CircuitParseError(NqsError, ValueError):
    """Malformed line in a circuit description."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class BondDimensionError(CapacityError):
    """MPS construction would exceed the configured bond-dimension cap."""

    def __init__(self, cut, dim, cap):
        super().__init__(f"bond dimension {dim} at cut {cut} exceeds cap {cap}")
        self.cut = cut
        self.dim = dim
        self.cap = cap
