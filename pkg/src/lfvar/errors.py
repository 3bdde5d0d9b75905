"""Exception types shared across the package."""


class LfvarError(Exception):
    """Base class for all errors raised by lfvar."""


class AssumptionViolated(LfvarError):
    """A model assumption check failed.

    Carries the failing clause tag ("A2", "A3", ...) and the witness point.
    """

    def __init__(self, clause, witness, message=""):
        self.clause = clause
        self.witness = witness
        super().__init__(f"{clause} violated at {witness}" + (f": {message}" if message else ""))


class NoConvergence(LfvarError):
    """An iterative solve exhausted its iteration budget."""


class NotConvex(LfvarError):
    """Bracketing detected a non-monotone derivative where convexity was required."""


class MeanNotZero(LfvarError):
    """Initial data for the conservative scheme does not integrate to zero."""


class PeriodicityBroken(LfvarError):
    """A closed-loop integral over the torus failed to vanish."""


class NotPeriodic(LfvarError):
    """A spatial summation does not close around the torus."""


class ParityError(LfvarError):
    """Read or write at a lattice point of the wrong parity class."""


class OutOfRange(LfvarError):
    """Query outside the stored space-time range."""


class CflViolation(LfvarError):
    """The stability monitor found a slope exceeding its cap."""

    def __init__(self, m, k, slope, cap, message=""):
        self.m = m
        self.k = k
        self.slope = slope
        self.cap = cap
        super().__init__(
            f"CFL monitor failed at (m={m}, k={k}): |H_p| = {slope:.6g} > {cap:.6g}"
            + (f" ({message})" if message else "")
        )


class RangeViolation(LfvarError):
    """A velocity value lies outside the admissible band."""


class InvalidPath(LfvarError):
    """A walk path breaks the step or endpoint discipline."""


class DepthTooLarge(LfvarError):
    """Exact path enumeration was requested beyond the enumeration cap."""


class TooLarge(LfvarError):
    """A cone exceeds the node budget of the exhaustive minimizer."""


class NotRegular(LfvarError):
    """Multiple minimizers found where a unique one was required."""


class DegenerateFit(LfvarError):
    """Rate fitting received data it cannot fit (for instance an exact zero error)."""


class OracleUnavailable(LfvarError):
    """No exact solution is known for the requested model/data combination."""


class ConfigError(LfvarError):
    """Invalid configuration; carries the offending line number when known."""

    def __init__(self, message, line=None, key=None):
        self.line = line
        self.key = key
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
