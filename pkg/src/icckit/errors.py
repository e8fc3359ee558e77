"""Exception hierarchy shared across the package.

Three branches map onto CLI exit codes: invalid inputs or misuse (2),
file/parse problems (3), and numerical failures (4).
"""
from __future__ import annotations


class IccKitError(Exception):
    """Base class for all package errors."""


class InputError(IccKitError):
    """Invalid arguments, graph structure, or preconditions (exit code 2)."""


class DataError(IccKitError):
    """File, format, or parse problems (exit code 3)."""


class NumericError(IccKitError):
    """Numerical failures: divergence, NaN, degenerate variance (exit code 4)."""


# graph
class CycleDetected(InputError):
    """The directed graph contains a cycle (including self-loops)."""


class DuplicateNode(InputError):
    """Node names are not unique."""


class DanglingEdge(InputError):
    """An edge endpoint does not refer to a declared node."""


class TooManyOrderings(InputError):
    """Topological-ordering enumeration exceeded its cap.

    Carries ``found`` = number of orderings discovered before giving up;
    callers should fall back to sampling.
    """

    def __init__(self, found: int, cap: int):
        self.found = found
        self.cap = cap
        super().__init__(f"more than {cap} topological orderings (found {found})")


# scm
class NonFiniteValue(NumericError):
    """A structural mechanism produced NaN or infinity."""


class NotInvertible(InputError):
    """A mechanism cannot be inverted in its noise argument."""


class NonIntegral(InputError):
    """Dequantization requires an integer-valued column."""


# sampler / sobol
class DimensionTooLarge(InputError):
    """Requested dimension exceeds what the method supports."""


# predictor
class ShapeMismatch(InputError):
    """Array shapes do not chain with the declared layer sizes."""


class NonFiniteLoss(NumericError):
    """Training loss diverged to NaN or infinity."""


class ParseError(DataError):
    """A file could not be parsed into the expected structure."""


# estimator
class DegenerateVariance(NumericError):
    """Pooled output variance is numerically zero (constant predictor)."""


class InsufficientRows(InputError):
    """The dataset has too few rows for the requested block size."""


class ContextNotAncestorClosed(InputError):
    """Data-backed conditioning requires an ancestor-closed context."""


# icc
class AllZero(NumericError):
    """Every raw attribution is zero; nothing to normalize."""


# sobol oracle
class QuadratureFailure(NumericError):
    """Model returned non-finite values at quadrature nodes."""


class ZeroTotalVariance(NumericError):
    """The decomposed function has zero variance."""


# eval
class MissingColumn(DataError):
    """A column declared in the schema is absent from the file."""


class NonNumeric(DataError):
    """A cell could not be converted to a number."""


class IoError(DataError):
    """Output path missing, unwritable, or would be overwritten without --force."""
