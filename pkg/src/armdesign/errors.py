"""Exception hierarchy shared across the package.

Semantics by CLI/HTTP mapping:

* ``InputError`` (and subclasses): the caller supplied something invalid.
  CLI exit code 2, HTTP 400.
* ``NumericError`` (and subclasses): the computation itself failed
  (root solve, optimizer, infeasible target).  CLI exit code 3, HTTP 422.
"""


class DesignError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DesignError, ValueError):
    """Invalid caller input: bad domain, shape, or configuration."""


class DomainError(InputError):
    """A numeric argument is outside its mathematical domain."""


class MatrixError(InputError):
    """A correlation matrix violates symmetry/PSD/unit-diagonal constraints."""


class DegenerateVarianceError(DomainError):
    """A Bernoulli proportion at 0 or 1 makes the variance degenerate."""


class UnsupportedConfigError(InputError):
    """A structurally valid configuration the engine does not support."""


class NumericError(DesignError, ArithmeticError):
    """A numerical procedure failed to converge or bracket."""


class SearchLimitError(NumericError):
    """A search exceeded its hard iteration/size cap."""
