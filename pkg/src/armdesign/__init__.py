"""Multi-arm clinical trial design engine.

Computes exact (MVN-integration based) operating characteristics of
K-experimental-arm designs under a range of multiple-comparison
corrections, determines sample sizes for three kinds of power, and
optimizes arm-wise allocation ratios.  Exposed as a library, a CLI
(``armdesign``), and an HTTP service (``python -m armdesign.service``).
"""

from armdesign.errors import (
    DesignError,
    DomainError,
    MatrixError,
    DegenerateVarianceError,
    InputError,
    NumericError,
    SearchLimitError,
    UnsupportedConfigError,
)

__version__ = "0.1.0"

__all__ = [
    "DesignError",
    "DomainError",
    "MatrixError",
    "DegenerateVarianceError",
    "InputError",
    "NumericError",
    "SearchLimitError",
    "UnsupportedConfigError",
    "__version__",
]
