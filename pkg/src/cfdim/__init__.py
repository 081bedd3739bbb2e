"""Hausdorff-dimension numbers for continued fractions with growing digits.

Modules:

* ``cf``        exact continued-fraction arithmetic and cylinders;
* ``pressure``  partition sums, transfer operators and the pressure roots
                s_B, t_B and their m-fold analogues;
* ``cantor``    the F_M(B) construction with its measure, gaps and scans;
* ``classify``  growth regimes, membership tests and zero-one-law runs;
* ``cli``       the ``cfdim`` command.
"""

from .errors import (BudgetExceeded, ConvergenceError, DomainError, HypothesisError,
                     PrecisionError, SpecError)

__version__ = "0.1.0"

__all__ = [
    "BudgetExceeded",
    "ConvergenceError",
    "DomainError",
    "HypothesisError",
    "PrecisionError",
    "SpecError",
    "__version__",
]
