"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class PrecisionError(ArithmeticError):
    """A real input is not known to enough digits for the requested result."""


class BudgetExceeded(RuntimeError):
    """An enumeration would exceed its configured node budget."""


class ConvergenceError(RuntimeError):
    """An iterative method failed to reach its tolerance."""


class SpecError(ValueError):
    """A construction spec violates one or more invariants.

    ``violations`` holds one human-readable line per failed check.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class HypothesisError(ValueError):
    """A standing hypothesis on a user-supplied function does not hold."""
