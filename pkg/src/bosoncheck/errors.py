"""Exception types shared across the package."""


class ResourceLimitError(RuntimeError):
    """A request exceeds the desk-scale cost guard (enumeration size, permanent order)."""


class NumericalDegeneracyError(ArithmeticError):
    """A computation hit a degenerate numerical state (zero norm, broken normalization)."""
