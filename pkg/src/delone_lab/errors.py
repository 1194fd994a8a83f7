class InputError(ValueError):
    """Caller supplied an invalid argument."""


class DomainError(ValueError):
    """Argument lies outside the set where the operation is defined."""


class DivergenceError(RuntimeError):
    """A numerical diagnostic failed (non-finite value, non-stabilising scan)."""
