"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DivergenceError(ValueError):
    """A requested quantity is a divergent integral (e.g. undiscounted
    release-phase occupation when the net drift is nonnegative)."""


class InsufficientDataError(RuntimeError):
    """A simulation-based estimate was requested from too little data."""
