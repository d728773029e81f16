"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateOrbitError(RuntimeError):
    """The orbit collapsed onto an attracting fixed point."""


class IndependenceError(RuntimeError):
    """Two lattice orbits kept failing the independence test."""
