"""Exception types shared across the package."""


class IsingError(ValueError):
    """Base class for all package errors."""


class DomainError(IsingError):
    """Invalid lattice domain or geometric request."""


class SymmetryError(IsingError):
    """Matrix lacks a required (anti)symmetry."""


class RankError(IsingError):
    """Linear system is rank deficient or inconsistent."""


class PairingError(IsingError):
    """Eigenvalues do not split into reciprocal pairs."""


class CapExceededError(IsingError):
    """Enumeration or dense-size cap exceeded."""


class ClosureError(IsingError):
    """Operator computation left the expected linear span."""
