"""Exception types raised by the fuzzy decomposition modules."""


class FuzzyDecompError(Exception):
    """Base class for all errors raised by this package."""


class StructuralError(FuzzyDecompError, ValueError):
    """Inputs are malformed: wrong shapes, indices outside a support, underflow."""


class DomainError(FuzzyDecompError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class NonReversibleError(FuzzyDecompError):
    """The chain violates detailed balance, so it cannot be symmetrized."""


class MissingCouplingError(FuzzyDecompError, KeyError):
    """A class pair with positive projection rate has no coupling."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "missing coupling"


class NoValidCandidateError(FuzzyDecompError, RuntimeError):
    """Every candidate function was degenerate (near-constant)."""


class ArtifactError(FuzzyDecompError):
    """A JSON artifact is missing, unreadable or does not match its schema."""
