"""Exception types shared across the package."""


class SepwitError(Exception):
    """Base class for all package errors."""


class InvalidObservableError(SepwitError):
    """Observable definition violates the axis/distance rules."""


class ShapeMismatchError(SepwitError):
    """Arrays or model components have inconsistent dimensions."""


class DataFormatError(SepwitError):
    """A file could not be parsed into a dataset or witness."""


class IncompleteDataError(SepwitError):
    """A criterion needs observables the dataset does not provide."""


class InvalidDataError(SepwitError):
    """Reconstructed state is unphysical (e.g. not positive semidefinite)."""


class NoWitnessError(SepwitError):
    """Witness coefficients cannot be built from a zero vector."""


class PoisonedStateError(SepwitError):
    """Monte Carlo chain produced a non-finite energy or observable."""
