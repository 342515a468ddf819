"""Exception hierarchy shared by every package under src/.

Malformed input raises ValueError subclasses and exceeded size limits raise
MemoryError subclasses, so callers catching the builtins keep working.
"""


class LabError(Exception):
    """Base class of every error raised by the simulation lab."""


class ValidationError(LabError, ValueError):
    """Malformed configuration, tables or command-line input."""


class DomainError(LabError, ValueError):
    """Argument outside the domain where an operation is defined."""


class AlignmentError(LabError, ValueError):
    """Field sample points do not match the enumerated lattice vertices."""


class UnsupportedKernelError(LabError, ValueError):
    """Kernel lacks the metadata or structure an operation needs."""


class ContractError(LabError, ValueError):
    """An event spec violates the contract of an experiment (e.g. FKG needs increasing events)."""


class ResolutionError(LabError, ValueError):
    """Auxiliary grid too coarse for the requested geometric resolution."""


class DegenerateConfigurationError(LabError, ArithmeticError):
    """Covariance matrix not positive definite even after jitter."""


class EmbeddingFailureError(LabError, ArithmeticError):
    """Circulant embedding clipped too much negative spectral mass."""


class SizeError(LabError, MemoryError):
    """Work or memory budget exceeded."""
