from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from src.errors import ValidationError


class KernelFamily(str, Enum):
    BARGMANN_FOCK = "bf"
    BESSEL_WAVE = "bessel"
    KOSTLAN = "kostlan"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class Kernel:
    """
    Stationary, isotropic covariance K with K(0) = 1.

    Decay metadata (alpha, log beta) is optional and declares
    |K(x)| <= beta * |x|^-alpha for |x| >= 1. beta is kept as a logarithm
    because the constants needed by super-polynomial kernels exceed double
    range (see bargmann_fock_log_beta).
    """

    family: KernelFamily
    degree: Optional[int] = None
    radii: Optional[Tuple[float, ...]] = None
    values: Optional[Tuple[float, ...]] = None
    decay_alpha: Optional[float] = None
    decay_log_beta: Optional[float] = None

    def __post_init__(self):
        if self.family == KernelFamily.KOSTLAN:
            if self.degree is None or int(self.degree) != self.degree or self.degree < 1:
                raise ValidationError(
                    f"Kostlan kernel needs a positive integer degree, got {self.degree!r}"
                )
        if self.family == KernelFamily.TABULATED:
            self._validate_table()
        if (self.decay_alpha is None) != (self.decay_log_beta is None):
            raise ValidationError("decay metadata needs both alpha and beta")
        if self.decay_alpha is not None and self.decay_alpha < 0:
            raise ValidationError(f"decay alpha must be nonnegative, got {self.decay_alpha}")

    def _validate_table(self):
        if self.radii is None or self.values is None:
            raise ValidationError("tabulated kernel needs radii and values")
        radii = np.asarray(self.radii, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if radii.ndim != 1 or radii.shape != values.shape or radii.size < 2:
            raise ValidationError(
                f"tabulated kernel needs two equal-length columns with at least 2 rows, "
                f"got {radii.shape} radii and {values.shape} values"
            )
        if not np.all(np.isfinite(radii)) or not np.all(np.isfinite(values)):
            raise ValidationError("tabulated kernel contains non-finite entries")
        if radii[0] != 0.0:
            raise ValidationError(f"tabulated radii must start at 0, found {radii[0]}")
        steps = np.diff(radii)
        if np.any(steps <= 0):
            bad = int(np.argmax(steps <= 0)) + 1
            raise ValidationError(
                f"tabulated radii must be strictly increasing; row {bad} has radius {radii[bad]} "
                f"after {radii[bad - 1]}"
            )
        if values[0] != 1.0:
            raise ValidationError(f"tabulated kernel must satisfy K(0) = 1, found {values[0]}")
        if np.any(np.abs(values) > 1.0):
            raise ValidationError("tabulated kernel values must lie in [-1, 1]")

    @property
    def has_decay(self) -> bool:
        return self.decay_alpha is not None

    @property
    def decay_beta(self) -> float:
        """beta itself; inf when it exceeds double range."""
        if self.decay_log_beta is None:
            raise ValidationError("kernel has no decay metadata")
        with np.errstate(over="ignore"):
            return float(np.exp(self.decay_log_beta))

    @property
    def is_stationary(self) -> bool:
        return self.family != KernelFamily.KOSTLAN

    def with_decay(self, alpha: float, beta: Optional[float] = None, log_beta: Optional[float] = None) -> "Kernel":
        if (beta is None) == (log_beta is None):
            raise ValidationError("give exactly one of beta or log_beta")
        if beta is not None:
            if beta <= 0:
                raise ValidationError(f"decay beta must be positive, got {beta}")
            log_beta = float(np.log(beta))
        return Kernel(
            family=self.family,
            degree=self.degree,
            radii=self.radii,
            values=self.values,
            decay_alpha=float(alpha),
            decay_log_beta=float(log_beta),
        )

    def describe(self) -> str:
        if self.family == KernelFamily.KOSTLAN:
            return f"kostlan(d={self.degree})"
        if self.family == KernelFamily.TABULATED:
            return f"tabulated({len(self.radii)} rows)"
        return self.family.value


@dataclass
class DecayReport:
    radii: np.ndarray
    ratios: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    @property
    def holds(self) -> bool:
        return self.max_ratio <= 1.0
