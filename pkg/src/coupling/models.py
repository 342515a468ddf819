from dataclasses import dataclass

import numpy as np

from src.errors import ValidationError

PSD_TOLERANCE = 1e-10


@dataclass(frozen=True)
class BlockGaussian:
    """
    Centred Gaussian vector X = (X1, X2) with unit-diagonal blocks Sigma1
    (m x m), Sigma2 (n x n) and cross block Sigma12 (m x n). Its independent
    counterpart Y has the same blocks and Sigma12 replaced by zero.
    """

    sigma1: np.ndarray
    sigma2: np.ndarray
    sigma12: np.ndarray

    def __post_init__(self):
        s1 = np.atleast_2d(np.asarray(self.sigma1, dtype=float))
        s2 = np.atleast_2d(np.asarray(self.sigma2, dtype=float))
        s12 = np.asarray(self.sigma12, dtype=float).reshape(s1.shape[0], s2.shape[0])
        object.__setattr__(self, "sigma1", s1)
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "sigma12", s12)

        for name, block in (("Sigma1", s1), ("Sigma2", s2)):
            if block.shape[0] != block.shape[1]:
                raise ValidationError(f"{name} must be square, got shape {block.shape}")
            if not np.allclose(block, block.T):
                raise ValidationError(f"{name} must be symmetric")
            if not np.allclose(np.diag(block), 1.0):
                raise ValidationError(f"{name} must have unit diagonal")
        if np.any(np.abs(s12) > 1.0):
            raise ValidationError("Sigma12 entries must lie in [-1, 1]")
        if np.linalg.eigvalsh(self.full_covariance).min() < -PSD_TOLERANCE:
            raise ValidationError("Full covariance is not positive semidefinite")

    @classmethod
    def equicorrelated(cls, m: int, n: int, eta: float) -> "BlockGaussian":
        """All off-diagonal correlations equal to eta (PSD for 0 <= eta <= 1)."""
        if m < 1 or n < 1:
            raise ValidationError(f"block sizes must be positive, got m={m}, n={n}")
        s1 = np.full((m, m), eta)
        np.fill_diagonal(s1, 1.0)
        s2 = np.full((n, n), eta)
        np.fill_diagonal(s2, 1.0)
        return cls(s1, s2, np.full((m, n), eta))

    @property
    def m(self) -> int:
        return self.sigma1.shape[0]

    @property
    def n(self) -> int:
        return self.sigma2.shape[0]

    @property
    def eta(self) -> float:
        return float(np.max(np.abs(self.sigma12))) if self.sigma12.size else 0.0

    @property
    def full_covariance(self) -> np.ndarray:
        return np.block([[self.sigma1, self.sigma12], [self.sigma12.T, self.sigma2]])

    @property
    def independent_covariance(self) -> np.ndarray:
        return np.block([[self.sigma1, np.zeros_like(self.sigma12)], [np.zeros_like(self.sigma12.T), self.sigma2]])

    def flipped(self, coordinate: int) -> "BlockGaussian":
        """Same pair of laws after negating one coordinate."""
        signs = np.ones(self.m + self.n)
        signs[coordinate] = -1.0
        d1, d2 = signs[: self.m], signs[self.m:]
        return BlockGaussian(
            self.sigma1 * np.outer(d1, d1),
            self.sigma2 * np.outer(d2, d2),
            self.sigma12 * np.outer(d1, d2),
        )


@dataclass(frozen=True)
class TvEstimate:
    estimate: float
    std_error: float


@dataclass(frozen=True)
class TvExact:
    """Enumerated total variation; error_bound is 0 when every orthant has a closed form."""

    estimate: float
    error_bound: float
