from dataclasses import asdict, dataclass
from typing import Dict

import mpmath
import numpy as np

from src.errors import ValidationError
from src.kernels.core import bargmann_fock_log_beta

# Coupling constant of the total-variation bound
LOG_C_COUPLING = 2.8 * float(np.log(2.0))
DEFAULT_DECAY_ALPHA = 325.0


@dataclass(frozen=True)
class DecorrBudget:
    """Inputs of the decorrelation bounds: vertex density and kernel decay (alpha, log beta)."""

    a_T: float
    alpha: float = DEFAULT_DECAY_ALPHA
    log_beta: float = float(bargmann_fock_log_beta(DEFAULT_DECAY_ALPHA))

    def __post_init__(self):
        if self.a_T <= 0:
            raise ValidationError(f"a_T must be positive, got {self.a_T}")

    @property
    def C(self) -> float:
        return float(np.exp(LOG_C_COUPLING))

    @property
    def log_C(self) -> float:
        return LOG_C_COUPLING

    @property
    def log_C_prime(self) -> float:
        """
        C' = 2^(14/5) 4^(8/5) beta^(1/5): the coupling constant applied to the
        box B_{s ln s} (area 4 s^2 ln^2 s) and to |K| <= beta s^-alpha at
        separation s.
        """
        return LOG_C_COUPLING + 1.6 * float(np.log(4.0)) + 0.2 * self.log_beta


@dataclass(frozen=True)
class RswConstants:
    """
    Quantitative RSW constants for (c0, nu), all as mpmath numbers.

    Q1, Q2, Q3 are stored as logarithms. tau1, s(Omega), s_nu and t_nu are
    so large that even their logarithms overflow doubles, so they are stored
    one logarithm deeper: log_tau1 = ln tau1, log_log_s_omega = ln ln s(Omega).
    """

    c0: mpmath.mpf
    nu: mpmath.mpf
    log_Q1: mpmath.mpf
    log_q2: mpmath.mpf
    log_q2_tilde: mpmath.mpf
    log_Q2: mpmath.mpf
    log_Q3: mpmath.mpf
    log_tau1: mpmath.mpf
    gamma_nu: mpmath.mpf
    log_s_star: mpmath.mpf
    log_log_s_omega: mpmath.mpf
    log_log_s_nu: mpmath.mpf
    log_log_t_nu: mpmath.mpf
    alpha_lower: mpmath.mpf

    def as_row(self, digits: int = 17) -> Dict[str, str]:
        return {name: mpmath.nstr(value, digits) for name, value in asdict(self).items()}


@dataclass(frozen=True)
class TNuBound:
    """log t_nu <= exponent * log a_T + log_constant."""

    exponent: float
    log_scale: float
    log_constant: mpmath.mpf

    @property
    def log_bound(self) -> mpmath.mpf:
        return self.log_constant + self.log_scale


@dataclass
class AlphaCurves:
    """
    Monte Carlo curves over an alpha grid at scale s: P[X_s(alpha)] and the
    gap P[H_s(0, alpha)] - P[H_s(alpha, s/2)], each with standard errors.
    """

    s: float
    alphas: np.ndarray
    p_x: np.ndarray
    p_x_se: np.ndarray
    h_gap: np.ndarray
    h_gap_se: np.ndarray

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=float)
        for name in ("p_x", "p_x_se", "h_gap", "h_gap_se"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != self.alphas.shape:
                raise ValidationError(f"curve '{name}' has shape {value.shape}, expected {self.alphas.shape}")
            setattr(self, name, value)
        if np.any(np.diff(self.alphas) <= 0):
            raise ValidationError("alpha grid must be strictly increasing")


@dataclass(frozen=True)
class AlphaEstimate:
    alpha_hat: float
    p1_holds: bool
    p2_holds: bool
    flagged: bool
