from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

SUBSAMPLING_NOTE = "edge subsampling detects a lower bound of the true number of zero crossings"


@dataclass(frozen=True)
class MeshBudget:
    """
    Scale-dependent mesh budget of the discretisation argument.

    lambda_s lower-bounds min max(|f|, |df|) on B_2s, kbar_s upper-bounds the
    C^2 norm there, and psi_s = kbar_s / lambda_s. A mesh eps is admissible at
    scale s when eps <= min(eps1_s / mu_T, eps2_s).
    """

    s: float
    delta: float
    eta: float
    C1: float
    mu_param: float
    beta_param: float
    mu_T: float
    N: int
    lambda_s: float
    kbar_s: float
    psi_s: float
    eps1_s: float
    eps2_s: float
    admissible_mesh: float
    eps_sigma: Optional[float] = None
    below_threshold: bool = False

    def theta(self, eps: float) -> float:
        """Width of the strip around the edges where a double crossing leaves a critical point."""
        return 50.0 * self.mu_T**2 * eps**2 * self.psi_s**3

    @property
    def mesh_limit(self) -> float:
        return min(self.eps1_s / self.mu_T, self.eps2_s)

    def admits(self, eps: float) -> bool:
        return not self.below_threshold and eps <= self.mesh_limit

    def as_row(self) -> Dict[str, float]:
        return {
            "s": self.s,
            "delta": self.delta,
            "eta": self.eta,
            "lambda_s": self.lambda_s,
            "kbar_s": self.kbar_s,
            "psi_s": self.psi_s,
            "eps1_s": self.eps1_s,
            "eps2_s": self.eps2_s,
            "admissible_mesh": self.admissible_mesh,
            "eps_sigma": self.eps_sigma if self.eps_sigma is not None else float("nan"),
            "below_threshold": self.below_threshold,
        }


@dataclass
class EdgeCrossingReport:
    """Per-replicate counts of edges whose subsampled values change sign at least twice."""

    edges_total: int
    flagged: np.ndarray
    subsample_k: int
    eps: float
    s: float
    confidence: float = 0.95
    p_clean_interval: Tuple[float, float] = (0.0, 1.0)
    note: str = SUBSAMPLING_NOTE

    def __post_init__(self):
        self.flagged = np.asarray(self.flagged, dtype=np.int64)
        if np.any(self.flagged < 0) or np.any(self.flagged > self.edges_total):
            raise ValueError("flagged counts must lie between 0 and edges_total")

    @property
    def replicates(self) -> int:
        return int(self.flagged.shape[0])

    @property
    def edges_with_ge2_sign_changes(self) -> int:
        return int(self.flagged.sum())

    @property
    def clean_replicates(self) -> int:
        return int(np.sum(self.flagged == 0))

    @property
    def p_clean(self) -> float:
        """Fraction of replicates with no flagged edge in the box."""
        return self.clean_replicates / self.replicates if self.replicates else float("nan")

    @property
    def flagged_fraction(self) -> float:
        if self.edges_total == 0 or self.replicates == 0:
            return 0.0
        return self.edges_with_ge2_sign_changes / (self.edges_total * self.replicates)

    @property
    def flagged_fraction_se(self) -> float:
        if self.edges_total == 0 or self.replicates < 2:
            return 0.0
        per_replicate = self.flagged / self.edges_total
        return float(np.std(per_replicate, ddof=1) / np.sqrt(self.replicates))

    def as_row(self) -> Dict[str, float]:
        lo, hi = self.p_clean_interval
        return {
            "s": self.s,
            "eps": self.eps,
            "subsample_k": self.subsample_k,
            "edges_total": self.edges_total,
            "replicates": self.replicates,
            "flagged_fraction": self.flagged_fraction,
            "flagged_fraction_se": self.flagged_fraction_se,
            "p_clean": self.p_clean,
            "wilson_lo": lo,
            "wilson_hi": hi,
        }


@dataclass
class SupnormReport:
    s_grid: np.ndarray
    maxima: np.ndarray  # (replicates, len(s_grid))
    mesh: float
    resolution_change: float

    @property
    def means(self) -> np.ndarray:
        return self.maxima.mean(axis=0)

    @property
    def std_errors(self) -> np.ndarray:
        n = self.maxima.shape[0]
        if n < 2:
            return np.zeros(self.maxima.shape[1])
        return self.maxima.std(axis=0, ddof=1) / np.sqrt(n)

    @property
    def ratios(self) -> np.ndarray:
        """Mean sup norm divided by sqrt(ln s)."""
        return self.means / np.sqrt(np.log(self.s_grid))


@dataclass
class TransversalityReport:
    s: float
    mesh: float
    minima: np.ndarray  # per replicate min over B_s of max(|f|, |df|)
    quantile_levels: np.ndarray
    quantiles: np.ndarray
    phi_power: float
    phi_mean: float
    phi_se: float
    phi_evaluations: int
    curvature_error: float
    mu_hat: float
    mu_level: float
    mu_exponent: float


@dataclass
class NearEdgeCensus:
    """Counts of points near direction-v edges where f and its v-derivative both vanish."""

    s: float
    eps: float
    theta: float
    direction: Tuple[int, int]
    aux_mesh: float
    counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def mean(self) -> float:
        return float(self.counts.mean()) if self.counts.size else 0.0

    @property
    def std_error(self) -> float:
        if self.counts.size < 2:
            return 0.0
        return float(self.counts.std(ddof=1) / np.sqrt(self.counts.size))

    @property
    def beta_hat(self) -> float:
        """Calibrated constant of the bound E[#] <= beta s^2 theta / eps."""
        if self.theta == 0:
            return 0.0
        return self.mean * self.eps / (self.s**2 * self.theta)


@dataclass(frozen=True)
class IftBox:
    eps: float
    phi_second_bound: float
