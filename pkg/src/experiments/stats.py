import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm

from src.errors import DomainError

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 4
DEFAULT_BOOTSTRAP = 2000
RSW_FLOOR = 0.05


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise DomainError(f"Wilson interval needs at least one trial, got {trials}")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes must lie in [0, {trials}], got {successes}")
    if not 0 < confidence < 1:
        raise DomainError(f"confidence must lie in (0, 1), got {confidence}")

    z = float(norm.ppf(0.5 + 0.5 * confidence))
    p = successes / trials
    z2n = z * z / trials
    denom = 1.0 + z2n
    centre = (p + 0.5 * z2n) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def proportion_se(p: float, trials: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials) if trials > 0 else float("nan")


def paired_ratio(numerator: np.ndarray, denominator: np.ndarray) -> Tuple[float, float]:
    """
    mean(numerator) / mean(denominator) over paired replicates, with its
    delta-method standard error.
    """
    a = np.asarray(numerator, dtype=float)
    b = np.asarray(denominator, dtype=float)
    if a.shape != b.shape or a.size < 2:
        raise DomainError("paired_ratio needs two equal-length samples of at least 2 replicates")
    mean_b = float(b.mean())
    if mean_b == 0:
        raise DomainError("paired_ratio denominator has zero mean")
    ratio = float(a.mean()) / mean_b
    residual = (a - ratio * b) / mean_b
    return ratio, float(residual.std(ddof=1) / math.sqrt(a.size))


# ==========================================
# One-arm exponent
# ==========================================


@dataclass(frozen=True)
class OneArmFit:
    eta_hat: float
    ci: Tuple[float, float]
    intercept: float
    n_points: int
    excluded: int


def _slope(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def fit_one_arm(
    s_over_t: Sequence[float],
    p_hat: Sequence[float],
    replicates: Optional[Sequence[int]] = None,
    confidence: float = 0.95,
    n_bootstrap: int = DEFAULT_BOOTSTRAP,
    seed: int = 0,
) -> OneArmFit:
    """
    Least-squares slope eta_hat of log p_hat against log(s/t).

    With replicate counts the CI is a parametric binomial bootstrap; without
    them the fit residuals are resampled.
    """
    x_all = np.asarray(s_over_t, dtype=float)
    p_all = np.asarray(p_hat, dtype=float)
    if x_all.shape != p_all.shape:
        raise DomainError("s_over_t and p_hat must have the same length")
    if np.any((x_all <= 0) | (x_all >= 1)):
        raise DomainError("s/t ratios must lie in (0, 1)")

    keep = p_all > 0
    excluded = int(np.sum(~keep))
    if excluded:
        logger.warning("Excluding %d one-arm cells with zero estimated probability from the fit", excluded)
    if keep.sum() < MIN_FIT_POINTS:
        raise DomainError(
            f"fit_one_arm needs at least {MIN_FIT_POINTS} cells with positive estimates, got {int(keep.sum())}"
        )

    x = np.log(x_all[keep])
    y = np.log(p_all[keep])
    eta_hat, intercept = _slope(x, y)

    rng = np.random.default_rng(seed)
    slopes = []
    if replicates is not None:
        n = np.asarray(replicates, dtype=np.int64)[keep]
        draws = rng.binomial(n[None, :], p_all[keep][None, :], size=(n_bootstrap, n.size)) / n[None, :]
        for row in draws:
            ok = row > 0
            if ok.sum() >= 2:
                slopes.append(_slope(x[ok], np.log(row[ok]))[0])
    else:
        fitted = intercept + eta_hat * x
        residuals = y - fitted
        for _ in range(n_bootstrap):
            slopes.append(_slope(x, fitted + rng.choice(residuals, size=residuals.size, replace=True))[0])

    tail = 50.0 * (1.0 - confidence)
    lo, hi = np.percentile(slopes, [tail, 100.0 - tail]) if slopes else (float("nan"), float("nan"))
    return OneArmFit(eta_hat, (float(lo), float(hi)), intercept, int(keep.sum()), excluded)


# ==========================================
# Box-crossing comparisons
# ==========================================


@dataclass(frozen=True)
class ComparisonCheck:
    name: str
    lhs: float
    rhs: float
    holds: bool


def _interval(successes: int, trials: int, confidence: float) -> Tuple[float, float, float]:
    lo, hi = wilson_interval(successes, trials, confidence)
    return successes / trials, lo, hi


def sandwich_check(
    f2: Tuple[int, int],
    f4: Tuple[int, int],
    circuit: Tuple[int, int],
    confidence: float = 0.99,
) -> Tuple[ComparisonCheck, ComparisonCheck]:
    """
    f_s(4)^4 <= P[A_s] <= f_s(2), each side tested against the joint Wilson
    bands; arguments are (successes, trials) pairs.
    """
    p2, lo2, hi2 = _interval(*f2, confidence)
    p4, lo4, hi4 = _interval(*f4, confidence)
    pa, loa, hia = _interval(*circuit, confidence)
    lower = ComparisonCheck("f4^4 <= P[A]", p4**4, pa, hia >= lo4**4)
    upper = ComparisonCheck("P[A] <= f2", pa, p2, loa <= hi2)
    return lower, upper


def composition_check(
    f1: Tuple[int, int],
    f1k: Tuple[int, int],
    f1ik: Tuple[int, int],
    i: int,
    confidence: float = 0.99,
) -> ComparisonCheck:
    """f_s(1 + i kappa) >= f_s(1 + kappa)^i f_s(1)^(i - 1) up to the Wilson bands."""
    p1, lo1, _ = _interval(*f1, confidence)
    pk, lok, _ = _interval(*f1k, confidence)
    pik, _, hiik = _interval(*f1ik, confidence)
    rhs = pk**i * p1 ** (i - 1)
    return ComparisonCheck(f"f(1+{i}k) >= f(1+k)^{i} f(1)^{i - 1}", pik, rhs, hiik >= lok**i * lo1 ** (i - 1))


@dataclass(frozen=True)
class RswFloorCheck:
    min_wilson_lo: float
    first_p_hat: float
    last_p_hat: float
    floor: float

    @property
    def above_floor(self) -> bool:
        return self.min_wilson_lo >= self.floor

    @property
    def no_collapse(self) -> bool:
        return self.last_p_hat >= 0.5 * self.first_p_hat

    @property
    def holds(self) -> bool:
        return self.above_floor and self.no_collapse


def rsw_floor_check(p_hats: Sequence[float], wilson_los: Sequence[float], floor: float = RSW_FLOOR) -> RswFloorCheck:
    """Box-crossing floor over a scale grid given in increasing order."""
    if len(p_hats) == 0 or len(p_hats) != len(wilson_los):
        raise DomainError("rsw_floor_check needs matching, non-empty estimate columns")
    return RswFloorCheck(float(np.min(wilson_los)), float(p_hats[0]), float(p_hats[-1]), floor)
