import logging
import math
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import LinAlgError, cholesky
from scipy.stats import multivariate_normal

from src.constants.models import LOG_C_COUPLING
from src.coupling.models import BlockGaussian, TvEstimate, TvExact
from src.errors import DomainError, SizeError

logger = logging.getLogger(__name__)

EXACT_DIMENSION_LIMIT = 12
DEFAULT_TOLERANCE = 1e-3
MC_CHUNK_ROWS = 200_000


def _sign_matrix(pattern: int, dim: int) -> np.ndarray:
    bits = (pattern >> np.arange(dim)) & 1
    return 2.0 * bits - 1.0


def orthant_probability(cov: np.ndarray, abseps: float = 1e-6, seed: int = 0) -> float:
    """P[Z > 0 coordinatewise] for Z ~ N(0, cov); closed forms up to dimension 3."""
    dim = cov.shape[0]
    if dim == 0:
        return 1.0
    if dim == 1:
        return 0.5
    if dim == 2:
        return 0.25 + math.asin(float(np.clip(cov[0, 1], -1, 1))) / (2 * math.pi)
    if dim == 3:
        angles = sum(math.asin(float(np.clip(cov[i, j], -1, 1))) for i, j in ((0, 1), (0, 2), (1, 2)))
        return 0.125 + angles / (4 * math.pi)
    # P[Z > 0] = P[-Z < 0] and -Z has the same law
    law = multivariate_normal(mean=np.zeros(dim), cov=cov, allow_singular=True, seed=seed)
    law.abseps, law.releps = abseps, 0.0
    return float(np.clip(law.cdf(np.zeros(dim)), 0.0, 1.0))


def _orthant_error(dim: int, abseps: float) -> float:
    """Error of orthant_probability: closed forms are exact up to dimension 3."""
    return 0.0 if dim <= 3 else abseps


def _pattern_law(cov: np.ndarray, abseps: float, seed: int) -> Callable[[int], float]:
    """Probability of each sign pattern, using p(pattern) = p(complement)."""
    dim = cov.shape[0]
    full = (1 << dim) - 1

    @lru_cache(maxsize=None)
    def probability(pattern: int) -> float:
        canonical = min(pattern, full ^ pattern)
        d = _sign_matrix(canonical, dim)
        return orthant_probability(cov * np.outer(d, d), abseps, seed)

    return probability


def tv_exact(bg: BlockGaussian, tolerance: float = DEFAULT_TOLERANCE, seed: int = 0) -> TvExact:
    """
    Total variation between the sign laws of X and of its independent-blocks
    counterpart Y, by enumeration of all 2^(m+n) orthants.

    Orthants above dimension 3 are integrated numerically with absolute error
    abseps each; error_bound sums those errors through |p_x - p_1 p_2| and is
    at most tolerance.
    """
    dim = bg.m + bg.n
    if dim > EXACT_DIMENSION_LIMIT:
        raise SizeError(
            f"Exact enumeration limited to m+n <= {EXACT_DIMENSION_LIMIT}, got {dim}; use tv_monte_carlo"
        )
    if not tolerance > 0:
        raise DomainError(f"tolerance must be positive, got {tolerance}")
    if bg.eta == 0.0:
        return TvExact(estimate=0.0, error_bound=0.0)

    # each pattern carries at most 3 orthant errors; the sum is halved
    abseps = tolerance / (1.5 * 2**dim)
    p_x = _pattern_law(bg.full_covariance, abseps, seed)
    p_1 = _pattern_law(bg.sigma1, abseps, seed)
    p_2 = _pattern_law(bg.sigma2, abseps, seed)
    mask1 = (1 << bg.m) - 1
    pattern_error = _orthant_error(dim, abseps) + _orthant_error(bg.m, abseps) + _orthant_error(bg.n, abseps)

    total = 0.0
    for pattern in range(1 << dim):
        p_y = p_1(pattern & mask1) * p_2(pattern >> bg.m)
        total += abs(p_x(pattern) - p_y)
    error_bound = min(1.0, 0.5 * pattern_error * 2**dim)
    logger.debug("tv_exact m=%d n=%d eta=%.3g: %.6g +- %.1e", bg.m, bg.n, bg.eta, total / 2, error_bound)
    return TvExact(estimate=float(min(1.0, total / 2.0)), error_bound=error_bound)


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return cholesky(cov, lower=True)
    except LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


def tv_monte_carlo(bg: BlockGaussian, samples: int, seed: int) -> TvEstimate:
    """
    Plug-in total variation from paired samples X = Lx z, Y = Ly z sharing z,
    with a delta-method standard error.
    """
    if samples < 2:
        raise DomainError(f"tv_monte_carlo needs at least 2 samples, got {samples}")
    dim = bg.m + bg.n
    lx = _psd_factor(bg.full_covariance)
    ly = _psd_factor(bg.independent_covariance)
    weights = 1 << np.arange(dim, dtype=np.int64)

    rng = np.random.default_rng(seed)
    codes_x = np.empty(samples, dtype=np.int64)
    codes_y = np.empty(samples, dtype=np.int64)
    for start in range(0, samples, MC_CHUNK_ROWS):
        rows = min(MC_CHUNK_ROWS, samples - start)
        z = rng.standard_normal((rows, dim))
        codes_x[start:start + rows] = ((z @ lx.T) > 0) @ weights
        codes_y[start:start + rows] = ((z @ ly.T) > 0) @ weights

    freq_x = np.bincount(codes_x, minlength=1 << dim) / samples
    freq_y = np.bincount(codes_y, minlength=1 << dim) / samples
    diff = freq_x - freq_y
    estimate = 0.5 * float(np.sum(np.abs(diff)))

    sign = np.sign(diff)
    contributions = 0.5 * (sign[codes_x] - sign[codes_y])
    std_error = float(np.std(contributions, ddof=1) / math.sqrt(samples))
    return TvEstimate(estimate=estimate, std_error=std_error)


def bakounine_bound(m: int, n: int, eta: float) -> float:
    """2^(14/5) (m+n)^(8/5) eta^(1/5), clamped to 1."""
    if not 0 <= eta <= 1:
        raise DomainError(f"eta must lie in [0, 1], got {eta}")
    if eta == 0:
        return 0.0
    log_bound = LOG_C_COUPLING + 1.6 * math.log(m + n) + 0.2 * math.log(eta)
    return math.exp(min(0.0, log_bound))
