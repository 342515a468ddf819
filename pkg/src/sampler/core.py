import logging
import math
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cholesky
from scipy.special import gammaln

from src.errors import DegenerateConfigurationError, DomainError, SizeError
from src.kernels.core import covariance_matrix
from src.kernels.models import Kernel
from src.sampler.models import FieldSample, SamplerMethod, TruncationBudget

logger = logging.getLogger(__name__)

CHOLESKY_POINT_LIMIT = 4096
CHOLESKY_JITTER = 1e-10
# Gaussian draws held in memory at once by the batched samplers
DRAW_CHUNK_ENTRIES = 4_000_000


def _as_points(points) -> np.ndarray:
    return np.asarray(points, dtype=float).reshape(-1, 2)


def _chunks(size: int, width: int):
    step = max(1, DRAW_CHUNK_ENTRIES // max(1, width))
    for start in range(0, size, step):
        yield min(step, size - start)


# ==========================================
# Cholesky oracle
# ==========================================


def cholesky_factor(kernel: Kernel, points, jitter: float = CHOLESKY_JITTER) -> np.ndarray:
    """Lower Cholesky factor of [K(x_i - x_j)], first without and then with diagonal jitter."""
    points = _as_points(points)
    n = points.shape[0]
    if n > CHOLESKY_POINT_LIMIT:
        raise SizeError(
            f"Cholesky oracle limited to {CHOLESKY_POINT_LIMIT} points, got {n}. "
            "Use the circulant sampler for grids."
        )
    if np.unique(points, axis=0).shape[0] < n:
        raise DegenerateConfigurationError("Duplicated points give a rank-deficient covariance")

    cov = covariance_matrix(kernel, points)
    for attempt in (0.0, jitter):
        try:
            return cholesky(cov + attempt * np.eye(n), lower=True)
        except LinAlgError:
            logger.debug("Cholesky failed with jitter %.1e", attempt)
    raise DegenerateConfigurationError(
        f"Covariance of {n} points is not positive definite after jitter {jitter:.1e}"
    )


def cholesky_draws(factor: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    n = factor.shape[0]
    blocks = [rng.standard_normal((rows, n)) @ factor.T for rows in _chunks(size, n)]
    return np.concatenate(blocks, axis=0) if blocks else np.empty((0, n))


def sample_cholesky(kernel: Kernel, points, seed: int) -> FieldSample:
    points = _as_points(points)
    factor = cholesky_factor(kernel, points)
    values = cholesky_draws(factor, np.random.default_rng(seed), 1)[0]
    return FieldSample(points, values, seed, SamplerMethod.CHOLESKY)


# ==========================================
# Truncated series (Bargmann-Fock and Kostlan)
# ==========================================


def monomial_exponents(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """All (i, j) with i + j <= degree, ordered by total degree."""
    pairs = [(i, k - i) for k in range(degree + 1) for i in range(k + 1)]
    exps = np.array(pairs, dtype=int).reshape(-1, 2)
    return exps[:, 0], exps[:, 1]


def _log_power(logs: np.ndarray, exps: np.ndarray) -> np.ndarray:
    out = np.zeros((logs.shape[0], exps.shape[0]))
    np.multiply(logs[:, None], exps[None, :], out=out, where=exps[None, :] > 0)
    return out


def log_monomials(points: np.ndarray, i: np.ndarray, j: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """log|x1^i x2^j| and its sign, with 0^0 = 1."""
    with np.errstate(divide="ignore"):
        lx = np.log(np.abs(points[:, 0]))
        ly = np.log(np.abs(points[:, 1]))
    log_abs = _log_power(lx, i) + _log_power(ly, j)
    neg_x = (points[:, 0] < 0)[:, None] & (i % 2 == 1)[None, :]
    neg_y = (points[:, 1] < 0)[:, None] & (j % 2 == 1)[None, :]
    sign = np.where(neg_x ^ neg_y, -1.0, 1.0)
    return log_abs, sign


def choose_truncation(R: float, eps: float, delta: float) -> TruncationBudget:
    """Smallest N with exp(16 R^2) / (eps^2 4^N) <= delta."""
    if R < 0 or eps <= 0 or not 0 < delta <= 1:
        raise DomainError(f"choose_truncation needs R >= 0, eps > 0, 0 < delta <= 1; got {R}, {eps}, {delta}")
    needed = 16.0 * R * R - 2.0 * math.log(eps) - math.log(delta)
    # 1e-12 absorbs rounding when the bound is met with equality
    N = max(0, math.ceil(needed / math.log(4.0) - 1e-12))
    return TruncationBudget(R=float(R), eps=float(eps), delta=float(delta), N=N)


def bf_series_design(points, degree: int) -> np.ndarray:
    """Matrix of exp(-|x|^2/2) x1^i x2^j / sqrt(i! j!) (points x coefficients)."""
    points = _as_points(points)
    i, j = monomial_exponents(degree)
    log_abs, sign = log_monomials(points, i, j)
    log_norm = 0.5 * (gammaln(i + 1) + gammaln(j + 1))
    gauss = 0.5 * np.sum(points * points, axis=1)
    return sign * np.exp(log_abs - log_norm[None, :] - gauss[:, None])


def kostlan_design(points, degree: int) -> np.ndarray:
    """Matrix of the rescaled, pointwise-normalised Kostlan monomials."""
    points = _as_points(points)
    d = int(degree)
    i, j = monomial_exponents(d)
    log_abs, sign = log_monomials(points / math.sqrt(d), i, j)
    log_norm = 0.5 * (gammaln(d - i - j + 1) + gammaln(i + 1) + gammaln(j + 1)) - 0.5 * gammaln(d + 1)
    log_weight = 0.5 * d * np.log1p(np.sum(points * points, axis=1) / d)
    return sign * np.exp(log_abs - log_norm[None, :] - log_weight[:, None])


def series_draws(design: np.ndarray, rng: np.random.Generator, size: int) -> np.ndarray:
    n_coef = design.shape[1]
    blocks = [rng.standard_normal((rows, n_coef)) @ design.T for rows in _chunks(size, n_coef)]
    return np.concatenate(blocks, axis=0) if blocks else np.empty((0, design.shape[0]))


def sample_bf_series(budget: TruncationBudget, points, seed: int) -> FieldSample:
    points = _as_points(points)
    radius = np.hypot(points[:, 0], points[:, 1])
    if np.any(radius > budget.R * (1 + 1e-12)):
        worst = int(np.argmax(radius))
        raise DomainError(
            f"Point {tuple(points[worst])} lies outside the disc of radius {budget.R}"
        )
    design = bf_series_design(points, budget.N)
    values = series_draws(design, np.random.default_rng(seed), 1)[0]
    return FieldSample(points, values, seed, SamplerMethod.SERIES, parameter=budget.N)


def sample_kostlan(degree: int, points, seed: int) -> FieldSample:
    if degree < 1:
        raise DomainError(f"Kostlan degree must be >= 1, got {degree}")
    points = _as_points(points)
    design = kostlan_design(points, degree)
    values = series_draws(design, np.random.default_rng(seed), 1)[0]
    return FieldSample(points, values, seed, SamplerMethod.KOSTLAN, parameter=int(degree))


# ==========================================
# Random plane waves
# ==========================================


class WaveField:
    """
    One realisation sqrt(2/M) sum_k cos(<x, u_k> + phi_k) with uniform unit
    vectors u_k and uniform phases; covariance J0(|x - y|) in the limit.
    """

    def __init__(self, angles: np.ndarray, phases: np.ndarray):
        self.directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        self.phases = np.asarray(phases, dtype=float)
        self.count = self.phases.shape[0]

    @classmethod
    def from_rng(cls, count: int, rng: np.random.Generator) -> "WaveField":
        draws = rng.uniform(0.0, 2.0 * np.pi, size=(2, count))
        return cls(draws[0], draws[1])

    @classmethod
    def from_seed(cls, count: int, seed: int) -> "WaveField":
        if count < 1:
            raise DomainError(f"Wave count must be >= 1, got {count}")
        return cls.from_rng(count, np.random.default_rng(seed))

    def __call__(self, points) -> np.ndarray:
        points = _as_points(points)
        out = np.zeros(points.shape[0])
        width = max(1, DRAW_CHUNK_ENTRIES // max(1, self.count))
        for start in range(0, points.shape[0], width):
            block = points[start:start + width]
            phase = block @ self.directions.T + self.phases[None, :]
            out[start:start + width] = np.cos(phase).sum(axis=1)
        return math.sqrt(2.0 / self.count) * out


def wave_draws(count: int, points, rng: np.random.Generator, size: int) -> np.ndarray:
    points = _as_points(points)
    return np.stack([WaveField.from_rng(count, rng)(points) for _ in range(size)]) if size else np.empty((0, points.shape[0]))


def sample_wave(count: int, points, seed: int) -> FieldSample:
    points = _as_points(points)
    values = WaveField.from_seed(count, seed)(points)
    return FieldSample(points, values, seed, SamplerMethod.WAVE, parameter=int(count))


def empirical_covariance(draws: np.ndarray) -> np.ndarray:
    """Second-moment matrix of centred draws (known zero mean)."""
    return draws.T @ draws / draws.shape[0]


def replicate_rng(seed: int, replicate: Optional[int] = None) -> np.random.Generator:
    if replicate is None:
        return np.random.default_rng(seed)
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replicate)]))
