import logging
import math
from typing import Optional

import numpy as np
import psutil

from src.errors import DomainError, SizeError, ValidationError
from src.kernels.models import Kernel, KernelFamily
from src.sampler.core import (
    bf_series_design,
    cholesky_draws,
    cholesky_factor,
    choose_truncation,
    kostlan_design,
    replicate_rng,
    series_draws,
    WaveField,
)
from src.sampler.grid import DEFAULT_PADDING, CirculantEmbedding, RegularGrid
from src.sampler.models import SamplerMethod

logger = logging.getLogger(__name__)

DEFAULT_MEMORY_CAP_BYTES = 8 * 2**30
DEFAULT_WAVE_COUNT = 500
SERIES_EPS = 0.05
SERIES_DELTA = 0.01


def check_memory(required_bytes: float, cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES, what: str = "sampling"):
    """Raises SizeError when a job needs more than the configured cap."""
    if required_bytes > cap_bytes:
        raise SizeError(
            f"{what} needs {required_bytes / 2**30:.2f} GiB, above the cap of "
            f"{cap_bytes / 2**30:.2f} GiB; split the box into tiles of at most "
            f"{math.sqrt(cap_bytes / required_bytes):.2f} times the current side"
        )
    available = psutil.virtual_memory().available
    if required_bytes > available:
        logger.warning(
            "%s needs %.2f GiB but only %.2f GiB are currently available",
            what,
            required_bytes / 2**30,
            available / 2**30,
        )


def _series_radius(points: np.ndarray) -> float:
    return float(np.max(np.hypot(points[:, 0], points[:, 1]))) if points.shape[0] else 0.0


def estimate_sampler_bytes(
    kernel: Kernel,
    points,
    method: SamplerMethod,
    grid_spacing: Optional[float] = None,
    padding_factor: float = DEFAULT_PADDING,
) -> float:
    """Working memory of a PointFieldSampler set-up, in bytes."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = points.shape[0]
    method = SamplerMethod(method)
    if n == 0:
        return 0.0
    if method == SamplerMethod.CIRCULANT:
        if grid_spacing is None:
            raise ValidationError("circulant sampling needs a grid spacing")
        return float(CirculantEmbedding.estimate_bytes(RegularGrid.covering(points, grid_spacing), padding_factor))
    if method == SamplerMethod.CHOLESKY:
        return 8.0 * n * n
    if method == SamplerMethod.SERIES:
        return 8.0 * n * choose_truncation(_series_radius(points), SERIES_EPS, SERIES_DELTA).n_coefficients
    if method == SamplerMethod.KOSTLAN:
        degree = kernel.degree or 1
        return 8.0 * n * (degree + 1) * (degree + 2) / 2
    return 16.0 * n


class PointFieldSampler:
    """
    Draws a field at a fixed point set, one independent draw per seed.

    The expensive set-up (embedding spectrum, Cholesky factor, monomial
    design) is done once; draw(seed) is then cheap and reproducible.
    grid_spacing is required for the circulant method: the points must lie
    on a regular grid of that spacing.
    """

    def __init__(
        self,
        kernel: Kernel,
        points,
        method: SamplerMethod = SamplerMethod.CIRCULANT,
        grid_spacing: Optional[float] = None,
        padding_factor: float = DEFAULT_PADDING,
        wave_count: int = DEFAULT_WAVE_COUNT,
        memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
    ):
        self.kernel = kernel
        self.points = np.asarray(points, dtype=float).reshape(-1, 2)
        self.method = SamplerMethod(method)
        self.wave_count = wave_count
        check_memory(
            estimate_sampler_bytes(kernel, self.points, self.method, grid_spacing, padding_factor),
            memory_cap_bytes,
            f"{self.method.value} sampling",
        )

        if self.method == SamplerMethod.CIRCULANT:
            grid = RegularGrid.covering(self.points, grid_spacing)
            self._embedding = CirculantEmbedding(kernel, grid, padding_factor, memory_cap_bytes=memory_cap_bytes)
            self._index = grid.locate(self.points)
        elif self.method == SamplerMethod.CHOLESKY:
            self._factor = cholesky_factor(kernel, self.points)
        elif self.method == SamplerMethod.SERIES:
            if kernel.family != KernelFamily.BARGMANN_FOCK:
                raise ValidationError("series sampling realises the Bargmann-Fock kernel only")
            self.budget = choose_truncation(_series_radius(self.points), SERIES_EPS, SERIES_DELTA)
            self._design = bf_series_design(self.points, self.budget.N)
        elif self.method == SamplerMethod.KOSTLAN:
            if kernel.family != KernelFamily.KOSTLAN:
                raise ValidationError("kostlan sampling needs a kostlan kernel")
            self._design = kostlan_design(self.points, kernel.degree)
        elif self.method == SamplerMethod.WAVE:
            if kernel.family != KernelFamily.BESSEL_WAVE:
                raise ValidationError("wave sampling realises the Bessel kernel only")
        else:
            raise DomainError(f"Unknown sampler method '{method}'")

    @property
    def diagnostics(self) -> dict:
        if self.method == SamplerMethod.CIRCULANT:
            return {
                "min_eigenvalue": self._embedding.min_eigenvalue,
                "clipped_mass": self._embedding.clipped_mass,
                "padding_factor": self._embedding.padding_factor,
            }
        return {}

    def draw(self, seed: int, replicate: Optional[int] = None) -> np.ndarray:
        rng = replicate_rng(seed, replicate)
        if self.method == SamplerMethod.CIRCULANT:
            return self._embedding.draw(rng).ravel()[self._index]
        if self.method == SamplerMethod.CHOLESKY:
            return cholesky_draws(self._factor, rng, 1)[0]
        if self.method == SamplerMethod.WAVE:
            return WaveField.from_rng(self.wave_count, rng)(self.points)
        return series_draws(self._design, rng, 1)[0]

    __call__ = draw
