import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.errors import DomainError, EmbeddingFailureError, SizeError, UnsupportedKernelError
from src.kernels.core import radial_profile
from src.kernels.models import Kernel
from src.sampler.models import FieldSample, SamplerMethod

logger = logging.getLogger(__name__)

DEFAULT_PADDING = 2
MAX_PADDING = 16
EIGENVALUE_TOLERANCE = 1e-8
MAX_CLIPPED_MASS = 1e-3
# complex128 spectrum + two real work arrays per embedded cell
BYTES_PER_EMBEDDED_CELL = 48


@dataclass(frozen=True)
class RegularGrid:
    """Points origin + spacing * (col, row) for 0 <= col < nx, 0 <= row < ny."""

    origin: Tuple[float, float]
    spacing: float
    shape: Tuple[int, int]  # (ny, nx)

    def __post_init__(self):
        if self.spacing <= 0 or self.shape[0] < 1 or self.shape[1] < 1:
            raise DomainError(f"Degenerate grid: spacing {self.spacing}, shape {self.shape}")

    @property
    def size(self) -> int:
        return self.shape[0] * self.shape[1]

    def points(self) -> np.ndarray:
        ny, nx = self.shape
        rows, cols = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
        xs = self.origin[0] + self.spacing * cols
        ys = self.origin[1] + self.spacing * rows
        return np.stack([xs.ravel(), ys.ravel()], axis=1)

    def locate(self, points, tol: float = 1e-7) -> np.ndarray:
        """Flat grid index of each point; points must sit on grid nodes."""
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        cols = (points[:, 0] - self.origin[0]) / self.spacing
        rows = (points[:, 1] - self.origin[1]) / self.spacing
        ic = np.rint(cols).astype(int)
        ir = np.rint(rows).astype(int)
        off_grid = (np.abs(cols - ic) > tol) | (np.abs(rows - ir) > tol)
        outside = (ic < 0) | (ir < 0) | (ic >= self.shape[1]) | (ir >= self.shape[0])
        if np.any(off_grid | outside):
            bad = int(np.argmax(off_grid | outside))
            raise DomainError(f"Point {tuple(points[bad])} is not a node of the sampling grid")
        return ir * self.shape[1] + ic

    @classmethod
    def covering(cls, points, spacing: float) -> "RegularGrid":
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        lo = points.min(axis=0)
        hi = points.max(axis=0)
        nx = int(round((hi[0] - lo[0]) / spacing)) + 1
        ny = int(round((hi[1] - lo[1]) / spacing)) + 1
        return cls(origin=(float(lo[0]), float(lo[1])), spacing=float(spacing), shape=(ny, nx))


def _torus_lags(n: int, spacing: float) -> np.ndarray:
    k = np.arange(n)
    return spacing * np.minimum(k, n - k)


class CirculantEmbedding:
    """
    Exact sampler of a stationary field on a regular grid.

    The covariance is wrapped on a torus of padding * (grid size) cells per
    axis, diagonalised by fft2, and square-rooted. Negative eigenvalues below
    -EIGENVALUE_TOLERANCE * max eigenvalue are clipped and their mass
    reported; when the clipped share exceeds max_clipped_mass the padding is
    doubled, up to MAX_PADDING.
    """

    def __init__(
        self,
        kernel: Kernel,
        grid: RegularGrid,
        padding_factor: float = DEFAULT_PADDING,
        max_clipped_mass: float = MAX_CLIPPED_MASS,
        max_padding: float = MAX_PADDING,
        memory_cap_bytes: Optional[float] = None,
    ):
        if not kernel.is_stationary:
            raise UnsupportedKernelError(
                f"Circulant embedding needs a stationary kernel, got {kernel.describe()}"
            )
        if padding_factor < 2:
            raise DomainError(f"padding_factor must be >= 2, got {padding_factor}")

        self.kernel = kernel
        self.grid = grid
        self.max_clipped_mass = max_clipped_mass
        self.memory_cap_bytes = memory_cap_bytes

        padding = float(padding_factor)
        while True:
            self._embed(padding)
            if self.clipped_mass <= max_clipped_mass:
                break
            if padding * 2 > max_padding:
                raise EmbeddingFailureError(
                    f"Circulant embedding of {kernel.describe()} clips {self.clipped_mass:.3e} "
                    f"of the spectral mass at padding {padding:g} (limit {max_clipped_mass:.1e}); "
                    "use a larger padding or a smaller grid"
                )
            logger.info(
                "Clipped mass %.3e at padding %g, doubling padding", self.clipped_mass, padding
            )
            padding *= 2
        self.padding_factor = padding

        if self.clipped_mass > 0:
            logger.warning(
                "Circulant embedding of %s clipped %.3e of the spectral mass (min eigenvalue %.3e)",
                kernel.describe(),
                self.clipped_mass,
                self.min_eigenvalue,
            )

    @staticmethod
    def embedded_shape(grid: RegularGrid, padding: float) -> Tuple[int, int]:
        return tuple(max(2, int(math.ceil(padding * n))) for n in grid.shape)

    @staticmethod
    def estimate_bytes(grid: RegularGrid, padding: float = DEFAULT_PADDING) -> int:
        my, mx = CirculantEmbedding.embedded_shape(grid, padding)
        return my * mx * BYTES_PER_EMBEDDED_CELL

    def _embed(self, padding: float):
        my, mx = self.embedded_shape(self.grid, padding)
        if self.memory_cap_bytes is not None and my * mx * BYTES_PER_EMBEDDED_CELL > self.memory_cap_bytes:
            raise SizeError(
                f"Circulant embedding of {my}x{mx} cells exceeds the memory cap of "
                f"{self.memory_cap_bytes / 2**30:.2f} GiB; tile the domain into smaller boxes"
            )
        h = self.grid.spacing
        lag_y = _torus_lags(my, h)
        lag_x = _torus_lags(mx, h)
        first_row = radial_profile(self.kernel, np.hypot(lag_y[:, None], lag_x[None, :]))

        lam = np.real(np.fft.fft2(first_row))
        self.min_eigenvalue = float(lam.min())
        total = float(np.sum(np.abs(lam)))
        negative = lam < -EIGENVALUE_TOLERANCE * float(lam.max())
        self.clipped_mass = float(np.sum(np.abs(lam[negative])) / total) if total > 0 else 0.0

        self.embedded_shape_ = (my, mx)
        self._scale = np.sqrt(np.maximum(lam, 0.0) / (my * mx))

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        """One field on the grid, shape grid.shape."""
        my, mx = self.embedded_shape_
        noise = rng.standard_normal((2, my, mx))
        z = np.fft.fft2(self._scale * (noise[0] + 1j * noise[1]))
        ny, nx = self.grid.shape
        return np.real(z[:ny, :nx])

    def draw_pair(self, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """Two independent fields from the real and imaginary parts of one FFT."""
        my, mx = self.embedded_shape_
        noise = rng.standard_normal((2, my, mx))
        z = np.fft.fft2(self._scale * (noise[0] + 1j * noise[1]))
        ny, nx = self.grid.shape
        return np.real(z[:ny, :nx]), np.imag(z[:ny, :nx])


def sample_circulant(
    kernel: Kernel,
    grid: RegularGrid,
    padding_factor: float = DEFAULT_PADDING,
    seed: int = 0,
) -> FieldSample:
    embedding = CirculantEmbedding(kernel, grid, padding_factor)
    values = embedding.draw(np.random.default_rng(seed)).ravel()
    return FieldSample(
        grid.points(),
        values,
        seed,
        SamplerMethod.CIRCULANT,
        diagnostics={
            "min_eigenvalue": embedding.min_eigenvalue,
            "clipped_mass": embedding.clipped_mass,
            "padding_factor": embedding.padding_factor,
        },
    )
