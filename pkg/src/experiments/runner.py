import logging
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from src.coloring.models import Color, Coloring
from src.constants.models import AlphaCurves
from src.errors import ContractError, DomainError
from src.experiments.models import (
    EstimateRow,
    EstimateTable,
    EventSpec,
    Experiment,
    FkgResult,
    MultiCrossingResult,
)
from src.experiments.stats import proportion_se, wilson_interval
from src.kernels.models import Kernel
from src.lattice.builder import PatchBuilder
from src.lattice.models import Box, Lattice, LatticeFamily, LatticePatch
from src.percolation.engine import circuit, crosses, event_H, event_X, one_arm, quad_nodal_crossing
from src.percolation.models import EventKind, Quad
from src.sampler.models import SamplerMethod
from src.sampler.vertex import DEFAULT_MEMORY_CAP_BYTES, PointFieldSampler, check_memory, estimate_sampler_bytes

logger = logging.getLogger(__name__)

SMALL_BOX_LATTICE = Lattice(LatticeFamily.FACE_CENTERED_SQUARE, 0.25)
CHUNKS_PER_WORKER = 4


class VertexSampler(Protocol):
    def draw(self, seed: int, replicate: Optional[int] = None) -> np.ndarray: ...


SamplerFactory = Callable[[Kernel, np.ndarray, SamplerMethod, float, float], VertexSampler]


def default_sampler_factory(
    kernel: Kernel,
    points: np.ndarray,
    method: SamplerMethod,
    grid_spacing: float,
    memory_cap_bytes: float,
) -> PointFieldSampler:
    return PointFieldSampler(kernel, points, method, grid_spacing=grid_spacing, memory_cap_bytes=memory_cap_bytes)


def cell_seed(master_seed: int, cell: int) -> int:
    """Seed of one grid cell, derived from the master seed; replicates are indexed below it."""
    return int(np.random.SeedSequence([int(master_seed), int(cell)]).generate_state(1)[0])


def event_patch(lattice: Lattice, event: EventSpec, s: float) -> LatticePatch:
    w, h = event.half_extent(s)
    return PatchBuilder(lattice).enumerate_rect(-w, w, -h, h)


def evaluate_event(event: EventSpec, coloring: Coloring, s: float) -> bool:
    if event.kind == EventKind.CROSSING:
        return crosses(coloring, event.quad(s), event.color).occurred
    if event.kind == EventKind.CIRCUIT:
        return circuit(coloring, s, event.outer_ratio * s, event.color).occurred
    if event.kind == EventKind.H:
        return event_H(coloring, s, event.alpha, event.beta, event.color).occurred
    if event.kind == EventKind.X:
        return event_X(coloring, s, event.alpha).occurred
    if event.kind == EventKind.ONE_ARM:
        return one_arm(coloring, event.inner, s, event.color).occurred
    return quad_nodal_crossing(coloring, event.quad(s), event.gap * s).occurred


class ColoringStream:
    """Colourings of one patch, replicate r drawn from the stream (seed, r)."""

    def __init__(
        self,
        kernel: Kernel,
        patch: LatticePatch,
        method: SamplerMethod,
        seed: int,
        sampler_factory: Optional[SamplerFactory] = None,
        memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
    ):
        factory = sampler_factory or default_sampler_factory
        self.patch = patch
        self.seed = seed
        self.sampler = factory(kernel, patch.points, method, patch.lattice.unit, memory_cap_bytes)

    def coloring(self, replicate: int) -> Coloring:
        return Coloring.from_values(self.patch, self.sampler.draw(self.seed, replicate))


def _count_successes(stream: ColoringStream, event: EventSpec, s: float, replicates: Sequence[int]) -> int:
    return sum(int(evaluate_event(event, stream.coloring(r), s)) for r in replicates)


# set once per worker process by _init_worker
_worker_state: Optional[Tuple[ColoringStream, EventSpec, float]] = None


def _init_worker(
    kernel: Kernel,
    patch: LatticePatch,
    method: SamplerMethod,
    seed: int,
    factory: Optional[SamplerFactory],
    cap: float,
    event: EventSpec,
    s: float,
):
    global _worker_state
    _worker_state = (ColoringStream(kernel, patch, method, seed, factory, cap), event, s)


def _count_chunk(replicates: List[int]) -> int:
    stream, event, s = _worker_state
    return _count_successes(stream, event, s, replicates)


# ==========================================
# Experiment grid
# ==========================================


def run(experiment: Experiment, sampler_factory: Optional[SamplerFactory] = None) -> EstimateTable:
    """
    One row per scale. Replicate r of cell c uses the stream
    (cell_seed(master_seed, c), r), so tables do not depend on the worker count.
    """
    event = experiment.event
    patches = [event_patch(experiment.lattice, event, s) for s in experiment.scales]
    for s, patch in zip(experiment.scales, patches):
        check_memory(
            estimate_sampler_bytes(experiment.kernel, patch.points, experiment.method, patch.lattice.unit),
            experiment.memory_cap_bytes,
            f"scale s={s:g}",
        )

    rows = []
    for cell, (s, patch) in enumerate(zip(experiment.scales, patches)):
        start = time.perf_counter()
        seed = cell_seed(experiment.master_seed, cell)
        setup = (experiment.kernel, patch, experiment.method, seed, sampler_factory, experiment.memory_cap_bytes)
        if experiment.workers > 1:
            chunks = np.array_split(np.arange(experiment.replicates), experiment.workers * CHUNKS_PER_WORKER)
            with ProcessPoolExecutor(
                max_workers=experiment.workers, initializer=_init_worker, initargs=(*setup, event, s)
            ) as pool:
                successes = sum(pool.map(_count_chunk, [chunk.tolist() for chunk in chunks if chunk.size]))
        else:
            successes = _count_successes(ColoringStream(*setup), event, s, range(experiment.replicates))

        lo, hi = wilson_interval(successes, experiment.replicates, experiment.confidence)
        elapsed = time.perf_counter() - start
        rows.append(
            EstimateRow(
                params={"s": s, "eps": experiment.lattice.mesh_eps, **event.describe()},
                successes=successes,
                replicates=experiment.replicates,
                wilson_lo=lo,
                wilson_hi=hi,
                wall_time=elapsed,
            )
        )
        logger.info(
            "%s s=%g: p_hat=%.4f [%.4f, %.4f] (%.1fs)",
            event.kind.value,
            s,
            successes / experiment.replicates,
            lo,
            hi,
            elapsed,
        )
    return EstimateTable(rows, experiment.confidence)


# ==========================================
# Correlation inequalities
# ==========================================


def _bounding_patch(lattice: Lattice, quads: Sequence[Quad]) -> LatticePatch:
    return PatchBuilder(lattice).enumerate_rect(
        min(q.x0 for q in quads), max(q.x1 for q in quads), min(q.y0 for q in quads), max(q.y1 for q in quads)
    )


def _covariance_se(a: np.ndarray, b: np.ndarray, joint: np.ndarray) -> float:
    """Delta-method standard error of mean(joint) - mean(a) mean(b)."""
    n = a.size
    if n < 2:
        return 0.0
    p_a, p_b = a.mean(), b.mean()
    influence = joint - p_b * a - p_a * b
    return float(influence.std(ddof=1) / np.sqrt(n))


def fkg_check(
    kernel: Kernel,
    lattice: Lattice,
    quad_a: Quad,
    quad_b: Quad,
    replicates: int,
    seed: int,
    color_a: Color = Color.BLACK,
    color_b: Color = Color.BLACK,
    method: SamplerMethod = SamplerMethod.CIRCULANT,
    sampler_factory: Optional[SamplerFactory] = None,
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
) -> FkgResult:
    """Covariance of two crossing events; both must be black-increasing."""
    for name, color in (("A", color_a), ("B", color_b)):
        if color != Color.BLACK:
            raise ContractError(f"event {name} is a {color.value} crossing, which is not black-increasing")
    if replicates < 1:
        raise DomainError(f"replicates must be positive, got {replicates}")

    stream = ColoringStream(
        kernel, _bounding_patch(lattice, [quad_a, quad_b]), method, seed, sampler_factory, memory_cap_bytes
    )
    a = np.zeros(replicates)
    b = np.zeros(replicates)
    for r in range(replicates):
        coloring = stream.coloring(r)
        a[r] = crosses(coloring, quad_a, color_a).occurred
        b[r] = crosses(coloring, quad_b, color_b).occurred
    joint = a * b
    return FkgResult(float(a.mean()), float(b.mean()), float(joint.mean()), _covariance_se(a, b, joint), replicates)


def multi_rectangle_check(
    kernel: Kernel,
    lattice: Lattice,
    black_quads: Sequence[Quad],
    white_quads: Sequence[Quad],
    replicates: int,
    seed: int,
    slack: float = 0.0,
    method: SamplerMethod = SamplerMethod.CIRCULANT,
    sampler_factory: Optional[SamplerFactory] = None,
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
) -> MultiCrossingResult:
    """
    Probability that every black quad is crossed by black vertices and every
    white quad by white vertices, against the product of the two family
    probabilities; slack is the decorrelation allowance.
    """
    if not black_quads or not white_quads:
        raise DomainError("multi_rectangle_check needs at least one quad in each family")
    stream = ColoringStream(
        kernel,
        _bounding_patch(lattice, list(black_quads) + list(white_quads)),
        method,
        seed,
        sampler_factory,
        memory_cap_bytes,
    )
    black = np.zeros(replicates)
    white = np.zeros(replicates)
    for r in range(replicates):
        coloring = stream.coloring(r)
        black[r] = all(crosses(coloring, q, Color.BLACK).occurred for q in black_quads)
        white[r] = all(crosses(coloring, q, Color.WHITE).occurred for q in white_quads)
    joint = black * white
    return MultiCrossingResult(
        float(joint.mean()),
        float(black.mean()),
        float(white.mean()),
        _covariance_se(black, white, joint),
        replicates,
        slack,
    )


# ==========================================
# Calibration experiments
# ==========================================


def small_box_positivity(
    kernel: Kernel,
    lambdas: Sequence[float],
    replicates: int,
    seed: int = 0,
    lattice: Lattice = SMALL_BOX_LATTICE,
    method: SamplerMethod = SamplerMethod.CIRCULANT,
    confidence: float = 0.95,
    sampler_factory: Optional[SamplerFactory] = None,
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
) -> EstimateTable:
    """P[f > 0 at every vertex of B_lambda], all lambdas read off the same draws."""
    grid = np.asarray(lambdas, dtype=float)
    if grid.size == 0 or np.any((grid <= 0) | (grid > 1)):
        raise DomainError(f"lambda grid must lie in (0, 1], got {list(grid)}")

    patch = PatchBuilder(lattice).enumerate(Box((0.0, 0.0), float(grid.max())))
    norm = np.max(np.abs(patch.points), axis=1)
    masks = [norm <= lam + 1e-9 for lam in grid]
    for lam, mask in zip(grid, masks):
        if not mask.any():
            raise DomainError(f"B_{lam:g} contains no vertex of the lattice")

    stream = ColoringStream(kernel, patch, method, seed, sampler_factory, memory_cap_bytes)
    start = time.perf_counter()
    positive = np.zeros(grid.size, dtype=np.int64)
    for r in range(replicates):
        black = stream.coloring(r).black
        positive += [bool(black[mask].all()) for mask in masks]
    elapsed = time.perf_counter() - start

    rows = []
    for lam, count in zip(grid, positive):
        lo, hi = wilson_interval(int(count), replicates, confidence)
        rows.append(EstimateRow({"lambda": float(lam), "eps": lattice.mesh_eps}, int(count), replicates, lo, hi, elapsed))
    return EstimateTable(rows, confidence)


def alpha_curves(
    kernel: Kernel,
    lattice: Lattice,
    s: float,
    alphas: Sequence[float],
    replicates: int,
    seed: int = 0,
    method: SamplerMethod = SamplerMethod.CIRCULANT,
    sampler_factory: Optional[SamplerFactory] = None,
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
) -> AlphaCurves:
    """P[X_s(alpha)] and P[H_s(0, alpha)] - P[H_s(alpha, s/2)] over an alpha grid, with standard errors."""
    grid = np.asarray(alphas, dtype=float)
    if grid.size == 0 or np.any((grid < 0) | (grid > s / 2)):
        raise DomainError(f"alpha grid must lie in [0, s/2] = [0, {s / 2:g}]")
    if replicates < 2:
        raise DomainError(f"replicates must be >= 2, got {replicates}")

    patch = PatchBuilder(lattice).enumerate(Box((0.0, 0.0), 0.5 * s))
    stream = ColoringStream(kernel, patch, method, seed, sampler_factory, memory_cap_bytes)
    x_hits = np.zeros((replicates, grid.size))
    gaps = np.zeros((replicates, grid.size))
    for r in range(replicates):
        coloring = stream.coloring(r)
        for i, alpha in enumerate(grid):
            x_hits[r, i] = event_X(coloring, s, alpha).occurred
            low = event_H(coloring, s, 0.0, alpha).occurred
            high = event_H(coloring, s, alpha, 0.5 * s).occurred
            gaps[r, i] = float(low) - float(high)

    p_x = x_hits.mean(axis=0)
    return AlphaCurves(
        s=s,
        alphas=grid,
        p_x=p_x,
        p_x_se=np.array([proportion_se(p, replicates) for p in p_x]),
        h_gap=gaps.mean(axis=0),
        h_gap_se=gaps.std(axis=0, ddof=1) / np.sqrt(replicates),
    )


def split_replicates(replicates: int, runs: int) -> List[int]:
    """Replicate counts of independent runs sharing a total budget."""
    return [int(c.size) for c in np.array_split(np.arange(replicates), runs)]
