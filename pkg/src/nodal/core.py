"""
Discretisation-validity statistics: double zero crossings of lattice edges,
sup norms, transversality and near-edge critical points of the nodal set,
together with the mesh budget and the quantitative implicit function box.
"""

import logging
import math
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from src.errors import DomainError, ResolutionError
from src.experiments.stats import wilson_interval
from src.kernels.models import Kernel
from src.lattice.builder import PatchBuilder
from src.lattice.models import Box, Lattice
from src.nodal.models import (
    EdgeCrossingReport,
    IftBox,
    MeshBudget,
    NearEdgeCensus,
    SupnormReport,
    TransversalityReport,
)
from src.sampler.models import SamplerMethod
from src.sampler.vertex import DEFAULT_MEMORY_CAP_BYTES, PointFieldSampler

logger = logging.getLogger(__name__)

FieldFunction = Callable[[np.ndarray], np.ndarray]

DEFAULT_SUBSAMPLE_K = 8
MIN_SUBSAMPLE_K = 4
DEFAULT_AUX_MESH = 0.025
SUPNORM_S_RANGE = (2.0, 64.0)
RESOLUTION_CHANGE_LIMIT = 0.02
QUANTILE_LEVELS = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95)
TOL = 1e-9


class _FieldSource:
    """Replicate-indexed draws at a fixed point set, or a fixed deterministic field."""

    def __init__(
        self,
        kernel: Optional[Kernel],
        points: np.ndarray,
        spacing: float,
        field_fn: Optional[FieldFunction] = None,
        memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
    ):
        self.points = points
        self.field_fn = field_fn
        if field_fn is None:
            if kernel is None:
                raise DomainError("a kernel or a field function is required")
            method = SamplerMethod.CIRCULANT if kernel.is_stationary else SamplerMethod.KOSTLAN
            self._sampler = PointFieldSampler(
                kernel, points, method, grid_spacing=spacing, memory_cap_bytes=memory_cap_bytes
            )

    def draw(self, seed: int, replicate: int) -> np.ndarray:
        if self.field_fn is not None:
            return np.asarray(self.field_fn(self.points), dtype=float).reshape(-1)
        return self._sampler.draw(seed, replicate)


def _centered_grid(half_extent: float, mesh: float, margin: int = 0) -> Tuple[np.ndarray, int]:
    """Nodes i * mesh for |i| <= n + margin, with n = ceil(half_extent / mesh)."""
    n = int(math.ceil(half_extent / mesh - TOL)) + margin
    return mesh * np.arange(-n, n + 1), n


# ==========================================
# Double crossings of edges
# ==========================================


def _edge_starts(patch) -> np.ndarray:
    """Endpoint each edge step starts from (edges are stored as sorted index pairs)."""
    u, v = patch.edges[:, 0], patch.edges[:, 1]
    forward = np.all(patch.coords[v] - patch.coords[u] == patch.edge_steps, axis=1)
    return np.where(forward, u, v)


def double_crossing_census(
    kernel: Optional[Kernel],
    lattice: Lattice,
    box: Box,
    subsample_k: int = DEFAULT_SUBSAMPLE_K,
    seed: int = 0,
    replicates: int = 100,
    confidence: float = 0.95,
    field_fn: Optional[FieldFunction] = None,
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
) -> EdgeCrossingReport:
    """
    Samples the field jointly at the vertices and at subsample_k evenly spaced
    interior points of every edge in the box, and counts per replicate the
    edges whose value sequence changes sign at least twice.

    All sample points lie on the grid of spacing unit / (k + 1), so the
    circulant sampler is used for stationary kernels.
    """
    if subsample_k < MIN_SUBSAMPLE_K:
        raise DomainError(f"subsample_k must be >= {MIN_SUBSAMPLE_K}, got {subsample_k}")
    if replicates < 1:
        raise DomainError(f"replicates must be positive, got {replicates}")

    patch = PatchBuilder(lattice).enumerate(box)
    k1 = subsample_k + 1
    start = patch.coords[_edge_starts(patch)]
    fractions = np.arange(k1 + 1)
    # integer coordinates on the refined grid, shape (E, k + 2, 2)
    refined = k1 * start[:, None, :] + fractions[None, :, None] * patch.edge_steps[:, None, :]
    unique, inverse = np.unique(refined.reshape(-1, 2), axis=0, return_inverse=True)
    inverse = inverse.reshape(refined.shape[:2])

    spacing = lattice.unit / k1
    points = unique * spacing + np.asarray(lattice.offset, dtype=float)
    source = _FieldSource(kernel, points, spacing, field_fn, memory_cap_bytes)
    logger.info(
        "Edge census: %d edges, %d sample points, k=%d, %d replicates",
        patch.n_edges,
        points.shape[0],
        subsample_k,
        replicates,
    )

    flagged = np.zeros(replicates, dtype=np.int64)
    for rep in range(replicates):
        positive = source.draw(seed, rep)[inverse] > 0
        changes = np.count_nonzero(positive[:, 1:] != positive[:, :-1], axis=1)
        flagged[rep] = int(np.count_nonzero(changes >= 2))

    clean = int(np.sum(flagged == 0))
    return EdgeCrossingReport(
        edges_total=patch.n_edges,
        flagged=flagged,
        subsample_k=subsample_k,
        eps=lattice.mesh_eps,
        s=box.half_side,
        confidence=confidence,
        p_clean_interval=wilson_interval(clean, replicates, confidence),
    )


# ==========================================
# Mesh budget and implicit function box
# ==========================================


def mesh_calculator(
    s: float,
    delta: float,
    eta: float,
    C1: float,
    mu_param: float,
    beta_param: float,
    mu_T: float,
    N: int,
    R: Optional[float] = None,
    sigma: Optional[float] = None,
) -> MeshBudget:
    """
    lambda(s) = mu (2s)^(-2 - eta/6), kbar(s) = C1 / (delta / 3N) sqrt(ln 2s),
    psi = kbar / lambda, eps1 = (1 / (4 psi))^2,
    eps2 = (delta / 3N) / (50 mu_T^2 beta s^2 psi^3), together with the
    admissibility mesh s^(-8 - eta) and, given R and sigma,
    eps(sigma) = 1 / (floor((R sigma)^(8 + eta/32)) + 1).
    """
    if s < 2:
        raise DomainError(f"mesh_calculator needs s >= 2, got {s}")
    for name, value in (
        ("delta", delta),
        ("eta", eta),
        ("C1", C1),
        ("mu_param", mu_param),
        ("beta_param", beta_param),
        ("mu_T", mu_T),
        ("N", N),
    ):
        if value <= 0:
            raise DomainError(f"{name} must be positive, got {value}")

    share = delta / (3.0 * N)
    lambda_s = mu_param * (2.0 * s) ** (-2.0 - eta / 6.0)
    kbar_s = C1 / share * math.sqrt(math.log(2.0 * s))
    psi_s = kbar_s / lambda_s
    eps1_s = (0.25 / psi_s) ** 2
    eps2_s = share / (50.0 * mu_T**2 * beta_param * s**2 * psi_s**3)
    admissible = s ** (-8.0 - eta)

    eps_sigma = None
    if R is not None and sigma is not None:
        if sigma < 2 or R <= 0:
            raise DomainError(f"eps(sigma) needs R > 0 and sigma >= 2, got R={R}, sigma={sigma}")
        log_count = (8.0 + eta / 32.0) * math.log(R * sigma)
        eps_sigma = 1.0 / (math.floor(math.exp(log_count) + TOL) + 1) if log_count < 700 else math.exp(-log_count)

    below = psi_s < 1.0
    if below:
        logger.warning("psi(%g) = %.3g < 1: scale below the threshold of the mesh budget", s, psi_s)
    return MeshBudget(
        s=s,
        delta=delta,
        eta=eta,
        C1=C1,
        mu_param=mu_param,
        beta_param=beta_param,
        mu_T=mu_T,
        N=N,
        lambda_s=lambda_s,
        kbar_s=kbar_s,
        psi_s=psi_s,
        eps1_s=eps1_s,
        eps2_s=eps2_s,
        admissible_mesh=admissible,
        eps_sigma=eps_sigma,
        below_threshold=below,
    )


def ift_box(k_bound: float, lambda_bound: float) -> IftBox:
    """Box size (lambda / 4k)^2 on which the nodal set is a graph, and the bound 100 (k / lambda)^3 on its curvature."""
    if lambda_bound <= 0 or k_bound < lambda_bound:
        raise DomainError(f"ift_box needs k >= lambda > 0, got k={k_bound}, lambda={lambda_bound}")
    ratio = k_bound / lambda_bound
    return IftBox(eps=(0.25 / ratio) ** 2, phi_second_bound=100.0 * ratio**3)


# ==========================================
# Field statistics on fine grids
# ==========================================


def _grid_points(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    return np.stack([X.ravel(), Y.ravel()], axis=1)


def supnorm_statistic(
    kernel: Optional[Kernel],
    s_grid: Sequence[float],
    mesh: float = 0.1,
    seed: int = 0,
    replicates: int = 20,
    field_fn: Optional[FieldFunction] = None,
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
) -> SupnormReport:
    """
    Per replicate max |f| over the nested boxes B_s on one grid covering the
    largest box. resolution_change is the mean relative drop of the largest
    box maximum when every other grid node is discarded.
    """
    s_values = np.asarray(s_grid, dtype=float)
    lo, hi = SUPNORM_S_RANGE
    if s_values.size == 0 or np.any((s_values < lo) | (s_values > hi)):
        raise DomainError(f"s_grid must lie in [{lo:g}, {hi:g}], got {list(s_values)}")
    if mesh <= 0:
        raise DomainError(f"mesh must be positive, got {mesh}")

    axis, _ = _centered_grid(float(s_values.max()), mesh)
    points = _grid_points(axis, axis)
    source = _FieldSource(kernel, points, mesh, field_fn, memory_cap_bytes)
    norm = np.maximum(np.abs(points[:, 0]), np.abs(points[:, 1]))
    masks = [norm <= s + TOL for s in s_values]
    n = axis.size
    coarse = np.zeros((n, n), dtype=bool)
    coarse[::2, ::2] = True
    coarse = coarse.ravel() & masks[int(np.argmax(s_values))]

    maxima = np.zeros((replicates, s_values.size))
    changes = np.zeros(replicates)
    for rep in range(replicates):
        values = np.abs(source.draw(seed, rep))
        maxima[rep] = [values[mask].max() for mask in masks]
        fine = maxima[rep, int(np.argmax(s_values))]
        changes[rep] = (fine - values[coarse].max()) / fine if fine > 0 else 0.0

    resolution_change = float(changes.mean())
    if resolution_change > RESOLUTION_CHANGE_LIMIT:
        logger.warning(
            "Sup norm changes by %.1f%% when the mesh doubles; refine the grid below %g",
            100 * resolution_change,
            mesh,
        )
    return SupnormReport(s_values, maxima, mesh, resolution_change)


def _directional_difference(values: np.ndarray, step: Tuple[int, int], mesh: float) -> np.ndarray:
    """Centred difference of a (ny, nx) grid along an integer step, on interior nodes."""
    dx, dy = step
    ny, nx = values.shape
    ahead = values[1 + dy:ny - 1 + dy, 1 + dx:nx - 1 + dx]
    behind = values[1 - dy:ny - 1 - dy, 1 - dx:nx - 1 - dx]
    return (ahead - behind) / (2.0 * mesh * math.hypot(dx, dy))


def transversality_statistic(
    kernel: Optional[Kernel],
    s: float,
    mesh: float = 0.05,
    seed: int = 0,
    replicates: int = 20,
    phi_power: float = 0.5,
    mu_level: float = 0.05,
    mu_eta: float = 1.0,
    field_fn: Optional[FieldFunction] = None,
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
) -> TransversalityReport:
    """
    Distribution of min over B_s of max(|f|, |df|) with centred-difference
    gradients, and E[Phi^a] for Phi = 1 / (|f| |df|^2) over all grid nodes.

    mu_hat is the mu_level quantile of the minimum divided by s^(-2 - mu_eta).
    curvature_error = h^2 max|f''| / 6 bounds the gradient discretisation error.
    """
    if s <= 0 or mesh <= 0:
        raise DomainError(f"s and mesh must be positive, got s={s}, mesh={mesh}")
    if not 0 < phi_power < 1:
        raise DomainError(f"phi_power must lie in (0, 1), got {phi_power}")

    axis, _ = _centered_grid(s, mesh, margin=1)
    n = axis.size
    points = _grid_points(axis, axis)
    source = _FieldSource(kernel, points, mesh, field_fn, memory_cap_bytes)
    inner = axis[1:-1]
    inside = (np.abs(inner)[:, None] <= s + TOL) & (np.abs(inner)[None, :] <= s + TOL)

    minima = np.zeros(replicates)
    phi_means = np.zeros(replicates)
    curvature = 0.0
    for rep in range(replicates):
        values = source.draw(seed, rep).reshape(n, n)
        f = values[1:-1, 1:-1]
        fx = _directional_difference(values, (1, 0), mesh)
        fy = _directional_difference(values, (0, 1), mesh)
        grad = np.hypot(fx, fy)
        minima[rep] = np.maximum(np.abs(f), grad)[inside].min()

        with np.errstate(divide="ignore"):
            phi = np.abs(f[inside]) ** (-phi_power) * grad[inside] ** (-2.0 * phi_power)
        phi_means[rep] = float(np.mean(phi))

        fxx = (values[1:-1, 2:] - 2 * f + values[1:-1, :-2]) / mesh**2
        fyy = (values[2:, 1:-1] - 2 * f + values[:-2, 1:-1]) / mesh**2
        curvature = max(curvature, float(np.max(np.abs(fxx))), float(np.max(np.abs(fyy))))

    levels = np.asarray(QUANTILE_LEVELS)
    quantiles = np.quantile(minima, levels)
    phi_se = float(phi_means.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    mu_exponent = -2.0 - mu_eta
    mu_hat = float(np.quantile(minima, mu_level)) / s**mu_exponent
    return TransversalityReport(
        s=s,
        mesh=mesh,
        minima=minima,
        quantile_levels=levels,
        quantiles=quantiles,
        phi_power=phi_power,
        phi_mean=float(phi_means.mean()),
        phi_se=phi_se,
        phi_evaluations=int(inside.sum()) * replicates,
        curvature_error=mesh**2 * curvature / 6.0,
        mu_hat=mu_hat,
        mu_level=mu_level,
        mu_exponent=mu_exponent,
    )


# ==========================================
# Near-edge critical points
# ==========================================


def _common_zeros(f: np.ndarray, g: np.ndarray, xs: np.ndarray, ys: np.ndarray, mesh: float) -> np.ndarray:
    """
    Common zeros of the piecewise-linear interpolants of f and g on the
    triangulated grid (each cell split along its rising diagonal).
    """
    found = []
    f00, f10, f01, f11 = f[:-1, :-1], f[:-1, 1:], f[1:, :-1], f[1:, 1:]
    g00, g10, g01, g11 = g[:-1, :-1], g[:-1, 1:], g[1:, :-1], g[1:, 1:]
    X, Y = np.meshgrid(xs[:-1], ys[:-1], indexing="xy")
    # (second vertex, third vertex, their offsets from the cell corner)
    triangles = (
        (f10, f11, g10, g11, (1.0, 0.0), (1.0, 1.0)),
        (f11, f01, g11, g01, (1.0, 1.0), (0.0, 1.0)),
    )
    for fb, fc, gb, gc, ob, oc in triangles:
        a1, a2 = fb - f00, fc - f00
        b1, b2 = gb - g00, gc - g00
        det = a1 * b2 - a2 * b1
        with np.errstate(divide="ignore", invalid="ignore"):
            l1 = (a2 * g00 - b2 * f00) / det
            l2 = (b1 * f00 - a1 * g00) / det
        hit = (det != 0) & (l1 >= 0) & (l2 >= 0) & (l1 + l2 <= 1)
        px = X[hit] + mesh * (l1[hit] * ob[0] + l2[hit] * oc[0])
        py = Y[hit] + mesh * (l1[hit] * ob[1] + l2[hit] * oc[1])
        found.append(np.stack([px, py], axis=1))
    return np.concatenate(found) if found else np.empty((0, 2))


def near_edge_critical_census(
    kernel: Optional[Kernel],
    lattice: Lattice,
    theta: float,
    s: float,
    direction: Tuple[int, int] = (1, 0),
    seed: int = 0,
    replicates: int = 20,
    aux_mesh: Optional[float] = None,
    field_fn: Optional[FieldFunction] = None,
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES,
) -> NearEdgeCensus:
    """
    Counts points of B_s within distance theta of the lines carrying the
    direction-v edges where f = 0 and df(v) = 0, located as common zeros of
    piecewise-linear interpolants on an auxiliary grid of mesh aux_mesh.
    """
    key = tuple(int(c) for c in direction)
    lines = lattice.edge_lines()
    if key not in lines and (-key[0], -key[1]) in lines:
        key = (-key[0], -key[1])
    if key not in lines:
        raise DomainError(f"{direction} is not an edge direction of the {lattice.family.value} lattice")
    if theta < 0 or s <= 0:
        raise DomainError(f"theta must be >= 0 and s > 0, got theta={theta}, s={s}")

    mesh = aux_mesh if aux_mesh is not None else DEFAULT_AUX_MESH
    if theta == 0:
        return NearEdgeCensus(s, lattice.mesh_eps, 0.0, key, mesh, np.zeros(replicates, dtype=np.int64))
    if mesh > theta / 2:
        raise ResolutionError(
            f"auxiliary mesh {mesh:g} is too coarse for theta={theta:g}; use aux_mesh <= {theta / 2:g}"
        )

    spacing = lines[key]
    length = math.hypot(*key)
    normal = np.array([-key[1], key[0]], dtype=float) / length
    phase = float(normal @ np.asarray(lattice.offset, dtype=float))

    axis, _ = _centered_grid(s, mesh, margin=2)
    n = axis.size
    points = _grid_points(axis, axis)
    source = _FieldSource(kernel, points, mesh, field_fn, memory_cap_bytes)
    inner = axis[1:-1]

    counts = np.zeros(replicates, dtype=np.int64)
    for rep in range(replicates):
        values = source.draw(seed, rep).reshape(n, n)
        derivative = _directional_difference(values, key, mesh)
        zeros = _common_zeros(values[1:-1, 1:-1], derivative, inner, inner, mesh)
        if zeros.size == 0:
            continue
        in_box = np.max(np.abs(zeros), axis=1) <= s
        offset = np.mod(zeros @ normal - phase, spacing)
        near = np.minimum(offset, spacing - offset) <= theta
        counts[rep] = int(np.count_nonzero(in_box & near))

    return NearEdgeCensus(s, lattice.mesh_eps, theta, key, mesh, counts)
