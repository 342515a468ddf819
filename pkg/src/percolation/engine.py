"""
Cluster labelling and the crossing, circuit and arm event detectors.

Sides of a region are represented by strips: the vertices at distance
strictly less than half the longest edge length from the side. When the side
lies on a lattice line the strip is exactly the boundary row, which keeps
black/white duality exact on square boxes.
"""

from typing import List, Optional, Tuple

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from src.coloring.models import Color, Coloring
from src.errors import DomainError
from src.lattice.models import LatticePatch
from src.percolation.models import EventKind, PercResult, Quad, SidePair

TOL = 1e-9


# ==========================================
# Cluster labelling
# ==========================================


def cluster_labels(patch: LatticePatch, open_mask: np.ndarray) -> np.ndarray:
    """Component label of every open vertex along open-open edges; -1 for closed vertices."""
    n = patch.n_vertices
    labels = np.full(n, -1, dtype=np.int64)
    if n == 0 or not open_mask.any():
        return labels

    u, v = patch.edges[:, 0], patch.edges[:, 1]
    keep = open_mask[u] & open_mask[v]
    graph = coo_matrix((np.ones(int(keep.sum()), dtype=np.int8), (u[keep], v[keep])), shape=(n, n))
    _, components = connected_components(graph, directed=False)
    labels[open_mask] = components[open_mask]
    return labels


def _touching(labels: np.ndarray, mask: np.ndarray) -> np.ndarray:
    hit = labels[mask]
    return np.unique(hit[hit >= 0])


def _witness_path(patch: LatticePatch, labels: np.ndarray, label: int, source: np.ndarray, target: np.ndarray) -> List[int]:
    """Shortest open path inside one cluster from the source strip to the target strip."""
    members = labels == label
    u, v = patch.edges[:, 0], patch.edges[:, 1]
    keep = members[u] & members[v]

    graph = nx.Graph()
    graph.add_nodes_from(np.nonzero(members)[0].tolist())
    graph.add_edges_from(zip(u[keep].tolist(), v[keep].tolist()))
    graph.add_edges_from(("source", int(i)) for i in np.nonzero(members & source)[0])
    graph.add_edges_from((int(j), "target") for j in np.nonzero(members & target)[0])
    path = nx.shortest_path(graph, "source", "target")
    return [int(i) for i in path[1:-1]]


def connects(
    patch: LatticePatch,
    open_mask: np.ndarray,
    source: np.ndarray,
    target: np.ndarray,
    want_witness: bool = False,
) -> Tuple[bool, Optional[List[int]]]:
    labels = cluster_labels(patch, open_mask)
    common = np.intersect1d(_touching(labels, source), _touching(labels, target))
    if common.size == 0:
        return False, None
    if not want_witness:
        return True, None
    return True, _witness_path(patch, labels, int(common[0]), source, target)


# ==========================================
# Geometry helpers
# ==========================================


def _half_strip(patch: LatticePatch) -> float:
    return 0.5 * patch.lattice.longest_edge - TOL


def _check_inside(patch: LatticePatch, x0: float, x1: float, y0: float, y1: float):
    px0, px1, py0, py1 = patch.bounds
    if x0 < px0 - TOL or x1 > px1 + TOL or y0 < py0 - TOL or y1 > py1 + TOL:
        raise DomainError(
            f"Region [{x0}, {x1}] x [{y0}, {y1}] exceeds the coloured region "
            f"[{px0}, {px1}] x [{py0}, {py1}]"
        )


def _rect_mask(points: np.ndarray, x0: float, x1: float, y0: float, y1: float) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return (x >= x0 - TOL) & (x <= x1 + TOL) & (y >= y0 - TOL) & (y <= y1 + TOL)


def _sup_norm(points: np.ndarray, center: Tuple[float, float]) -> np.ndarray:
    return np.maximum(np.abs(points[:, 0] - center[0]), np.abs(points[:, 1] - center[1]))


def _quad_strips(points: np.ndarray, quad: Quad, half: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    region = _rect_mask(points, quad.x0, quad.x1, quad.y0, quad.y1)
    x, y = points[:, 0], points[:, 1]
    if quad.side_pair == SidePair.LEFT_RIGHT:
        source = region & (x - quad.x0 < half)
        target = region & (quad.x1 - x < half)
    else:
        source = region & (y - quad.y0 < half)
        target = region & (quad.y1 - y < half)
    return region, source, target


# ==========================================
# Events
# ==========================================


def crosses(coloring: Coloring, quad: Quad, color: Color = Color.BLACK, witness: bool = False) -> PercResult:
    patch = coloring.patch
    _check_inside(patch, quad.x0, quad.x1, quad.y0, quad.y1)
    region, source, target = _quad_strips(patch.points, quad, _half_strip(patch))
    occurred, path = connects(patch, coloring.mask(color) & region, source, target, witness)
    return PercResult(EventKind.CROSSING, occurred, path)


def circuit(
    coloring: Coloring,
    inner: float,
    outer: float,
    color: Color = Color.BLACK,
    center: Tuple[float, float] = (0.0, 0.0),
    witness: bool = False,
) -> PercResult:
    """
    Circuit of the given colour in the closed annulus B_outer minus the open
    B_inner, detected by duality: it exists iff no path of the opposite colour
    joins the inner boundary strip to the outer one. The witness is the set of
    circuit-coloured vertices bounding the opposite clusters of the inner
    strip, sorted by angle.
    """
    if not 0 < inner < outer:
        raise DomainError(f"circuit needs 0 < inner < outer, got {inner}, {outer}")
    patch = coloring.patch
    cx, cy = center
    _check_inside(patch, cx - outer, cx + outer, cy - outer, cy + outer)

    points = patch.points
    half = _half_strip(patch)
    norm = _sup_norm(points, center)
    annulus = (norm >= inner - TOL) & (norm <= outer + TOL)
    inner_strip = annulus & (norm - inner < half)
    outer_strip = annulus & (outer - norm < half)

    blocking = coloring.mask(color.opposite) & annulus
    labels = cluster_labels(patch, blocking)
    crossing = np.intersect1d(_touching(labels, inner_strip), _touching(labels, outer_strip))
    occurred = crossing.size == 0
    if not (occurred and witness):
        return PercResult(EventKind.CIRCUIT, occurred)

    reached = np.isin(labels, _touching(labels, inner_strip)) & (labels >= 0)
    adjacent = (patch.adjacency @ reached.astype(np.int64)) > 0
    separator = coloring.mask(color) & annulus & (inner_strip | adjacent)
    indices = np.nonzero(separator)[0]
    angles = np.arctan2(points[indices, 1] - cy, points[indices, 0] - cx)
    return PercResult(EventKind.CIRCUIT, True, [int(i) for i in indices[np.argsort(angles, kind="stable")]])


def event_H(
    coloring: Coloring,
    s: float,
    alpha: float,
    beta: float,
    color: Color = Color.BLACK,
    center: Tuple[float, float] = (0.0, 0.0),
    witness: bool = False,
) -> PercResult:
    """Path in B_{s/2} from the left side to {s/2} x [alpha, beta]."""
    half_side = 0.5 * s
    if not -half_side <= alpha <= beta <= half_side:
        raise DomainError(f"event_H needs -s/2 <= alpha <= beta <= s/2, got alpha={alpha}, beta={beta}, s={s}")
    cx, cy = center
    quad = Quad(cx - half_side, cx + half_side, cy - half_side, cy + half_side)
    patch = coloring.patch
    _check_inside(patch, quad.x0, quad.x1, quad.y0, quad.y1)

    region, source, target = _quad_strips(patch.points, quad, _half_strip(patch))
    y = patch.points[:, 1] - cy
    target &= (y >= alpha - TOL) & (y <= beta + TOL)
    occurred, path = connects(patch, coloring.mask(color) & region, source, target, witness)
    return PercResult(EventKind.H, occurred, path)


def event_X(
    coloring: Coloring,
    s: float,
    alpha: float,
    center: Tuple[float, float] = (0.0, 0.0),
    witness: bool = False,
) -> PercResult:
    """
    Black paths in B_{s/2} joining {-s/2} x [-s/2, -alpha] to {-s/2} x [alpha, s/2],
    the mirror pair on the right side, and a bridge between the two. Since
    clusters are connected, this is one black cluster touching all four
    boundary segments.
    """
    half_side = 0.5 * s
    if not 0 <= alpha <= half_side:
        raise DomainError(f"event_X needs 0 <= alpha <= s/2, got alpha={alpha}, s={s}")
    cx, cy = center
    quad = Quad(cx - half_side, cx + half_side, cy - half_side, cy + half_side)
    patch = coloring.patch
    _check_inside(patch, quad.x0, quad.x1, quad.y0, quad.y1)

    region, left, right = _quad_strips(patch.points, quad, _half_strip(patch))
    y = patch.points[:, 1] - cy
    low = y <= -alpha + TOL
    high = y >= alpha - TOL
    segments = [left & low, left & high, right & low, right & high]

    labels = cluster_labels(patch, coloring.black & region)
    common = _touching(labels, segments[0])
    for segment in segments[1:]:
        common = np.intersect1d(common, _touching(labels, segment))
    if common.size == 0:
        return PercResult(EventKind.X, False)
    if not witness:
        return PercResult(EventKind.X, True)

    label = int(common[0])
    path = (
        _witness_path(patch, labels, label, segments[0], segments[1])
        + _witness_path(patch, labels, label, segments[1], segments[2])
        + _witness_path(patch, labels, label, segments[2], segments[3])
    )
    return PercResult(EventKind.X, True, path)


def one_arm(
    coloring: Coloring,
    s: float,
    t: float,
    color: Color = Color.BLACK,
    center: Tuple[float, float] = (0.0, 0.0),
    witness: bool = False,
) -> PercResult:
    """Path inside B_t from the strip of the boundary of B_s to the strip of the boundary of B_t."""
    if not 0 < s < t:
        raise DomainError(f"one_arm needs 0 < s < t, got s={s}, t={t}")
    patch = coloring.patch
    cx, cy = center
    _check_inside(patch, cx - t, cx + t, cy - t, cy + t)

    half = _half_strip(patch)
    norm = _sup_norm(patch.points, center)
    region = norm <= t + TOL
    source = region & (np.abs(norm - s) < half)
    target = region & (t - norm < half)
    occurred, path = connects(patch, coloring.mask(color) & region, source, target, witness)
    return PercResult(EventKind.ONE_ARM, occurred, path)


def nodal_sub_quads(quad: Quad, gap: float, min_width: float) -> Tuple[Quad, Quad]:
    """
    The two parallel sub-rectangles separated by gap: (upper, lower) for a
    left-right quad, (right, left) for a top-bottom one.
    """
    if gap <= 0:
        raise DomainError(f"gap must be positive, got {gap}")
    if quad.side_pair == SidePair.LEFT_RIGHT:
        band = 0.5 * (quad.height - gap)
        if band < min_width:
            raise DomainError(
                f"Quad of height {quad.height} cannot hold two bands of width >= {min_width} separated by {gap}"
            )
        upper = Quad(quad.x0, quad.x1, quad.y1 - band, quad.y1, SidePair.LEFT_RIGHT)
        lower = Quad(quad.x0, quad.x1, quad.y0, quad.y0 + band, SidePair.LEFT_RIGHT)
        return upper, lower

    band = 0.5 * (quad.width - gap)
    if band < min_width:
        raise DomainError(
            f"Quad of width {quad.width} cannot hold two bands of width >= {min_width} separated by {gap}"
        )
    right = Quad(quad.x1 - band, quad.x1, quad.y0, quad.y1, SidePair.TOP_BOTTOM)
    left = Quad(quad.x0, quad.x0 + band, quad.y0, quad.y1, SidePair.TOP_BOTTOM)
    return right, left


def quad_nodal_crossing(coloring: Coloring, quad: Quad, gap: float, witness: bool = False) -> PercResult:
    """
    Black crossing of the first sub-rectangle and white crossing of the
    second: a nodal line crossing the quad is trapped between them.
    """
    first, second = nodal_sub_quads(quad, gap, coloring.patch.lattice.mesh_eps)
    black = crosses(coloring, first, Color.BLACK, witness)
    if not black.occurred:
        return PercResult(EventKind.NODAL, False)
    white = crosses(coloring, second, Color.WHITE, witness)
    if not white.occurred:
        return PercResult(EventKind.NODAL, False)
    path = black.witness + white.witness if witness else None
    return PercResult(EventKind.NODAL, True, path)
