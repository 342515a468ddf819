import math
from typing import Callable, FrozenSet, List, Set, Tuple

import numpy as np

from src.errors import DomainError
from src.lattice.models import Box, Lattice, LatticeFamily, LatticePatch, SymmetryReport

# Tolerance (in integer units) for vertices lying on the box boundary
BOUNDARY_TOL = 1e-9
AUDIT_DECIMALS = 9
MAX_WITNESSES = 5

Point = Tuple[float, float]


class PatchBuilder:
    def __init__(self, lattice: Lattice):
        self.lattice = lattice

    def _is_vertex(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if self.lattice.family == LatticeFamily.FACE_CENTERED_SQUARE:
            return (a + b) % 2 == 0
        return np.ones(a.shape, dtype=bool)

    def _steps(self) -> List[Tuple[int, int, Callable[[np.ndarray], np.ndarray]]]:
        """Edge steps (da, db) in their canonical orientation, with the vertices they start from."""
        every = lambda c: np.ones(c.shape[0], dtype=bool)
        if self.lattice.family == LatticeFamily.FACE_CENTERED_SQUARE:
            corner = lambda c: c[:, 0] % 2 == 0
            return [(2, 0, corner), (0, 2, corner), (1, 1, every), (1, -1, every)]
        return [(1, 0, every), (0, 1, every), (1, 1, every)]

    def enumerate(self, box: Box) -> LatticePatch:
        return self.enumerate_rect(*box.bounds)

    def enumerate_rect(self, x0: float, x1: float, y0: float, y1: float) -> LatticePatch:
        """All vertices in the closed rectangle and all edges with both endpoints inside."""
        if x1 < x0 or y1 < y0:
            raise DomainError(f"Degenerate rectangle [{x0}, {x1}] x [{y0}, {y1}]")

        unit = self.lattice.unit
        ox, oy = self.lattice.offset
        a_min = math.ceil((x0 - ox) / unit - BOUNDARY_TOL)
        a_max = math.floor((x1 - ox) / unit + BOUNDARY_TOL)
        b_min = math.ceil((y0 - oy) / unit - BOUNDARY_TOL)
        b_max = math.floor((y1 - oy) / unit + BOUNDARY_TOL)
        bounds = (float(x0), float(x1), float(y0), float(y1))

        if a_min > a_max or b_min > b_max:
            return LatticePatch(
                self.lattice,
                bounds,
                np.empty((0, 2), dtype=int),
                np.empty((0, 2), dtype=int),
                np.empty((0, 2), dtype=int),
            )

        A, B = np.meshgrid(np.arange(a_min, a_max + 1), np.arange(b_min, b_max + 1), indexing="xy")
        mask = self._is_vertex(A, B)
        index = np.full(A.shape, -1, dtype=np.int64)
        index[mask] = np.arange(int(mask.sum()))
        coords = np.stack([A[mask], B[mask]], axis=1)
        n = coords.shape[0]

        edge_blocks = []
        step_blocks = []
        for da, db, applies in self._steps():
            ta = coords[:, 0] + da
            tb = coords[:, 1] + db
            ok = applies(coords) & (ta >= a_min) & (ta <= a_max) & (tb >= b_min) & (tb <= b_max)
            target = np.full(n, -1, dtype=np.int64)
            target[ok] = index[tb[ok] - b_min, ta[ok] - a_min]
            ok &= target >= 0
            src = np.nonzero(ok)[0]
            pairs = np.sort(np.stack([src, target[ok]], axis=1), axis=1)
            edge_blocks.append(pairs)
            step_blocks.append(np.tile([da, db], (pairs.shape[0], 1)))

        edges = np.concatenate(edge_blocks).astype(np.int64)
        steps = np.concatenate(step_blocks).astype(np.int64)
        return LatticePatch(self.lattice, bounds, coords.astype(np.int64), edges, steps)

    def symmetry_audit(self, box: Box) -> SymmetryReport:
        """
        Checks that the vertex and edge sets inside the box are invariant under
        the reflection about the horizontal line through the box centre and the
        quarter turn about the box centre.
        """
        patch = self.enumerate(box)
        cx, cy = box.center
        reflect = lambda p: (p[0], 2 * cy - p[1])
        rotate = lambda p: (cx - (p[1] - cy), cy + (p[0] - cx))

        witnesses: List[str] = []
        reflection_ok = _invariant(patch, reflect, "reflection", witnesses)
        rotation_ok = _invariant(patch, rotate, "rotation", witnesses)
        return SymmetryReport(reflection_ok, rotation_ok, witnesses[:MAX_WITNESSES])


def _key(p: Point) -> Point:
    return (round(p[0], AUDIT_DECIMALS) + 0.0, round(p[1], AUDIT_DECIMALS) + 0.0)


def _invariant(patch: LatticePatch, transform: Callable[[Point], Point], name: str, witnesses: List[str]) -> bool:
    points = [tuple(map(float, p)) for p in patch.points]
    vertices: Set[Point] = {_key(p) for p in points}
    edges: Set[FrozenSet[Point]] = {frozenset((_key(points[u]), _key(points[v]))) for u, v in patch.edges}

    ok = True
    for p in points:
        image = _key(transform(p))
        if image not in vertices:
            ok = False
            witnesses.append(f"{name}: vertex {_key(p)} maps to {image}, not a vertex")
            break
    for u, v in patch.edges:
        image = frozenset((_key(transform(points[u])), _key(transform(points[v]))))
        if image not in edges:
            ok = False
            witnesses.append(f"{name}: edge {_key(points[u])}-{_key(points[v])} has no image edge")
            break
    return ok
