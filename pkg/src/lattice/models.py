from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd
from scipy.sparse import coo_matrix, csr_matrix

from src.errors import DomainError


class LatticeFamily(str, Enum):
    FACE_CENTERED_SQUARE = "fcs"
    TRIANGULAR = "triangular"


@dataclass(frozen=True)
class Lattice:
    """
    Periodic triangulation scaled by mesh_eps.

    Vertices sit at offset + (mesh_eps / N) * (a, b) for integer (a, b):
    - FaceCenteredSquare (N = 2): corners have a, b even, face centres have
      a, b odd; corners are joined along the square grid and every vertex
      to its diagonal neighbours.
    - Triangular (N = 1): the square grid with one diagonal per face, an
      affine image of the triangular lattice.
    """

    family: LatticeFamily = LatticeFamily.FACE_CENTERED_SQUARE
    mesh_eps: float = 1.0
    offset: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.mesh_eps <= 0:
            raise DomainError(f"mesh_eps must be positive, got {self.mesh_eps}")

    @property
    def integrality_N(self) -> int:
        return 2 if self.family == LatticeFamily.FACE_CENTERED_SQUARE else 1

    @property
    def unit(self) -> float:
        """Spacing of the integer coordinate grid the vertices live on."""
        return self.mesh_eps / self.integrality_N

    @property
    def mu_T(self) -> float:
        """Longest edge length of the unscaled pattern."""
        return 1.0 if self.family == LatticeFamily.FACE_CENTERED_SQUARE else float(np.sqrt(2.0))

    @property
    def longest_edge(self) -> float:
        return self.mu_T * self.mesh_eps

    @property
    def a_T(self) -> float:
        """Vertices per unit area."""
        per_cell = 2.0 if self.family == LatticeFamily.FACE_CENTERED_SQUARE else 1.0
        return per_cell / self.mesh_eps**2

    @property
    def edge_directions(self) -> int:
        """Number of distinct edge directions (N of the mesh budget)."""
        return 4 if self.family == LatticeFamily.FACE_CENTERED_SQUARE else 3

    def edge_lines(self) -> Dict[Tuple[int, int], float]:
        """
        Edge directions (as integer vectors) with the spacing of the parallel
        lines that carry the edges of that direction.
        """
        diagonal = self.mesh_eps / float(np.sqrt(2.0))
        lines = {(1, 0): self.mesh_eps, (0, 1): self.mesh_eps, (1, 1): diagonal}
        if self.family == LatticeFamily.FACE_CENTERED_SQUARE:
            lines[(1, -1)] = diagonal
        return lines

    def scaled(self, mesh_eps: float) -> "Lattice":
        return Lattice(self.family, mesh_eps, self.offset)


@dataclass(frozen=True)
class Box:
    center: Tuple[float, float] = (0.0, 0.0)
    half_side: float = 1.0

    def __post_init__(self):
        if self.half_side <= 0:
            raise DomainError(f"Box half_side must be positive, got {self.half_side}")

    @property
    def bounds(self) -> Tuple[float, float, float, float]:
        cx, cy = self.center
        s = self.half_side
        return cx - s, cx + s, cy - s, cy + s


@dataclass
class LatticePatch:
    """Vertices and edges of a lattice inside a closed rectangle."""

    lattice: Lattice
    bounds: Tuple[float, float, float, float]
    coords: np.ndarray  # integer (a, b), shape (V, 2)
    edges: np.ndarray  # vertex index pairs (i < j), shape (E, 2)
    edge_steps: np.ndarray  # (da, db) of each edge in integer units, shape (E, 2)
    _adjacency: csr_matrix = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return self.coords.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def points(self) -> np.ndarray:
        ox, oy = self.lattice.offset
        return self.coords * self.lattice.unit + np.array([ox, oy])

    @property
    def adjacency(self) -> csr_matrix:
        if self._adjacency is None:
            n = self.n_vertices
            u, v = self.edges[:, 0], self.edges[:, 1]
            data = np.ones(2 * self.n_edges, dtype=np.int8)
            self._adjacency = coo_matrix(
                (data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n)
            ).tocsr()
        return self._adjacency

    def edge_lengths(self) -> np.ndarray:
        return np.hypot(self.edge_steps[:, 0], self.edge_steps[:, 1]) * self.lattice.unit

    def neighbors(self, index: int) -> List[int]:
        row = self.adjacency.getrow(index)
        return sorted(int(j) for j in row.indices)

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        points = self.points
        for i in range(self.n_vertices):
            graph.add_node(i, pos=(float(points[i, 0]), float(points[i, 1])))
        graph.add_edges_from((int(u), int(v)) for u, v in self.edges)
        return graph

    def to_edge_frame(self) -> pd.DataFrame:
        points = self.points
        u, v = self.edges[:, 0], self.edges[:, 1]
        return pd.DataFrame(
            {
                "u": u,
                "v": v,
                "x_u": points[u, 0],
                "y_u": points[u, 1],
                "x_v": points[v, 0],
                "y_v": points[v, 1],
            }
        )

    def export_edges_csv(self, path: Union[str, Path]):
        self.to_edge_frame().to_csv(path, index=False)


@dataclass
class SymmetryReport:
    reflection_ok: bool
    rotation_ok: bool
    witnesses: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.reflection_ok and self.rotation_ok
