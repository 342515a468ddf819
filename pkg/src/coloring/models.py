from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Union

import numpy as np

from src.lattice.models import LatticePatch


class Color(str, Enum):
    BLACK = "black"
    WHITE = "white"

    @property
    def opposite(self) -> "Color":
        return Color.WHITE if self == Color.BLACK else Color.BLACK


@dataclass(frozen=True)
class Coloring:
    """Sign colouring of the vertices of a patch: black iff the field is positive."""

    patch: LatticePatch
    black: np.ndarray  # bool, one entry per vertex

    def __post_init__(self):
        if self.black.shape != (self.patch.n_vertices,):
            raise ValueError(
                f"Coloring needs {self.patch.n_vertices} vertex bits, got shape {self.black.shape}"
            )

    @classmethod
    def from_values(cls, patch: LatticePatch, values: np.ndarray) -> "Coloring":
        # exact zeros are white
        return cls(patch, np.asarray(values) > 0)

    def mask(self, color: Color) -> np.ndarray:
        return self.black if color == Color.BLACK else ~self.black

    def black_edges(self) -> np.ndarray:
        """Edges whose two endpoints are black."""
        u, v = self.patch.edges[:, 0], self.patch.edges[:, 1]
        return self.black[u] & self.black[v]

    def to_pbm(self, path: Union[str, Path]):
        """Plain PBM of the integer grid: 1 for black vertices, 0 elsewhere, top row first."""
        coords = self.patch.coords
        if coords.shape[0] == 0:
            raise ValueError("Cannot dump an empty colouring")
        lo = coords.min(axis=0)
        width, height = coords.max(axis=0) - lo + 1
        bitmap = np.zeros((height, width), dtype=np.uint8)
        cols = coords[:, 0] - lo[0]
        rows = height - 1 - (coords[:, 1] - lo[1])
        bitmap[rows, cols] = self.black.astype(np.uint8)

        with open(path, "w") as f:
            f.write(f"P1\n{width} {height}\n")
            for row in bitmap:
                f.write(" ".join(str(int(bit)) for bit in row) + "\n")
