from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

from src.errors import DomainError


class SidePair(str, Enum):
    LEFT_RIGHT = "lr"
    TOP_BOTTOM = "tb"


class EventKind(str, Enum):
    CROSSING = "crossing"
    CIRCUIT = "circuit"
    H = "h"
    X = "x"
    ONE_ARM = "onearm"
    NODAL = "nodal"


@dataclass(frozen=True)
class Quad:
    """Axis-aligned rectangle [x0, x1] x [y0, y1] with the pair of sides to be joined."""

    x0: float
    x1: float
    y0: float
    y1: float
    side_pair: SidePair = SidePair.LEFT_RIGHT

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise DomainError(
                f"Quad needs x0 < x1 and y0 < y1, got [{self.x0}, {self.x1}] x [{self.y0}, {self.y1}]"
            )

    @classmethod
    def rectangle(cls, rho: float, s: float, side_pair: SidePair = SidePair.LEFT_RIGHT) -> "Quad":
        """[0, rho s] x [0, s], the rectangle of f_s(rho)."""
        return cls(0.0, rho * s, 0.0, s, side_pair)

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    def shifted(self, dx: float, dy: float) -> "Quad":
        return Quad(self.x0 + dx, self.x1 + dx, self.y0 + dy, self.y1 + dy, self.side_pair)


@dataclass
class PercResult:
    event: EventKind
    occurred: bool
    witness: Optional[List[int]] = None

    def __bool__(self) -> bool:
        return self.occurred
