import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from src.coloring.models import Color
from src.errors import ValidationError
from src.kernels.models import Kernel
from src.lattice.models import Lattice
from src.percolation.models import EventKind, Quad, SidePair
from src.sampler.models import SamplerMethod
from src.sampler.vertex import DEFAULT_MEMORY_CAP_BYTES

MIN_REPLICATES = 100
TOL = 1e-12


@dataclass(frozen=True)
class EventSpec:
    """
    Event evaluated at scale s, centred at the origin:
    - crossing / nodal: the rho s x s rectangle, sides joined per side_pair
      (nodal uses two bands separated by gap * s);
    - circuit: annulus between B_s and B_{outer_ratio s};
    - h: H_s(alpha, beta) in B_{s/2}; x: X_s(alpha) in B_{s/2};
    - onearm: arm from the boundary of B_inner to the boundary of B_s.
    """

    kind: EventKind
    color: Color = Color.BLACK
    rho: float = 1.0
    side_pair: SidePair = SidePair.LEFT_RIGHT
    outer_ratio: float = 2.0
    alpha: float = 0.0
    beta: float = 0.0
    inner: float = 1.0
    gap: float = 0.1

    @property
    def increasing(self) -> bool:
        """Black-increasing (true for black events other than the nodal crossing)."""
        return self.kind != EventKind.NODAL and self.color == Color.BLACK

    def quad(self, s: float) -> Quad:
        w = 0.5 * self.rho * s
        return Quad(-w, w, -0.5 * s, 0.5 * s, self.side_pair)

    def half_extent(self, s: float) -> Tuple[float, float]:
        """Half width and half height of the region the event looks at."""
        if self.kind in (EventKind.CROSSING, EventKind.NODAL):
            return 0.5 * self.rho * s, 0.5 * s
        if self.kind == EventKind.CIRCUIT:
            return self.outer_ratio * s, self.outer_ratio * s
        if self.kind in (EventKind.H, EventKind.X):
            return 0.5 * s, 0.5 * s
        return s, s

    def describe(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"event": self.kind.value, "color": self.color.value}
        if self.kind in (EventKind.CROSSING, EventKind.NODAL):
            row.update(rho=self.rho, side_pair=self.side_pair.value)
        if self.kind == EventKind.NODAL:
            row["gap"] = self.gap
        if self.kind == EventKind.CIRCUIT:
            row["outer_ratio"] = self.outer_ratio
        if self.kind in (EventKind.H, EventKind.X):
            row["alpha"] = self.alpha
        if self.kind == EventKind.H:
            row["beta"] = self.beta
        if self.kind == EventKind.ONE_ARM:
            row["inner"] = self.inner
        return row


@dataclass(frozen=True)
class Experiment:
    kernel: Kernel
    lattice: Lattice
    event: EventSpec
    scales: Tuple[float, ...]
    replicates: int = 4000
    master_seed: int = 0
    method: SamplerMethod = SamplerMethod.CIRCULANT
    workers: int = 1
    confidence: float = 0.95
    memory_cap_bytes: float = DEFAULT_MEMORY_CAP_BYTES

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        if self.replicates < MIN_REPLICATES:
            raise ValidationError(f"replicates must be >= {MIN_REPLICATES}, got {self.replicates}")
        if not self.scales:
            raise ValidationError("scale grid is empty")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValidationError(f"scale grid must be strictly increasing, got {list(self.scales)}")
        if not 0 < self.confidence < 1:
            raise ValidationError(f"confidence must lie in (0, 1), got {self.confidence}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")


@dataclass
class EstimateRow:
    params: Dict[str, Any]
    successes: int
    replicates: int
    wilson_lo: float
    wilson_hi: float
    wall_time: float = 0.0

    def __post_init__(self):
        if not 0 <= self.successes <= self.replicates:
            raise ValidationError(f"successes {self.successes} outside [0, {self.replicates}]")
        p = self.p_hat
        if not (0.0 <= self.wilson_lo <= p + TOL and p - TOL <= self.wilson_hi <= 1.0):
            raise ValidationError(
                f"interval [{self.wilson_lo}, {self.wilson_hi}] does not bracket p_hat={p}"
            )

    @property
    def p_hat(self) -> float:
        return self.successes / self.replicates

    def as_dict(self) -> Dict[str, Any]:
        return {
            **self.params,
            "p_hat": self.p_hat,
            "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "successes": self.successes,
            "replicates": self.replicates,
            "wall_time": self.wall_time,
        }


@dataclass
class EstimateTable:
    rows: List[EstimateRow] = field(default_factory=list)
    confidence: float = 0.95

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> List[Any]:
        if name == "p_hat":
            return [row.p_hat for row in self.rows]
        if name in ("wilson_lo", "wilson_hi", "successes", "replicates", "wall_time"):
            return [getattr(row, name) for row in self.rows]
        return [row.params[name] for row in self.rows]

    def to_frame(self, extra: Optional[Dict[str, Any]] = None) -> pd.DataFrame:
        frame = pd.DataFrame([row.as_dict() for row in self.rows])
        for key, value in (extra or {}).items():
            frame[key] = value
        return frame

    def to_csv(self, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None, include_time: bool = True):
        frame = self.to_frame(extra)
        if not include_time and "wall_time" in frame:
            frame = frame.drop(columns=["wall_time"])
        frame.to_csv(path, index=False)

    def to_json(self, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None):
        payload = {
            "confidence": self.confidence,
            **(extra or {}),
            "rows": [row.as_dict() for row in self.rows],
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True))

    @classmethod
    def from_rows(cls, rows: Sequence[EstimateRow], confidence: float = 0.95) -> "EstimateTable":
        return cls(list(rows), confidence)


@dataclass(frozen=True)
class FkgResult:
    """Estimates of P[A], P[B], P[A and B] with the delta-method standard error of the covariance."""

    p_a: float
    p_b: float
    p_ab: float
    std_error: float
    replicates: int

    @property
    def product(self) -> float:
        return self.p_a * self.p_b

    @property
    def difference(self) -> float:
        return self.p_ab - self.product

    @property
    def margin(self) -> float:
        """Difference in standard errors."""
        if self.std_error == 0:
            if self.difference == 0:
                return 0.0
            return float("inf") if self.difference > 0 else float("-inf")
        return self.difference / self.std_error


@dataclass(frozen=True)
class MultiCrossingResult:
    """Black crossings of one family of rectangles together with white crossings of another."""

    p_joint: float
    p_black: float
    p_white: float
    std_error: float
    replicates: int
    slack: float = 0.0

    @property
    def difference(self) -> float:
        return self.p_joint - self.p_black * self.p_white

    @property
    def holds(self) -> bool:
        return self.difference + 3.0 * self.std_error >= -self.slack
