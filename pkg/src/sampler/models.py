from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd


class SamplerMethod(str, Enum):
    CHOLESKY = "cholesky"
    CIRCULANT = "circulant"
    SERIES = "series"
    KOSTLAN = "kostlan"
    WAVE = "wave"


@dataclass(frozen=True)
class TruncationBudget:
    """Degree N of the truncated Bargmann-Fock series on the disc of radius R.

    Invariant: exp(16 R^2) / (eps^2 4^N) <= delta.
    """

    R: float
    eps: float
    delta: float
    N: int

    @property
    def log_tail_bound(self) -> float:
        return 16.0 * self.R**2 - 2.0 * np.log(self.eps) - self.N * np.log(4.0)

    @property
    def n_coefficients(self) -> int:
        return (self.N + 1) * (self.N + 2) // 2


@dataclass
class FieldSample:
    points: np.ndarray
    values: np.ndarray
    seed: int
    method: SamplerMethod
    # Series degree N, wave count M or Kostlan degree d
    parameter: Optional[int] = None
    diagnostics: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.shape[0] != self.points.shape[0]:
            raise ValueError(
                f"FieldSample needs one value per point, got {self.values.shape[0]} values "
                f"for {self.points.shape[0]} points"
            )

    def __len__(self) -> int:
        return self.values.shape[0]

    def negated(self) -> "FieldSample":
        return FieldSample(self.points, -self.values, self.seed, self.method, self.parameter, dict(self.diagnostics))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"x": self.points[:, 0], "y": self.points[:, 1], "value": self.values})

    def to_csv(self, path: Union[str, Path]):
        self.to_frame().to_csv(path, index=False)
