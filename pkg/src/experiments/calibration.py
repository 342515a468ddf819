import json
import logging
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional, Union

from dateutil.parser import isoparse

from src.errors import DomainError, ValidationError
from src.experiments.models import EstimateTable

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MIN_POSITIVITY = 0.4


@dataclass(frozen=True)
class CalibrationEntry:
    value: float
    provenance: str
    timestamp: datetime

    def to_json(self) -> Dict[str, object]:
        row = asdict(self)
        row["timestamp"] = self.timestamp.isoformat()
        return row


class CalibrationStore:
    """
    Versioned key-value file of calibrated constants (lambda, mu, C1, beta, ...).

    Layout: {"schema_version": 1, "entries": {key: {value, provenance, timestamp}}}.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self.entries: Dict[str, CalibrationEntry] = {}
        if self.path.exists():
            self._load()

    def _load(self):
        try:
            payload = json.loads(self.path.read_text())
        except json.JSONDecodeError as e:
            raise ValidationError(f"calibration file {self.path} is not valid JSON: {e}") from e
        version = payload.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValidationError(f"calibration file {self.path} has schema_version {version}, expected {SCHEMA_VERSION}")
        for key, row in payload.get("entries", {}).items():
            try:
                self.entries[key] = CalibrationEntry(float(row["value"]), str(row["provenance"]), isoparse(row["timestamp"]))
            except (KeyError, TypeError, ValueError) as e:
                raise ValidationError(f"calibration entry '{key}' is malformed: {e}") from e

    def get(self, key: str, default: Optional[float] = None) -> Optional[float]:
        entry = self.entries.get(key)
        return entry.value if entry is not None else default

    def put(self, key: str, value: float, provenance: str, timestamp: Optional[datetime] = None):
        self.entries[key] = CalibrationEntry(float(value), provenance, timestamp or datetime.now(timezone.utc))
        logger.info("Calibrated %s = %.6g (%s)", key, value, provenance)

    def save(self):
        payload = {
            "schema_version": SCHEMA_VERSION,
            "entries": {key: self.entries[key].to_json() for key in sorted(self.entries)},
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(payload, indent=2))

    def __contains__(self, key: str) -> bool:
        return key in self.entries


@dataclass(frozen=True)
class AlphaLowerCalibration:
    """b = lambda* / 4 and a = p_hat(lambda*)^2 from the small-box positivity table."""

    lambda_star: float
    p_hat: float
    alpha_lower: float
    a: float


def calibrate_alpha_lower(table: EstimateTable, min_probability: float = MIN_POSITIVITY) -> AlphaLowerCalibration:
    """Largest lambda whose Wilson lower bound reaches min_probability."""
    passing = [row for row in table.rows if row.wilson_lo >= min_probability]
    if not passing:
        raise DomainError(f"no lambda in the table has P[f > 0 on B_lambda] >= {min_probability} at the Wilson lower bound")
    best = max(passing, key=lambda row: row.params["lambda"])
    lam = float(best.params["lambda"])
    return AlphaLowerCalibration(lam, best.p_hat, lam / 4.0, best.p_hat**2)
