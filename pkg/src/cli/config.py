import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Union

from src.errors import ValidationError
from src.kernels.core import bargmann_fock, bessel_wave, kostlan, load_tabulated
from src.kernels.models import Kernel, KernelFamily
from src.lattice.models import Lattice, LatticeFamily
from src.sampler.models import SamplerMethod

GIB = 2**30
DEFAULT_EPS = 0.5
DEFAULT_MEMORY_CAP_GIB = 8.0


def _float_list(text: Union[str, List[float]]) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).replace(",", " ").split()]


# section -> key -> parser
SCHEMA: Dict[str, Dict[str, Callable[[Any], Any]]] = {
    "kernel": {"family": str, "degree": int, "table": str, "alpha": float, "beta": float, "log_beta": float},
    "lattice": {"family": str, "eps": float},
    "experiment": {
        "event": str,
        "scales": _float_list,
        "rho": float,
        "side_pair": str,
        "color": str,
        "outer_ratio": float,
        "inner": float,
        "gap": float,
        "lambdas": _float_list,
        "subsample_k": int,
        "reps": int,
        "seed": int,
        "workers": int,
        "method": str,
        "confidence": float,
    },
    "output": {"path": str, "store": str},
    "budget": {"memory_cap_gib": float},
}


@dataclass
class Config:
    """Resolved configuration: INI file values overridden by command-line flags."""

    sections: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> Any:
        value = self.get(section, key)
        if value is None:
            name = section if key == "family" else f"{section}.{key}"
            raise ValidationError(f"missing required key '{name}'")
        return value

    def set(self, section: str, key: str, value: Any):
        if value is None:
            return
        _check_key(section, key)
        self.sections.setdefault(section, {})[key] = _parse(section, key, value)

    @property
    def seed(self) -> int:
        return int(self.get("experiment", "seed", 0))

    @property
    def memory_cap_bytes(self) -> float:
        return float(self.get("budget", "memory_cap_gib", DEFAULT_MEMORY_CAP_GIB)) * GIB

    def canonical(self) -> str:
        return json.dumps(self.sections, sort_keys=True, default=str)

    def digest(self, subcommand: str) -> str:
        """SHA-256 of the canonical config together with the subcommand."""
        text = json.dumps({"subcommand": subcommand, "config": json.loads(self.canonical())}, sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _check_key(section: str, key: str):
    if section not in SCHEMA:
        raise ValidationError(f"unknown config section '[{section}]'")
    if key not in SCHEMA[section]:
        raise ValidationError(f"unknown config key '{section}.{key}'")


def _parse(section: str, key: str, value: Any) -> Any:
    try:
        return SCHEMA[section][key](value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"invalid value {value!r} for config key '{section}.{key}': {e}") from e


def load_config(path: Optional[Union[str, Path]]) -> Config:
    config = Config()
    if path is None:
        return config
    parser = configparser.ConfigParser()
    try:
        with open(path, "r") as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as e:
        raise ValidationError(f"cannot read config file '{path}': {e}") from e
    for section in parser.sections():
        for key, value in parser.items(section):
            config.set(section, key, value)
    return config


# ==========================================
# Builders
# ==========================================


def build_kernel(config: Config) -> Kernel:
    family = config.require("kernel", "family")
    try:
        kind = KernelFamily(family)
    except ValueError:
        raise ValidationError(
            f"unknown kernel family '{family}' for key 'kernel', expected one of "
            f"{[k.value for k in KernelFamily]}"
        ) from None

    if kind == KernelFamily.BARGMANN_FOCK:
        kernel = bargmann_fock()
    elif kind == KernelFamily.BESSEL_WAVE:
        kernel = bessel_wave()
    elif kind == KernelFamily.KOSTLAN:
        kernel = kostlan(config.require("kernel", "degree"))
    else:
        kernel = load_tabulated(config.require("kernel", "table"))

    alpha = config.get("kernel", "alpha")
    if alpha is not None:
        beta, log_beta = config.get("kernel", "beta"), config.get("kernel", "log_beta")
        if beta is None and log_beta is None:
            raise ValidationError("missing required key 'kernel.beta' (or 'kernel.log_beta') for decay alpha")
        kernel = kernel.with_decay(alpha, beta=beta, log_beta=log_beta)
    return kernel


def build_lattice(config: Config) -> Lattice:
    family = config.get("lattice", "family", LatticeFamily.FACE_CENTERED_SQUARE.value)
    try:
        kind = LatticeFamily(family)
    except ValueError:
        raise ValidationError(f"unknown lattice family '{family}' for key 'lattice.family'") from None
    eps = config.get("lattice", "eps", DEFAULT_EPS)
    if eps <= 0:
        raise ValidationError(f"config key 'lattice.eps' must be positive, got {eps}")
    return Lattice(kind, eps)


def build_method(config: Config, kernel: Kernel) -> SamplerMethod:
    default = SamplerMethod.CIRCULANT if kernel.is_stationary else SamplerMethod.KOSTLAN
    method = config.get("experiment", "method")
    if method is None:
        return default
    try:
        return SamplerMethod(method)
    except ValueError:
        raise ValidationError(f"unknown sampler method '{method}' for key 'experiment.method'") from None
