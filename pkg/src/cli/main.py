import argparse
import itertools
import json
import logging
import sys
import time
from datetime import datetime, timezone
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import mpmath
import pandas as pd

from src.cli.config import Config, build_kernel, build_lattice, build_method, load_config
from src.coloring.models import Color
from src.constants.models import DEFAULT_DECAY_ALPHA, DecorrBudget
from src.constants.pipeline import (
    DEFAULT_A_T,
    DEFAULT_ALPHA_LOWER,
    nodal_exponent_margin,
    pipeline,
    t_nu_bound,
)
from src.coupling.core import EXACT_DIMENSION_LIMIT, bakounine_bound, tv_exact, tv_monte_carlo
from src.coupling.models import BlockGaussian
from src.errors import LabError, ValidationError
from src.experiments.calibration import CalibrationStore, calibrate_alpha_lower
from src.experiments.models import EstimateTable, EventSpec, Experiment
from src.experiments.runner import SMALL_BOX_LATTICE, run, small_box_positivity
from src.experiments.stats import fit_one_arm, rsw_floor_check
from src.kernels.core import bargmann_fock_log_beta
from src.lattice.builder import PatchBuilder
from src.lattice.models import Box
from src.nodal.core import DEFAULT_SUBSAMPLE_K, double_crossing_census
from src.percolation.models import EventKind, SidePair
from src.sampler.models import FieldSample
from src.sampler.vertex import PointFieldSampler

logger = logging.getLogger("src.cli")

SUBCOMMANDS = ("sample", "cross", "circuit", "onearm", "rsw", "nodal-census", "tv", "constants", "calibrate")
VERSIONED_PACKAGES = ("numpy", "scipy", "networkx", "pandas", "psutil", "mpmath")
DEFAULT_LAMBDAS = (0.05, 0.1, 0.25, 0.5, 1.0)
DEFAULT_STORE = "calibration.json"

# flag destination -> (section, key)
FLAG_KEYS = {
    "kernel": ("kernel", "family"),
    "degree": ("kernel", "degree"),
    "table": ("kernel", "table"),
    "lattice": ("lattice", "family"),
    "eps": ("lattice", "eps"),
    "s": ("experiment", "scales"),
    "rho": ("experiment", "rho"),
    "side_pair": ("experiment", "side_pair"),
    "color": ("experiment", "color"),
    "outer_ratio": ("experiment", "outer_ratio"),
    "inner": ("experiment", "inner"),
    "lambdas": ("experiment", "lambdas"),
    "k": ("experiment", "subsample_k"),
    "reps": ("experiment", "reps"),
    "seed": ("experiment", "seed"),
    "workers": ("experiment", "workers"),
    "method": ("experiment", "method"),
    "confidence": ("experiment", "confidence"),
    "out": ("output", "path"),
    "store": ("output", "store"),
    "memory_cap_gib": ("budget", "memory_cap_gib"),
}


class LabArgumentParser(argparse.ArgumentParser):
    """Raises instead of exiting so bad flags map to the validation exit code."""

    def error(self, message: str):
        raise ValidationError(message)


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [kernel] [lattice] [experiment] [output] [budget]")
    common.add_argument("--kernel", help="bf | bessel | kostlan | tabulated")
    common.add_argument("--degree", type=int)
    common.add_argument("--table", help="radius,value CSV for tabulated kernels")
    common.add_argument("--lattice", help="fcs | triangular")
    common.add_argument("--eps", type=float)
    common.add_argument("--s", nargs="+", type=float, help="scale grid")
    common.add_argument("--reps", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--method")
    common.add_argument("--confidence", type=float)
    common.add_argument("--memory-cap-gib", dest="memory_cap_gib", type=float)
    common.add_argument("--out", help="output CSV path")
    common.add_argument("--verbose", action="store_true")
    return common


def build_parser() -> LabArgumentParser:
    parser = LabArgumentParser(prog="python -m src.cli", description="Sign percolation of Gaussian fields")
    sub = parser.add_subparsers(dest="subcommand", parser_class=LabArgumentParser)
    sub.required = True
    common = _common_parser()

    sub.add_parser("sample", parents=[common], help="one field sample on the vertices of B_s")
    for name in ("cross", "rsw"):
        p = sub.add_parser(name, parents=[common], help="rectangle crossing probabilities over a scale grid")
        p.add_argument("--rho", type=float)
        p.add_argument("--side-pair", dest="side_pair")
        p.add_argument("--color")
    p = sub.add_parser("circuit", parents=[common], help="annulus circuit probabilities")
    p.add_argument("--outer-ratio", dest="outer_ratio", type=float)
    p.add_argument("--color")
    p = sub.add_parser("onearm", parents=[common], help="one-arm probabilities pi(s, t); --s is the grid of t")
    p.add_argument("--inner", type=float)
    p.add_argument("--color")
    p = sub.add_parser("nodal-census", parents=[common], help="edges crossed at least twice by the nodal set")
    p.add_argument("--k", type=int)
    p = sub.add_parser("tv", parents=[common], help="total variation between correlated and independent signs")
    p.add_argument("--m", nargs="+", type=int, default=[1])
    p.add_argument("--n", nargs="+", type=int, default=[1])
    p.add_argument("--eta", nargs="+", type=float, default=[0.05, 0.1, 0.3, 0.6])
    p.add_argument("--samples", type=int, default=200_000)
    p = sub.add_parser("constants", parents=[common], help="quantitative RSW constants over a parameter grid")
    p.add_argument("--c0", nargs="+", type=float, default=[0.5])
    p.add_argument("--nu", nargs="+", type=float, default=[0.25])
    p.add_argument("--alpha", nargs="+", type=float, default=[DEFAULT_DECAY_ALPHA])
    p.add_argument("--theta", nargs="+", type=float, default=[1.0])
    p.add_argument("--a-t", dest="a_t", type=float, default=DEFAULT_A_T)
    p.add_argument("--alpha-lower", dest="alpha_lower", type=float)
    p.add_argument("--store")
    p = sub.add_parser("calibrate", parents=[common], help="small-box positivity and the alpha lower bound")
    p.add_argument("--lambdas", nargs="+", type=float)
    p.add_argument("--store")
    return parser


def resolve_config(args: argparse.Namespace) -> Config:
    config = load_config(args.config)
    for dest, (section, key) in FLAG_KEYS.items():
        config.set(section, key, getattr(args, dest, None))
    return config


def _enum(cls, value: str, key: str):
    try:
        return cls(value)
    except ValueError:
        raise ValidationError(f"invalid value '{value}' for config key '{key}'") from None


def _scales(config: Config, default: List[float]) -> List[float]:
    return list(config.get("experiment", "scales", default))


def _experiment(config: Config, event: EventSpec, scales: List[float], reps: int) -> Experiment:
    kernel = build_kernel(config)
    return Experiment(
        kernel=kernel,
        lattice=build_lattice(config),
        event=event,
        scales=tuple(scales),
        replicates=int(config.get("experiment", "reps", reps)),
        master_seed=config.seed,
        method=build_method(config, kernel),
        workers=int(config.get("experiment", "workers", 1)),
        confidence=float(config.get("experiment", "confidence", 0.95)),
        memory_cap_bytes=config.memory_cap_bytes,
    )


def _color(config: Config) -> Color:
    return _enum(Color, config.get("experiment", "color", Color.BLACK.value), "experiment.color")


# ==========================================
# Subcommands
# ==========================================
# Each returns (table, metadata): the table is written as CSV, the metadata
# lands in the .meta.json file next to it.


def cmd_sample(config: Config, args) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    kernel = build_kernel(config)
    lattice = build_lattice(config)
    method = build_method(config, kernel)
    s = _scales(config, [4.0])[0]
    patch = PatchBuilder(lattice).enumerate(Box((0.0, 0.0), s))
    sampler = PointFieldSampler(
        kernel, patch.points, method, grid_spacing=lattice.unit, memory_cap_bytes=config.memory_cap_bytes
    )
    sample = FieldSample(patch.points, sampler.draw(config.seed), config.seed, method, diagnostics=sampler.diagnostics)
    return sample.to_frame(), {"vertices": patch.n_vertices, "diagnostics": sample.diagnostics}


def cmd_cross(config: Config, args) -> Tuple[EstimateTable, Dict[str, Any]]:
    event = EventSpec(
        EventKind.CROSSING,
        color=_color(config),
        rho=float(config.get("experiment", "rho", 1.0)),
        side_pair=_enum(SidePair, config.get("experiment", "side_pair", "lr"), "experiment.side_pair"),
    )
    return run(_experiment(config, event, _scales(config, [4.0, 8.0, 16.0]), 4000)), {}


def cmd_rsw(config: Config, args) -> Tuple[EstimateTable, Dict[str, Any]]:
    event = EventSpec(
        EventKind.CROSSING,
        color=_color(config),
        rho=float(config.get("experiment", "rho", 2.0)),
        side_pair=_enum(SidePair, config.get("experiment", "side_pair", "lr"), "experiment.side_pair"),
    )
    table = run(_experiment(config, event, _scales(config, [4.0, 8.0, 16.0, 32.0]), 4000))
    check = rsw_floor_check(table.column("p_hat"), table.column("wilson_lo"))
    logger.info(
        "RSW floor: min wilson_lo %.4f (floor %.2f), no collapse: %s",
        check.min_wilson_lo,
        check.floor,
        check.no_collapse,
    )
    return table, {
        "min_wilson_lo": check.min_wilson_lo,
        "above_floor": check.above_floor,
        "no_collapse": check.no_collapse,
    }


def cmd_circuit(config: Config, args) -> Tuple[EstimateTable, Dict[str, Any]]:
    event = EventSpec(
        EventKind.CIRCUIT,
        color=_color(config),
        outer_ratio=float(config.get("experiment", "outer_ratio", 2.0)),
    )
    return run(_experiment(config, event, _scales(config, [4.0, 8.0]), 4000)), {}


def cmd_onearm(config: Config, args) -> Tuple[EstimateTable, Dict[str, Any]]:
    inner = float(config.get("experiment", "inner", 2.0))
    event = EventSpec(EventKind.ONE_ARM, color=_color(config), inner=inner)
    table = run(_experiment(config, event, _scales(config, [4.0, 8.0, 16.0, 32.0]), 4000))
    ratios = [inner / t for t in table.column("s")]
    p_hat = table.column("p_hat")
    if sum(p > 0 for p in p_hat) < 4:
        logger.warning("Fewer than 4 positive one-arm estimates: exponent not fitted")
        return table, {}
    fit = fit_one_arm(ratios, p_hat, table.column("replicates"), seed=config.seed)
    logger.info("eta_hat = %.4f, CI [%.4f, %.4f]", fit.eta_hat, *fit.ci)
    return table, {"eta_hat": fit.eta_hat, "eta_ci": list(fit.ci), "excluded_cells": fit.excluded}


def cmd_nodal_census(config: Config, args) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    kernel = build_kernel(config)
    lattice = build_lattice(config)
    s = _scales(config, [5.0])[0]
    report = double_crossing_census(
        kernel,
        lattice,
        Box((0.0, 0.0), s),
        subsample_k=int(config.get("experiment", "subsample_k", DEFAULT_SUBSAMPLE_K)),
        seed=config.seed,
        replicates=int(config.get("experiment", "reps", 100)),
        confidence=float(config.get("experiment", "confidence", 0.95)),
        memory_cap_bytes=config.memory_cap_bytes,
    )
    return pd.DataFrame([report.as_row()]), {"note": report.note}


def cmd_tv(config: Config, args) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    rows = []
    for m, n, eta in itertools.product(args.m, args.n, args.eta):
        bg = BlockGaussian.equicorrelated(m, n, eta)
        if m + n <= EXACT_DIMENSION_LIMIT:
            exact = tv_exact(bg, seed=config.seed)
            tv, error, mode = exact.estimate, exact.error_bound, "exact"
        else:
            estimate = tv_monte_carlo(bg, args.samples, config.seed)
            tv, error, mode = estimate.estimate, estimate.std_error, "monte_carlo"
        bound = bakounine_bound(m, n, eta)
        # error is a rigorous bound for exact rows and a standard error otherwise
        rows.append(
            {
                "m": m,
                "n": n,
                "eta": eta,
                "tv": tv,
                "error": error,
                "mode": mode,
                "bound": bound,
                "margin": bound - tv,
            }
        )
    return pd.DataFrame(rows), {}


def cmd_constants(config: Config, args) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    alpha_lower = args.alpha_lower
    source = "flag"
    if alpha_lower is None and args.store and Path(args.store).exists():
        alpha_lower = CalibrationStore(args.store).get("alpha_lower")
        source = f"store {args.store}"
    if alpha_lower is None:
        alpha_lower, source = DEFAULT_ALPHA_LOWER, "default"
    for alpha, theta in itertools.product(args.alpha, args.theta):
        if not 0 < theta < alpha - 16:
            raise ValidationError(f"theta must lie in (0, alpha - 16), got theta={theta} alpha={alpha}")
    rows = []
    for c0, nu, alpha, theta in itertools.product(args.c0, args.nu, args.alpha, args.theta):
        budget = DecorrBudget(a_T=args.a_t, alpha=alpha, log_beta=float(bargmann_fock_log_beta(alpha)))
        row: Dict[str, Any] = {"c0": c0, "nu": nu, "alpha": alpha, "theta": theta, "a_T": args.a_t}
        row.update(pipeline(c0, nu, budget=budget, alpha_lower=alpha_lower).as_row())
        t_nu = t_nu_bound(args.a_t, alpha, theta, nu, c0=c0, alpha_lower=alpha_lower)
        row["log_t_nu_bound"] = mpmath.nstr(t_nu.log_bound, 17)
        row["nodal_exponent_margin"] = nodal_exponent_margin(alpha, theta, nu)
        rows.append(row)
    return pd.DataFrame(rows), {"alpha_lower_source": source}


def cmd_calibrate(config: Config, args) -> Tuple[EstimateTable, Dict[str, Any]]:
    kernel = build_kernel(config)
    lattice = build_lattice(config) if "lattice" in config.sections else SMALL_BOX_LATTICE
    reps = int(config.get("experiment", "reps", 1000))
    table = small_box_positivity(
        kernel,
        config.get("experiment", "lambdas", list(DEFAULT_LAMBDAS)),
        reps,
        seed=config.seed,
        lattice=lattice,
        method=build_method(config, kernel),
        confidence=float(config.get("experiment", "confidence", 0.95)),
        memory_cap_bytes=config.memory_cap_bytes,
    )
    result = calibrate_alpha_lower(table)
    store = CalibrationStore(config.get("output", "store", DEFAULT_STORE))
    provenance = f"small_box_positivity kernel={kernel.describe()} eps={lattice.mesh_eps:g} reps={reps} seed={config.seed}"
    store.put("lambda_small_box", result.lambda_star, provenance)
    store.put("alpha_lower", result.alpha_lower, provenance)
    store.put("alpha_a", result.a, provenance)
    store.save()
    return table, {"lambda_star": result.lambda_star, "alpha_lower": result.alpha_lower, "a": result.a}


COMMANDS = {
    "sample": cmd_sample,
    "cross": cmd_cross,
    "circuit": cmd_circuit,
    "onearm": cmd_onearm,
    "rsw": cmd_rsw,
    "nodal-census": cmd_nodal_census,
    "tv": cmd_tv,
    "constants": cmd_constants,
    "calibrate": cmd_calibrate,
}


# ==========================================
# Entry point
# ==========================================


def _command_flags(args: argparse.Namespace) -> Dict[str, Any]:
    """Subcommand flags that do not live in the config sections; they enter the config hash."""
    skip = set(FLAG_KEYS) | {"config", "verbose", "subcommand"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def write_outputs(result, out: Path, config_hash: str, seed: int, meta: Dict[str, Any]):
    frame = result.to_frame() if isinstance(result, EstimateTable) else result
    frame = frame.drop(columns=["wall_time"], errors="ignore")
    frame["config_hash"] = config_hash
    frame["seed"] = seed
    out.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out, index=False)
    out.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str))


def execute(args: argparse.Namespace) -> Path:
    config = resolve_config(args)
    flags = _command_flags(args)
    config_hash = config.digest(args.subcommand + json.dumps(flags, sort_keys=True))
    versions = package_versions()
    logger.info("Run %s: seed=%d config_hash=%s versions=%s", args.subcommand, config.seed, config_hash, versions)

    start = time.perf_counter()
    result, extra = COMMANDS[args.subcommand](config, args)
    runtime = time.perf_counter() - start

    out = Path(config.get("output", "path", f"{args.subcommand}.csv"))
    meta = {
        "subcommand": args.subcommand,
        "seed": config.seed,
        "config_hash": config_hash,
        "config": config.sections,
        "flags": flags,
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "runtime_seconds": runtime,
        "versions": versions,
        **extra,
    }
    write_outputs(result, out, config_hash, config.seed, meta)
    logger.info("Wrote %s (%.1fs)", out, runtime)
    return out


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = build_parser().parse_args(argv)
    except ValidationError as e:
        logging.basicConfig(level=logging.INFO)
        logger.error("%s", e)
        return 1

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        execute(args)
    except ValidationError as e:
        logger.error("Invalid configuration: %s", e)
        return 1
    except (LabError, MemoryError, OSError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return 2
    return 0
