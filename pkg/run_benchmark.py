import math
import os
import time

import numpy as np
import pandas as pd
import psutil

from src.coloring.models import Color, Coloring
from src.constants.pipeline import pipeline
from src.coupling.core import bakounine_bound, tv_exact
from src.coupling.models import BlockGaussian
from src.experiments.models import EventSpec, Experiment
from src.experiments.runner import fkg_check, run
from src.experiments.stats import fit_one_arm, paired_ratio, rsw_floor_check, wilson_interval
from src.kernels.core import bargmann_fock, bessel_wave, covariance_matrix
from src.lattice.builder import PatchBuilder
from src.lattice.models import Box, Lattice, LatticeFamily
from src.nodal.core import double_crossing_census, near_edge_critical_census, supnorm_statistic
from src.percolation.engine import crosses
from src.percolation.models import EventKind, Quad, SidePair
from src.sampler.core import (
    bf_series_design,
    cholesky_draws,
    cholesky_factor,
    choose_truncation,
    empirical_covariance,
    series_draws,
    wave_draws,
)
from src.sampler.grid import CirculantEmbedding, RegularGrid
from src.sampler.vertex import PointFieldSampler

# ==========================================
# CONFIGURATION
# ==========================================
TOTAL_ROUNDS = 1
MASTER_SEED = 7
REPLICATES = 4000
WARMUP_REPLICATES = 100  # warm-up round runs every target at this size
FIDELITY_DRAWS = 100_000
CENSUS_REPLICATES = 400
FKG_RUNS = 5

FCS = LatticeFamily.FACE_CENTERED_SQUARE


def elevate_process_priority():
    """Asks the OS to prioritise this script over background tasks."""
    try:
        p = psutil.Process(os.getpid())
        p.nice(getattr(psutil, "HIGH_PRIORITY_CLASS", -5))
        print("SUCCESS: Process priority elevated.")
    except Exception as e:
        print(f"WARNING: Could not elevate process priority: {e}")


# ==========================================
# Targets: each returns (passed, detail)
# ==========================================


def square_crossing(reps):
    table = run(
        Experiment(
            bargmann_fock(),
            Lattice(FCS, 0.5),
            EventSpec(EventKind.CROSSING),
            (4, 8, 16),
            replicates=reps,
            master_seed=MASTER_SEED,
        )
    )
    lo, hi = wilson_interval(reps // 2, reps, 0.99)
    p_hats = table.column("p_hat")
    return all(lo <= p <= hi for p in p_hats), " ".join(f"{p:.4f}" for p in p_hats)


def duality(reps):
    exceptions = 0
    for s in (4, 8):
        lattice = Lattice(FCS, 0.5)
        patch = PatchBuilder(lattice).enumerate(Box((0.0, 0.0), s / 2))
        sampler = PointFieldSampler(bargmann_fock(), patch.points, grid_spacing=lattice.unit)
        lr = Quad(-s / 2, s / 2, -s / 2, s / 2, SidePair.LEFT_RIGHT)
        tb = Quad(-s / 2, s / 2, -s / 2, s / 2, SidePair.TOP_BOTTOM)
        for r in range(reps):
            coloring = Coloring.from_values(patch, sampler.draw(MASTER_SEED, r))
            black = crosses(coloring, lr, Color.BLACK).occurred
            white = crosses(coloring, tb, Color.WHITE).occurred
            exceptions += int(black == white)
    return exceptions == 0, f"exceptions={exceptions} over {2 * reps} colourings"


def bakounine(reps):
    worst_gap, worst_arcsin = -1.0, 0.0
    for m in range(1, 8):
        for n in range(1, 9 - m):
            for eta in (0.05, 0.1, 0.3, 0.6):
                tv = tv_exact(BlockGaussian.equicorrelated(m, n, eta)).estimate
                worst_gap = max(worst_gap, tv - bakounine_bound(m, n, eta))
                if m == n == 1:
                    worst_arcsin = max(worst_arcsin, abs(tv - math.asin(eta) / math.pi))
    return worst_gap <= 0 and worst_arcsin <= 1e-3, f"max(tv - bound)={worst_gap:.3g} arcsin err={worst_arcsin:.2g}"


def constants(reps):
    row = pipeline(0.5, 0.25)
    target = -17 * math.log(2)
    err = abs(float(row.log_Q1) - target) / abs(target)
    return err <= 1e-12, f"logQ1={float(row.log_Q1):.15f} rel err={err:.2g}"


def sampler_fidelity(reps):
    draws = max(reps, 1000) if reps < REPLICATES else FIDELITY_DRAWS
    grid = RegularGrid((-0.75, -0.75), 0.5, (4, 4))
    points = grid.points()
    rng = np.random.default_rng(MASTER_SEED)
    tol = 5 / math.sqrt(draws)
    bf, wave = bargmann_fock(), bessel_wave()

    oracle = covariance_matrix(bf, points)
    errors = {"cholesky": np.abs(empirical_covariance(cholesky_draws(cholesky_factor(bf, points), rng, draws)) - oracle).max()}

    embedding = CirculantEmbedding(bf, grid)
    pairs = [embedding.draw_pair(rng) for _ in range(draws // 2)]
    values = np.array([v.ravel() for pair in pairs for v in pair])
    errors["circulant"] = np.abs(empirical_covariance(values) - oracle).max()

    budget = choose_truncation(2.0, 0.05, 0.01)
    series = series_draws(bf_series_design(points, budget.N), rng, draws)
    errors["series"] = np.abs(empirical_covariance(series) - oracle).max() - 2 * budget.eps

    waves = wave_draws(500, points, rng, draws)
    errors["wave"] = np.abs(empirical_covariance(waves) - covariance_matrix(wave, points)).max()
    return all(e <= tol for e in errors.values()), " ".join(f"{k}={v:.4f}" for k, v in errors.items()) + f" tol={tol:.4f}"


def one_arm_decay(reps):
    table = run(
        Experiment(
            bargmann_fock(),
            Lattice(FCS, 0.25),
            EventSpec(EventKind.ONE_ARM, inner=2.0),
            (4, 8, 16, 32),
            replicates=reps,
            master_seed=MASTER_SEED,
        )
    )
    fit = fit_one_arm([2.0 / t for t in table.column("s")], table.column("p_hat"), table.column("replicates"))
    return fit.ci[0] > 0, f"eta_hat={fit.eta_hat:.4f} ci=[{fit.ci[0]:.4f}, {fit.ci[1]:.4f}]"


def rsw_floor(reps):
    table = run(
        Experiment(
            bargmann_fock(),
            Lattice(FCS, 0.25),
            EventSpec(EventKind.CROSSING, rho=2.0),
            (4, 8, 16, 32),
            replicates=reps,
            master_seed=MASTER_SEED,
        )
    )
    check = rsw_floor_check(table.column("p_hat"), table.column("wilson_lo"))
    return check.holds, f"min wilson_lo={check.min_wilson_lo:.4f} first={check.first_p_hat:.4f} last={check.last_p_hat:.4f}"


def discretisation_trend(reps):
    reports = [
        double_crossing_census(bargmann_fock(), Lattice(FCS, eps), Box((0.0, 0.0), 5.0), seed=MASTER_SEED, replicates=reps)
        for eps in (0.5, 0.25, 0.125)
    ]
    decreasing = all(
        a.flagged_fraction - b.flagged_fraction > 3 * math.hypot(a.flagged_fraction_se, b.flagged_fraction_se)
        for a, b in zip(reports, reports[1:])
    )
    clean_lo = reports[-1].p_clean_interval[0]
    fractions = " ".join(f"{r.flagged_fraction:.2e}" for r in reports)
    return decreasing and clean_lo >= 0.95, f"flagged={fractions} p_clean_lo(0.125)={clean_lo:.4f}"


def fkg_margin(reps):
    quad_a = Quad(-4.0, 4.0, 0.5, 4.0)
    quad_b = Quad(-4.0, 4.0, -4.0, -0.5)
    margins = [
        fkg_check(bargmann_fock(), Lattice(FCS, 0.5), quad_a, quad_b, reps, MASTER_SEED + run_id).margin
        for run_id in range(FKG_RUNS)
    ]
    return min(margins) >= -3, "margins=" + " ".join(f"{m:.2f}" for m in margins)


def field_statistics(reps):
    runs = max(10, reps // 200)
    sup = supnorm_statistic(bargmann_fock(), (4, 8, 16, 32), mesh=0.2, seed=MASTER_SEED, replicates=runs)
    spread = float(sup.ratios.max() / sup.ratios.min())

    lattice = Lattice(FCS, 0.5)
    narrow = near_edge_critical_census(bargmann_fock(), lattice, 0.05, 4.0, seed=MASTER_SEED, replicates=runs * 6)
    wide = near_edge_critical_census(bargmann_fock(), lattice, 0.1, 4.0, seed=MASTER_SEED, replicates=runs * 6)
    ratio, se = paired_ratio(wide.counts, narrow.counts)
    linear = abs(ratio - 2.0) <= 3 * se
    return spread < 2 and linear, f"supnorm spread={spread:.3f} theta ratio={ratio:.3f}+-{se:.3f}"


TARGETS = [
    ("square_crossing", square_crossing),
    ("duality", duality),
    ("bakounine", bakounine),
    ("constants", constants),
    ("sampler_fidelity", sampler_fidelity),
    ("one_arm_decay", one_arm_decay),
    ("rsw_floor", rsw_floor),
    ("discretisation_trend", discretisation_trend),
    ("fkg_margin", fkg_margin),
    ("field_statistics", field_statistics),
]


def main():
    elevate_process_priority()

    # Create CSV immediately to ensure write permissions
    csv_filename = "acceptance_results.csv"
    cols = ["Round", "Target", "Replicates", "Pass", "Detail", "Time (s)"]
    pd.DataFrame(columns=cols).to_csv(csv_filename, index=False)

    print(f"\nStarting {TOTAL_ROUNDS} benchmark rounds on {len(TARGETS)} targets...")

    for current_round in range(TOTAL_ROUNDS + 1):
        is_warmup = current_round == 0
        round_label = "WARM-UP" if is_warmup else f"ROUND {current_round}/{TOTAL_ROUNDS}"
        reps = WARMUP_REPLICATES if is_warmup else REPLICATES

        print("\n" + "=" * 50)
        print(f" COMMENCING: {round_label}")
        print("=" * 50)

        for name, target in TARGETS:
            print(f"\n--- {name} ---")
            t0 = time.time()
            census = name == "discretisation_trend"
            n = (WARMUP_REPLICATES if is_warmup else CENSUS_REPLICATES) if census else reps
            try:
                passed, detail = target(n)
            except Exception as e:
                passed, detail = False, f"{type(e).__name__}: {e}"
            elapsed = time.time() - t0
            print(f"  > {'PASS' if passed else 'FAIL'}: {detail} ({elapsed:.2f}s)")

            if not is_warmup:
                res = {
                    "Round": current_round,
                    "Target": name,
                    "Replicates": n,
                    "Pass": passed,
                    "Detail": detail,
                    "Time (s)": round(elapsed, 4),
                }
                pd.DataFrame([res]).to_csv(csv_filename, mode="a", header=False, index=False)
                print("  [Data Saved to CSV]")

    print("\n" + "=" * 50)
    print(" BENCHMARKING COMPLETE!")
    print(f" Data secured in {csv_filename}")
    print("=" * 50)


if __name__ == "__main__":
    main()
