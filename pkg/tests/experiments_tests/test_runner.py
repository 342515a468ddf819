import json
import tempfile
import unittest
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from src.coloring.models import Color
from src.errors import ContractError, DomainError, ValidationError
from src.experiments.calibration import CalibrationStore, calibrate_alpha_lower
from src.experiments.models import EstimateRow, EstimateTable, EventSpec, Experiment
from src.experiments.runner import (
    alpha_curves,
    cell_seed,
    fkg_check,
    multi_rectangle_check,
    run,
    small_box_positivity,
    split_replicates,
)
from src.experiments.stats import composition_check, wilson_interval
from src.kernels.core import bargmann_fock
from src.lattice.models import Lattice, LatticeFamily
from src.percolation.models import EventKind, Quad

FCS = LatticeFamily.FACE_CENTERED_SQUARE


class _ConstantSampler:
    def __init__(self, n, value):
        self.n = n
        self.value = value

    def draw(self, seed, replicate=None):
        return np.full(self.n, self.value)


def _constant_factory(value):
    def factory(kernel, points, method, grid_spacing, memory_cap_bytes):
        return _ConstantSampler(points.shape[0], value)

    return factory


def _experiment(event, scales=(4.0,), eps=1.0, replicates=100, **kwargs):
    return Experiment(bargmann_fock(), Lattice(FCS, eps), event, scales, replicates=replicates, **kwargs)


class TestRunWithStubSampler(unittest.TestCase):
    def test_all_black_events(self):
        events = [
            EventSpec(EventKind.CROSSING),
            EventSpec(EventKind.CROSSING, rho=2.0),
            EventSpec(EventKind.CIRCUIT),
            EventSpec(EventKind.H, alpha=0.0, beta=1.0),
            EventSpec(EventKind.X, alpha=1.0),
            EventSpec(EventKind.ONE_ARM, inner=1.0),
        ]
        for event in events:
            table = run(_experiment(event), _constant_factory(1.0))
            self.assertEqual(table.column("p_hat"), [1.0], event.kind)
            self.assertEqual(table.column("successes"), [100])

    def test_all_white(self):
        table = run(_experiment(EventSpec(EventKind.CROSSING), scales=(2.0, 4.0)), _constant_factory(-1.0))
        self.assertEqual(table.column("p_hat"), [0.0, 0.0])
        white = run(_experiment(EventSpec(EventKind.CROSSING, color=Color.WHITE)), _constant_factory(-1.0))
        self.assertEqual(white.column("p_hat"), [1.0])

    def test_nodal_needs_both_colours(self):
        table = run(_experiment(EventSpec(EventKind.NODAL)), _constant_factory(1.0))
        self.assertEqual(table.column("p_hat"), [0.0])

    def test_row_parameters(self):
        table = run(_experiment(EventSpec(EventKind.CROSSING, rho=2.0), scales=(2.0, 4.0)), _constant_factory(1.0))
        self.assertEqual(table.column("s"), [2.0, 4.0])
        self.assertEqual(table.column("rho"), [2.0, 2.0])
        self.assertEqual(table.column("eps"), [1.0, 1.0])
        lo, hi = wilson_interval(100, 100, 0.95)
        self.assertEqual(table.column("wilson_lo"), [lo, lo])

    def test_sampler_built_once_per_scale(self):
        built = []

        def factory(kernel, points, method, grid_spacing, memory_cap_bytes):
            built.append(points.shape[0])
            return _ConstantSampler(points.shape[0], 1.0)

        run(_experiment(EventSpec(EventKind.CROSSING), scales=(2.0, 4.0), replicates=200), factory)
        self.assertEqual(len(built), 2)
        self.assertLess(built[0], built[1])


class TestRunWithGaussianField(unittest.TestCase):
    def setUp(self):
        self.experiment = _experiment(EventSpec(EventKind.CROSSING), scales=(2.0,), eps=0.5, master_seed=3)

    def test_deterministic(self):
        first = run(self.experiment)
        second = run(self.experiment)
        self.assertEqual(first.column("successes"), second.column("successes"))

    def test_independent_of_worker_count(self):
        parallel = Experiment(
            self.experiment.kernel,
            self.experiment.lattice,
            self.experiment.event,
            self.experiment.scales,
            replicates=self.experiment.replicates,
            master_seed=3,
            workers=2,
        )
        self.assertEqual(run(parallel).column("successes"), run(self.experiment).column("successes"))

    def test_square_crossing_near_one_half(self):
        table = run(_experiment(EventSpec(EventKind.CROSSING), scales=(4.0,), eps=0.5, replicates=400, master_seed=7))
        # four standard errors at p = 1/2
        self.assertLess(abs(table.column("p_hat")[0] - 0.5), 0.1)


class TestExperimentValidation(unittest.TestCase):
    def test_invalid_experiments(self):
        with self.assertRaises(ValidationError):
            _experiment(EventSpec(EventKind.CROSSING), replicates=10)
        with self.assertRaises(ValidationError):
            _experiment(EventSpec(EventKind.CROSSING), scales=(4.0, 2.0))
        with self.assertRaises(ValidationError):
            _experiment(EventSpec(EventKind.CROSSING), scales=())
        with self.assertRaises(ValidationError):
            _experiment(EventSpec(EventKind.CROSSING), workers=0)

    def test_row_must_bracket_estimate(self):
        with self.assertRaises(ValidationError):
            EstimateRow({}, 50, 100, 0.6, 0.7)
        with self.assertRaises(ValidationError):
            EstimateRow({}, 101, 100, 0.0, 1.0)

    def test_seeds(self):
        self.assertEqual(cell_seed(7, 0), cell_seed(7, 0))
        self.assertNotEqual(cell_seed(7, 0), cell_seed(7, 1))
        self.assertNotEqual(cell_seed(7, 0), cell_seed(8, 0))
        self.assertEqual(split_replicates(10, 3), [4, 3, 3])

    def test_csv_without_time(self):
        table = EstimateTable([EstimateRow({"s": 2.0}, 50, 100, *wilson_interval(50, 100), wall_time=1.5)])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "table.csv"
            table.to_csv(path, extra={"seed": 3}, include_time=False)
            frame = pd.read_csv(path)
        self.assertNotIn("wall_time", frame.columns)
        self.assertEqual(list(frame["seed"]), [3])
        self.assertEqual(list(frame["p_hat"]), [0.5])


class TestCorrelationChecks(unittest.TestCase):
    def test_fkg_same_event(self):
        quad = Quad(-1.0, 1.0, -1.0, 1.0)
        result = fkg_check(bargmann_fock(), Lattice(FCS, 0.5), quad, quad, 200, seed=1)
        self.assertEqual(result.p_ab, result.p_a)
        self.assertGreaterEqual(result.difference, 0.0)
        self.assertGreaterEqual(result.margin, 0.0)

    def test_fkg_needs_increasing_events(self):
        quad = Quad(-1.0, 1.0, -1.0, 1.0)
        with self.assertRaises(ContractError):
            fkg_check(bargmann_fock(), Lattice(FCS, 0.5), quad, quad, 10, seed=1, color_b=Color.WHITE)

    def test_fkg_disjoint_rectangles(self):
        """Crossings of two separate rectangles are positively correlated under the Bargmann-Fock field."""
        left = Quad(-2.0, -0.5, -1.0, 1.0)
        right = Quad(0.5, 2.0, -1.0, 1.0)
        result = fkg_check(bargmann_fock(), Lattice(FCS, 0.5), left, right, 400, seed=5)
        self.assertEqual(result.replicates, 400)
        for p in (result.p_a, result.p_b):
            self.assertGreater(p, 0.0)
            self.assertLess(p, 1.0)
        self.assertGreater(result.std_error, 0.0)
        self.assertGreaterEqual(result.margin, -3.0)

    def test_composition_from_crossing_runs(self):
        """f(1 + i k) >= f(1 + k)^i f(1)^(i - 1) on seeded crossing estimates, k = 1/2."""
        counts = {}
        for rho in (1.0, 1.5, 2.0, 2.5):
            event = EventSpec(EventKind.CROSSING, rho=rho)
            table = run(_experiment(event, scales=(2.0,), eps=0.5, replicates=300, master_seed=9))
            counts[rho] = (table.column("successes")[0], table.column("replicates")[0])
        self.assertGreater(counts[1.0][0], counts[2.5][0])
        for i in (2, 3):
            check = composition_check(counts[1.0], counts[1.5], counts[1.0 + 0.5 * i], i)
            self.assertTrue(check.holds, check)

    def test_multi_rectangle_all_black(self):
        result = multi_rectangle_check(
            bargmann_fock(),
            Lattice(FCS, 1.0),
            [Quad(-2.0, 2.0, 0.0, 2.0)],
            [Quad(-2.0, 2.0, -2.0, 0.0)],
            20,
            seed=0,
            sampler_factory=_constant_factory(1.0),
        )
        self.assertEqual((result.p_black, result.p_white, result.p_joint), (1.0, 0.0, 0.0))
        self.assertTrue(result.holds)
        with self.assertRaises(DomainError):
            multi_rectangle_check(bargmann_fock(), Lattice(FCS, 1.0), [], [Quad(0.0, 1.0, 0.0, 1.0)], 5, seed=0)


class TestCalibration(unittest.TestCase):
    def test_small_box_positivity(self):
        table = small_box_positivity(bargmann_fock(), [0.25, 0.5], 50, sampler_factory=_constant_factory(1.0))
        self.assertEqual(table.column("lambda"), [0.25, 0.5])
        self.assertEqual(table.column("p_hat"), [1.0, 1.0])

    def test_small_box_preconditions(self):
        with self.assertRaises(DomainError):
            small_box_positivity(bargmann_fock(), [0.5, 1.5], 10)
        shifted = Lattice(FCS, 0.25, (0.06, 0.06))
        with self.assertRaises(DomainError):
            small_box_positivity(bargmann_fock(), [0.01], 10, lattice=shifted)

    def test_alpha_lower_from_table(self):
        rows = [
            EstimateRow({"lambda": lam}, k, 1000, *wilson_interval(k, 1000))
            for lam, k in ((0.1, 900), (0.25, 600), (0.5, 200))
        ]
        calibration = calibrate_alpha_lower(EstimateTable(rows))
        self.assertEqual(calibration.lambda_star, 0.25)
        self.assertEqual(calibration.alpha_lower, 0.0625)
        self.assertAlmostEqual(calibration.a, 0.36)
        with self.assertRaises(DomainError):
            calibrate_alpha_lower(EstimateTable(rows[2:]))

    def test_alpha_curves_all_black(self):
        curves = alpha_curves(
            bargmann_fock(), Lattice(FCS, 1.0), 4.0, [0.5, 1.0], 3, sampler_factory=_constant_factory(1.0)
        )
        np.testing.assert_array_equal(curves.p_x, [1.0, 1.0])
        np.testing.assert_array_equal(curves.h_gap, [0.0, 0.0])
        with self.assertRaises(DomainError):
            alpha_curves(bargmann_fock(), Lattice(FCS, 1.0), 4.0, [3.0], 3)

    def test_store_round_trip(self):
        stamp = datetime(2026, 1, 1, tzinfo=timezone.utc)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "calibration.json"
            store = CalibrationStore(path)
            store.put("lambda_star", 0.25, "small-box positivity", stamp)
            store.save()
            reloaded = CalibrationStore(path)
            self.assertIn("lambda_star", reloaded)
            self.assertEqual(reloaded.get("lambda_star"), 0.25)
            self.assertEqual(reloaded.entries["lambda_star"].timestamp, stamp)
            self.assertIsNone(reloaded.get("mu"))

    def test_store_rejects_other_versions(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "calibration.json"
            path.write_text(json.dumps({"schema_version": 2, "entries": {}}))
            with self.assertRaises(ValidationError):
                CalibrationStore(path)
            path.write_text("{not json")
            with self.assertRaises(ValidationError):
                CalibrationStore(path)


if __name__ == "__main__":
    unittest.main()
