import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from src.errors import UnsupportedKernelError, ValidationError
from src.generators.generate_kernel_tables import generate_kernel_tables
from src.kernels.core import (
    ApproximateKernelWarning,
    bargmann_fock,
    bargmann_fock_log_beta,
    bessel_wave,
    covariance_matrix,
    decay_check,
    kernel_eval,
    kernel_eval_many,
    kostlan,
    kostlan_covariance,
    load_tabulated,
    tabulated,
)
from tests.config import get_data_file


class TestKernelEval(unittest.TestCase):
    def test_bargmann_fock_values(self):
        bf = bargmann_fock()
        self.assertEqual(kernel_eval(bf, (0.0, 0.0)), 1.0)
        r = math.sqrt(2 * math.log(2))
        self.assertAlmostEqual(kernel_eval(bf, (r, 0.0)), 0.5, places=12)

    def test_bessel_at_origin(self):
        self.assertEqual(kernel_eval(bessel_wave(), (0.0, 0.0)), 1.0)

    def test_symmetries_and_bounds(self):
        """K(dx) = K(-dx) and K(a, b) = K(a, -b) exactly; |K| <= 1."""
        rng = np.random.default_rng(0)
        dx = rng.uniform(-10, 10, size=(1000, 2))
        for kernel in (bargmann_fock(), bessel_wave(), load_tabulated(get_data_file("kernels/wendland_table.csv"))):
            values = kernel_eval_many(kernel, dx)
            np.testing.assert_array_equal(values, kernel_eval_many(kernel, -dx))
            np.testing.assert_array_equal(values, kernel_eval_many(kernel, dx * np.array([1.0, -1.0])))
            self.assertTrue(np.all(np.abs(values) <= 1.0))

    def test_kostlan_eval_flags_approximation(self):
        with self.assertWarns(ApproximateKernelWarning):
            value = kernel_eval(kostlan(10), (1.0, 0.0))
        self.assertAlmostEqual(value, math.exp(-0.5), places=12)

    def test_kostlan_covariance_unit_variance_and_limit(self):
        points = np.array([[0.0, 0.0], [1.0, 0.5], [-2.0, 1.0]])
        cov = kostlan_covariance(50, points, points)
        np.testing.assert_allclose(np.diag(cov), 1.0, atol=1e-12)
        limit = covariance_matrix(bargmann_fock(), points)
        high = kostlan_covariance(100_000, points, points)
        np.testing.assert_allclose(high, limit, atol=1e-3)


class TestTabulatedKernels(unittest.TestCase):
    def test_tabulated_matches_bargmann_fock(self):
        table = load_tabulated(get_data_file("kernels/bf_table.csv"))
        r = np.linspace(0, 7.9, 200)
        dx = np.stack([r, np.zeros_like(r)], axis=1)
        # linear interpolation on a 0.05 grid of a function with |K''| <= 1
        np.testing.assert_allclose(kernel_eval_many(table, dx), np.exp(-0.5 * r * r), atol=0.05**2 / 8 + 1e-9)

    def test_nonmonotone_radii_rejected(self):
        with self.assertRaises(ValidationError) as ctx:
            load_tabulated(get_data_file("kernels/nonmonotone_table.csv"))
        self.assertIn("strictly increasing", str(ctx.exception))

    def test_generated_tables_match_data(self):
        with tempfile.TemporaryDirectory() as tmp:
            generate_kernel_tables(tmp)
            for name in ("bf_table.csv", "wendland_table.csv", "nonmonotone_table.csv"):
                generated = pd.read_csv(Path(tmp) / name)
                checked_in = pd.read_csv(get_data_file(f"kernels/{name}"))
                pd.testing.assert_frame_equal(generated, checked_in, check_exact=False, rtol=0, atol=1e-11)
            with self.assertRaises(ValidationError):
                load_tabulated(Path(tmp) / "nonmonotone_table.csv")

    def test_table_must_start_at_one(self):
        with self.assertRaises(ValidationError):
            tabulated([0.0, 1.0], [0.9, 0.1])

    def test_wrong_columns_rejected(self):
        with self.assertRaises(ValidationError):
            load_tabulated(get_data_file("configs/square_crossing.ini"))


class TestDecayCheck(unittest.TestCase):
    def test_bargmann_fock_with_minimal_log_beta(self):
        """The literal beta = 1e300 is too small at alpha = 325; the minimal log beta holds."""
        log_beta = bargmann_fock_log_beta(325.0)
        self.assertAlmostEqual(log_beta, 162.5 * (math.log(325.0) - 1.0), places=9)
        kernel = bargmann_fock().with_decay(325.0, log_beta=log_beta)
        report = decay_check(kernel, np.arange(1, 61))
        self.assertTrue(report.holds)
        self.assertLessEqual(report.max_ratio, 1.0 + 1e-9)

        naive = bargmann_fock().with_decay(325.0, beta=1e300)
        self.assertFalse(decay_check(naive, np.arange(1, 61)).holds)

    def test_bessel_envelope(self):
        kernel = bessel_wave().with_decay(0.5, beta=1.0)
        report = decay_check(kernel, np.arange(1, 101))
        self.assertTrue(report.holds)
        self.assertEqual(report.ratios.shape, (100,))

    def test_zero_tail_gives_zero_ratio(self):
        table = load_tabulated(get_data_file("kernels/wendland_table.csv")).with_decay(2.0, beta=1.0)
        self.assertEqual(decay_check(table, np.arange(3, 11)).max_ratio, 0.0)

    def test_missing_metadata(self):
        with self.assertRaises(UnsupportedKernelError):
            decay_check(bargmann_fock(), [1.0, 2.0])

    def test_radii_below_one_rejected(self):
        kernel = bessel_wave().with_decay(0.5, beta=1.0)
        with self.assertRaises(ValidationError):
            decay_check(kernel, [0.5, 2.0])


if __name__ == "__main__":
    unittest.main()
