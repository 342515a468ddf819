import math
import unittest

import numpy as np

from src.errors import DomainError, ResolutionError, SizeError
from src.kernels.core import bargmann_fock
from src.lattice.models import Box, Lattice, LatticeFamily
from src.nodal.core import (
    double_crossing_census,
    ift_box,
    mesh_calculator,
    near_edge_critical_census,
    supnorm_statistic,
    transversality_statistic,
)

FCS = LatticeFamily.FACE_CENTERED_SQUARE


def _constant(points):
    return np.full(points.shape[0], 0.5)


def _period_along_x(points):
    """One full period along every corner-to-corner horizontal edge, half a period along diagonals."""
    return np.sin(2 * np.pi * points[:, 0] + 0.3)


def _wavy(points):
    x, y = points[:, 0], points[:, 1]
    return np.sin(7.3 * x + 1.1) * np.cos(5.1 * y - 0.4) + 0.2 * np.sin(13.0 * x * y)


def _parabola(points):
    """f = 0 and df(1, 0) = 0 only at (0.0061, 0.0123)."""
    x, y = points[:, 0], points[:, 1]
    return (y - 0.0123) - (x - 0.0061) ** 2


class TestDoubleCrossingCensus(unittest.TestCase):
    def setUp(self):
        self.lattice = Lattice(FCS, 1.0)
        self.box = Box((0.0, 0.0), 2.0)

    def test_constant_sign(self):
        report = double_crossing_census(None, self.lattice, self.box, seed=0, replicates=3, field_fn=_constant)
        np.testing.assert_array_equal(report.flagged, 0)
        self.assertEqual(report.p_clean, 1.0)
        self.assertEqual(report.flagged_fraction, 0.0)

    def test_full_period_edges(self):
        """Only the 20 horizontal edges between square corners see two sign changes."""
        report = double_crossing_census(None, self.lattice, self.box, seed=0, replicates=2, field_fn=_period_along_x)
        self.assertEqual(report.edges_total, 104)
        np.testing.assert_array_equal(report.flagged, [20, 20])
        self.assertEqual(report.edges_with_ge2_sign_changes, 40)
        self.assertEqual(report.clean_replicates, 0)

    def test_monotone_in_subsampling(self):
        """Interior points at k = 4 are a subset of those at k = 9."""
        coarse = double_crossing_census(None, self.lattice, self.box, subsample_k=4, replicates=1, field_fn=_wavy)
        fine = double_crossing_census(None, self.lattice, self.box, subsample_k=9, replicates=1, field_fn=_wavy)
        self.assertGreaterEqual(int(fine.flagged[0]), int(coarse.flagged[0]))

    def test_bargmann_fock_report(self):
        report = double_crossing_census(bargmann_fock(), Lattice(FCS, 0.5), self.box, seed=1, replicates=5)
        self.assertEqual(report.replicates, 5)
        lo, hi = report.p_clean_interval
        self.assertTrue(lo <= report.p_clean <= hi)
        row = report.as_row()
        self.assertEqual(row["eps"], 0.5)
        self.assertIn("lower bound", report.note)

    def test_preconditions(self):
        with self.assertRaises(DomainError):
            double_crossing_census(None, self.lattice, self.box, subsample_k=3, field_fn=_constant)
        with self.assertRaises(SizeError):
            double_crossing_census(bargmann_fock(), Lattice(FCS, 0.125), Box((0.0, 0.0), 5.0), memory_cap_bytes=1e3)


class TestMeshCalculator(unittest.TestCase):
    def _budget(self, s=4.0, **kwargs):
        args = dict(delta=0.1, eta=32.0, C1=1.0, mu_param=1e-3, beta_param=1.0, mu_T=1.0, N=4)
        args.update(kwargs)
        return mesh_calculator(s, **args)

    def test_eps_sigma(self):
        self.assertEqual(self._budget(R=1.0, sigma=2.0).eps_sigma, 1 / 513)

    def test_theta_quadruples(self):
        budget = self._budget()
        self.assertAlmostEqual(budget.theta(0.02) / budget.theta(0.01), 4.0, places=12)

    def test_kbar_scaling(self):
        ratios = [self._budget(s).kbar_s / math.sqrt(math.log(2 * s)) for s in (2.0, 8.0, 32.0)]
        self.assertAlmostEqual(ratios[0], ratios[1], places=9)
        self.assertAlmostEqual(ratios[0], ratios[2], places=9)

    def test_budget_identities(self):
        budget = self._budget()
        self.assertAlmostEqual(budget.psi_s, budget.kbar_s / budget.lambda_s)
        self.assertAlmostEqual(budget.eps1_s, (0.25 / budget.psi_s) ** 2)
        self.assertEqual(budget.admissible_mesh, 4.0 ** -40.0)
        self.assertFalse(budget.below_threshold)
        self.assertTrue(budget.admits(budget.mesh_limit))

    def test_below_threshold(self):
        with self.assertLogs("src.nodal.core", level="WARNING"):
            budget = self._budget(C1=1e-12, mu_param=1.0)
        self.assertTrue(budget.below_threshold)
        self.assertFalse(budget.admits(1e-30))

    def test_preconditions(self):
        with self.assertRaises(DomainError):
            self._budget(s=1.0)
        with self.assertRaises(DomainError):
            self._budget(delta=0.0)


class TestIftBox(unittest.TestCase):
    def test_values(self):
        box = ift_box(1.0, 1.0)
        self.assertEqual((box.eps, box.phi_second_bound), (1 / 16, 100.0))
        box = ift_box(2.0, 1.0)
        self.assertEqual((box.eps, box.phi_second_bound), (1 / 64, 800.0))

    def test_scale_free_product(self):
        for k in (1.0, 3.0, 17.5):
            box = ift_box(k, 1.0)
            self.assertAlmostEqual(box.eps * box.phi_second_bound ** (2 / 3), 100 ** (2 / 3) / 16, places=9)

    def test_k_below_lambda(self):
        with self.assertRaises(DomainError):
            ift_box(0.5, 1.0)


class TestFieldStatistics(unittest.TestCase):
    def test_supnorm_nested_boxes(self):
        report = supnorm_statistic(bargmann_fock(), (2.0, 3.0, 4.0), mesh=0.25, seed=2, replicates=3)
        self.assertEqual(report.maxima.shape, (3, 3))
        self.assertTrue(np.all(np.diff(report.maxima, axis=1) >= 0))
        self.assertEqual(report.ratios.shape, (3,))

    def test_supnorm_constant_field(self):
        report = supnorm_statistic(None, (2.0, 8.0), mesh=0.5, replicates=2, field_fn=_constant)
        np.testing.assert_allclose(report.means, 0.5)
        self.assertEqual(report.resolution_change, 0.0)
        np.testing.assert_allclose(report.ratios, 0.5 / np.sqrt(np.log([2.0, 8.0])))

    def test_supnorm_range(self):
        with self.assertRaises(DomainError):
            supnorm_statistic(None, (1.0, 4.0), field_fn=_constant)

    def test_transversality_linear_field(self):
        def linear(points):
            return points[:, 0] + 2 * points[:, 1] + 0.0123

        report = transversality_statistic(None, 1.0, mesh=0.1, replicates=2, field_fn=linear)
        self.assertGreaterEqual(report.minima.min(), math.sqrt(5) - 1e-9)
        self.assertLess(report.curvature_error, 1e-9)
        self.assertTrue(math.isfinite(report.phi_mean))
        self.assertEqual(report.mu_exponent, -3.0)

    def test_transversality_nonincreasing_in_s(self):
        small = transversality_statistic(None, 1.0, mesh=0.05, replicates=1, field_fn=_wavy)
        large = transversality_statistic(None, 2.0, mesh=0.05, replicates=1, field_fn=_wavy)
        self.assertLessEqual(large.minima[0], small.minima[0] + 1e-12)

    def test_transversality_power_range(self):
        with self.assertRaises(DomainError):
            transversality_statistic(None, 1.0, phi_power=1.0, field_fn=_wavy)


class TestNearEdgeCensus(unittest.TestCase):
    def setUp(self):
        self.lattice = Lattice(FCS, 1.0)

    def test_zero_width_strip(self):
        census = near_edge_critical_census(bargmann_fock(), self.lattice, 0.0, 2.0, replicates=4)
        np.testing.assert_array_equal(census.counts, 0)
        self.assertEqual(census.beta_hat, 0.0)

    def test_single_critical_point(self):
        census = near_edge_critical_census(None, self.lattice, 0.1, 1.0, replicates=2, field_fn=_parabola)
        np.testing.assert_array_equal(census.counts, [1, 1])
        narrow = near_edge_critical_census(
            None, self.lattice, 0.01, 1.0, replicates=1, aux_mesh=0.005, field_fn=_parabola
        )
        np.testing.assert_array_equal(narrow.counts, [0])

    def test_direction_must_be_an_edge_direction(self):
        with self.assertRaises(DomainError):
            near_edge_critical_census(None, self.lattice, 0.1, 1.0, direction=(2, 1), field_fn=_parabola)
        with self.assertRaises(DomainError):
            near_edge_critical_census(
                None, Lattice(LatticeFamily.TRIANGULAR, 1.0), 0.1, 1.0, direction=(1, -1), field_fn=_parabola
            )

    def test_auxiliary_grid_too_coarse(self):
        with self.assertRaises(ResolutionError):
            near_edge_critical_census(None, self.lattice, 0.01, 1.0, field_fn=_parabola)


if __name__ == "__main__":
    unittest.main()
