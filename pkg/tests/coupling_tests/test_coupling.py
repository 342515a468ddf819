import math
import unittest

import numpy as np

from src.coupling.core import bakounine_bound, orthant_probability, tv_exact, tv_monte_carlo
from src.coupling.models import BlockGaussian
from src.errors import DomainError, SizeError, ValidationError


class TestBlockGaussian(unittest.TestCase):
    def test_equicorrelated_blocks(self):
        bg = BlockGaussian.equicorrelated(2, 3, 0.2)
        self.assertEqual((bg.m, bg.n), (2, 3))
        self.assertEqual(bg.eta, 0.2)
        np.testing.assert_array_equal(bg.independent_covariance[:2, 2:], 0.0)

    def test_validation(self):
        with self.assertRaises(ValidationError):
            BlockGaussian([[1.0]], [[1.0]], [[1.5]])
        with self.assertRaises(ValidationError):
            BlockGaussian([[2.0]], [[1.0]], [[0.1]])
        with self.assertRaises(ValidationError):
            BlockGaussian([[1.0]], [[1.0, -0.9], [-0.9, 1.0]], [[0.9, 0.9]])
        with self.assertRaises(ValidationError):
            BlockGaussian.equicorrelated(0, 1, 0.1)


class TestExactTotalVariation(unittest.TestCase):
    def test_single_pair_is_arcsine(self):
        for eta in (0.05, 0.1, 0.3, 0.6, 0.9):
            tv = tv_exact(BlockGaussian.equicorrelated(1, 1, eta)).estimate
            self.assertAlmostEqual(tv, math.asin(eta) / math.pi, delta=1e-9)

    def test_independent_blocks(self):
        self.assertEqual(tv_exact(BlockGaussian.equicorrelated(2, 2, 0.0)).estimate, 0.0)

    def test_orthant_closed_form(self):
        cov = np.full((3, 3), 0.5)
        np.fill_diagonal(cov, 1.0)
        self.assertAlmostEqual(orthant_probability(cov), 0.25, places=12)

    def test_sign_flip_invariance(self):
        bg = BlockGaussian.equicorrelated(1, 2, 0.4)
        self.assertAlmostEqual(tv_exact(bg).estimate, tv_exact(bg.flipped(0)).estimate, places=12)

    def test_bound_dominates(self):
        for m in range(1, 3):
            for n in range(1, 3):
                for eta in (0.05, 0.3):
                    bg = BlockGaussian.equicorrelated(m, n, eta)
                    self.assertLessEqual(tv_exact(bg).estimate, bakounine_bound(m, n, eta) + 1e-3)

    def test_error_bound(self):
        """Closed-form orthants carry no error; numerical ones stay within the tolerance."""
        self.assertEqual(tv_exact(BlockGaussian.equicorrelated(1, 2, 0.3)).error_bound, 0.0)
        result = tv_exact(BlockGaussian.equicorrelated(2, 2, 0.3), tolerance=1e-3)
        self.assertGreater(result.error_bound, 0.0)
        self.assertLessEqual(result.error_bound, 1e-3)
        self.assertEqual(tv_exact(BlockGaussian.equicorrelated(2, 2, 0.0)).error_bound, 0.0)
        with self.assertRaises(DomainError):
            tv_exact(BlockGaussian.equicorrelated(1, 1, 0.3), tolerance=0.0)

    def test_dimension_limit(self):
        with self.assertRaises(SizeError):
            tv_exact(BlockGaussian.equicorrelated(7, 6, 0.1))


class TestMonteCarloTotalVariation(unittest.TestCase):
    def test_agrees_with_exact(self):
        for m, n, eta in ((1, 1, 0.5), (1, 2, 0.3)):
            bg = BlockGaussian.equicorrelated(m, n, eta)
            mc = tv_monte_carlo(bg, 200_000, seed=1)
            self.assertLess(abs(mc.estimate - tv_exact(bg).estimate), 5 * mc.std_error + 3e-3)
            self.assertGreater(mc.std_error, 0.0)

    def test_deterministic(self):
        bg = BlockGaussian.equicorrelated(2, 1, 0.2)
        self.assertEqual(tv_monte_carlo(bg, 1000, seed=3), tv_monte_carlo(bg, 1000, seed=3))

    def test_too_few_samples(self):
        with self.assertRaises(DomainError):
            tv_monte_carlo(BlockGaussian.equicorrelated(1, 1, 0.1), 1, seed=0)


class TestBakounineBound(unittest.TestCase):
    def test_values(self):
        self.assertEqual(bakounine_bound(1, 1, 0.0), 0.0)
        self.assertEqual(bakounine_bound(1, 1, 0.5), 1.0)
        expected = 2 ** 2.8 * 2 ** 1.6 * 1e-4
        self.assertAlmostEqual(bakounine_bound(1, 1, 1e-20), expected, delta=1e-12)

    def test_range(self):
        with self.assertRaises(DomainError):
            bakounine_bound(1, 1, 1.5)


if __name__ == "__main__":
    unittest.main()
