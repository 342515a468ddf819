import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.coloring.core import colorize, exchange
from src.coloring.models import Color, Coloring
from src.errors import AlignmentError
from src.kernels.core import bargmann_fock
from src.lattice.builder import PatchBuilder
from src.lattice.models import Box, Lattice
from src.percolation.engine import crosses
from src.percolation.models import Quad
from src.sampler.core import sample_cholesky
from src.sampler.models import FieldSample, SamplerMethod
from src.sampler.vertex import PointFieldSampler


class TestColoring(unittest.TestCase):
    def setUp(self):
        self.patch = PatchBuilder(Lattice(mesh_eps=1.0)).enumerate(Box((0.0, 0.0), 1.0))

    def test_sign_rule(self):
        values = np.linspace(-1, 1, self.patch.n_vertices)
        values[0] = 0.0
        coloring = Coloring.from_values(self.patch, values)
        np.testing.assert_array_equal(coloring.black, values > 0)
        self.assertFalse(coloring.black[0])
        np.testing.assert_array_equal(coloring.mask(Color.WHITE), ~coloring.black)

    def test_colorize_sample(self):
        sample = sample_cholesky(bargmann_fock(), self.patch.points, seed=3)
        coloring = colorize(sample, self.patch)
        np.testing.assert_array_equal(coloring.black, sample.values > 0)

    def test_exchange_is_negated_sample(self):
        sample = sample_cholesky(bargmann_fock(), self.patch.points, seed=4)
        np.testing.assert_array_equal(
            exchange(colorize(sample, self.patch)).black, colorize(sample.negated(), self.patch).black
        )

    def test_misaligned_sample(self):
        shifted = FieldSample(self.patch.points + 0.01, np.ones(self.patch.n_vertices), 0, SamplerMethod.CHOLESKY)
        with self.assertRaises(AlignmentError):
            colorize(shifted, self.patch)
        short = FieldSample(self.patch.points[:-1], np.ones(self.patch.n_vertices - 1), 0, SamplerMethod.CHOLESKY)
        with self.assertRaises(AlignmentError):
            colorize(short, self.patch)

    def test_black_edges(self):
        black = np.zeros(self.patch.n_vertices, dtype=bool)
        coloring = Coloring(self.patch, black)
        self.assertFalse(coloring.black_edges().any())
        self.assertTrue(exchange(coloring).black_edges().all())

    def test_wrong_length(self):
        with self.assertRaises(ValueError):
            Coloring(self.patch, np.zeros(3, dtype=bool))

    def test_pbm_dump(self):
        coloring = Coloring(self.patch, np.ones(self.patch.n_vertices, dtype=bool))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "coloring.pbm"
            coloring.to_pbm(path)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[:2], ["P1", "5 5"])
        # corners and face centres are black, the other grid sites are not vertices
        self.assertEqual(lines[2], "1 0 1 0 1")
        self.assertEqual(lines[3], "0 1 0 1 0")

    def test_vertex_colour_is_a_fair_coin(self):
        """Each vertex is black with probability 1/2 under a centred field."""
        sampler = PointFieldSampler(bargmann_fock(), self.patch.points, SamplerMethod.CHOLESKY)
        seeds = 2000
        black = np.array([Coloring.from_values(self.patch, sampler.draw(seed)).black for seed in range(seeds)])
        frequency = black.mean(axis=0)
        np.testing.assert_array_less(np.abs(frequency - 0.5), 3 / np.sqrt(seeds))

    def test_raising_one_value_only_adds_black(self):
        """from_values is monotone: raising the field at one vertex can only turn that vertex black."""
        sampler = PointFieldSampler(bargmann_fock(), self.patch.points, SamplerMethod.CHOLESKY)
        quad = Quad(-1.0, 1.0, -1.0, 1.0)
        for seed in range(20):
            values = sampler.draw(seed)
            low = Coloring.from_values(self.patch, values)
            for vertex in range(self.patch.n_vertices):
                for delta in (0.1, 1.0, 5.0):
                    raised = values.copy()
                    raised[vertex] += delta
                    high = Coloring.from_values(self.patch, raised)
                    self.assertTrue(np.all(high.black >= low.black))
                    changed = np.nonzero(high.black != low.black)[0]
                    self.assertTrue(set(changed.tolist()) <= {vertex})
                    if crosses(low, quad):
                        self.assertTrue(crosses(high, quad))


if __name__ == "__main__":
    unittest.main()
