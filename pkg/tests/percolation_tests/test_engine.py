import itertools
import unittest

import networkx as nx
import numpy as np

from src.coloring.core import exchange
from src.coloring.models import Color, Coloring
from src.errors import DomainError
from src.lattice.builder import PatchBuilder
from src.lattice.models import Box, Lattice, LatticeFamily
from src.percolation.engine import (
    circuit,
    cluster_labels,
    crosses,
    event_H,
    event_X,
    nodal_sub_quads,
    one_arm,
    quad_nodal_crossing,
)
from src.percolation.models import Quad, SidePair

FCS = LatticeFamily.FACE_CENTERED_SQUARE
TRI = LatticeFamily.TRIANGULAR


def _patch(family=FCS, eps=1.0, half_side=3.0):
    return PatchBuilder(Lattice(family, eps)).enumerate(Box((0.0, 0.0), half_side))


def _painted(patch, predicate):
    points = patch.points
    return Coloring(patch, np.array([bool(predicate(x, y)) for x, y in points], dtype=bool))


def _oracle_crossing(coloring, x0, x1):
    """Left-right black crossing of the whole patch by breadth-first search."""
    graph = coloring.patch.to_networkx()
    black = graph.subgraph(np.nonzero(coloring.black)[0].tolist()).copy()
    points = coloring.patch.points
    black.add_node("source")
    black.add_node("target")
    for i in black.nodes:
        if i in ("source", "target"):
            continue
        if abs(points[i, 0] - x0) < 1e-9:
            black.add_edge("source", i)
        if abs(points[i, 0] - x1) < 1e-9:
            black.add_edge(i, "target")
    return nx.has_path(black, "source", "target")


class TestDuality(unittest.TestCase):
    def _exhaustive(self, patch, quad):
        dual = Quad(quad.x0, quad.x1, quad.y0, quad.y1, SidePair.TOP_BOTTOM)
        for bits in itertools.product((False, True), repeat=patch.n_vertices):
            coloring = Coloring(patch, np.array(bits, dtype=bool))
            black = crosses(coloring, quad, Color.BLACK).occurred
            white = crosses(coloring, dual, Color.WHITE).occurred
            self.assertNotEqual(black, white, f"colouring {bits}")

    def test_face_centered_square_box(self):
        """Exactly one of a black left-right and a white top-bottom crossing, over all 2^13 colourings."""
        patch = _patch(FCS, 1.0, 1.0)
        self.assertEqual(patch.n_vertices, 13)
        self._exhaustive(patch, Quad(-1.0, 1.0, -1.0, 1.0))

    def test_face_centered_square_rectangle(self):
        patch = _patch(FCS, 1.0, 1.0)
        self._exhaustive(patch, Quad(-1.0, 1.0, -1.0, 0.0))

    def test_triangular_box(self):
        patch = _patch(TRI, 1.0, 1.0)
        self.assertEqual(patch.n_vertices, 9)
        self._exhaustive(patch, Quad(-1.0, 1.0, -1.0, 1.0))


class TestExhaustiveColourings(unittest.TestCase):
    """Every colouring of the 13-vertex face-centred square patch B_1."""

    def setUp(self):
        self.patch = _patch(FCS, 1.0, 1.0)
        self.n = self.patch.n_vertices

    def _events(self, coloring):
        return (
            crosses(coloring, Quad(-1.0, 1.0, -1.0, 1.0)).occurred,
            circuit(coloring, 0.5, 1.0).occurred,
            one_arm(coloring, 0.5, 1.0).occurred,
            event_H(coloring, 2.0, 0.0, 1.0).occurred,
            event_X(coloring, 2.0, 0.5).occurred,
        )

    def test_black_events_are_increasing(self):
        """Turning any single white vertex black never destroys a black event."""
        table = np.zeros((2**self.n, 5), dtype=bool)
        for index, bits in enumerate(itertools.product((False, True), repeat=self.n)):
            table[index] = self._events(Coloring(self.patch, np.array(bits, dtype=bool)))
        # each event both occurs and fails somewhere
        self.assertTrue(table.any(axis=0).all())
        self.assertFalse(table.all(axis=0).any())

        indices = np.arange(2**self.n)
        for vertex in range(self.n):
            bit = 1 << (self.n - 1 - vertex)
            white = indices[(indices & bit) == 0]
            lost = table[white] & ~table[white | bit]
            self.assertFalse(lost.any(), f"flipping vertex {vertex} destroyed an event")

    def _dfs_partition(self, graph, bits):
        seen, parts = set(), set()
        for start in (v for v in range(len(bits)) if bits[v]):
            if start in seen:
                continue
            component = set(nx.dfs_preorder_nodes(graph, start))
            seen |= component
            parts.add(frozenset(component))
        return parts

    def _check_labels(self, patch):
        graph = patch.to_networkx()
        for bits in itertools.product((False, True), repeat=patch.n_vertices):
            open_mask = np.array(bits, dtype=bool)
            labels = cluster_labels(patch, open_mask)
            self.assertTrue(np.all(labels[~open_mask] == -1))
            parts = {}
            for vertex in np.nonzero(open_mask)[0]:
                parts.setdefault(int(labels[vertex]), set()).add(int(vertex))
            expected = self._dfs_partition(graph.subgraph(np.nonzero(open_mask)[0].tolist()), bits)
            self.assertEqual({frozenset(part) for part in parts.values()}, expected, f"colouring {bits}")

    def test_cluster_labels_match_depth_first_search(self):
        self._check_labels(self.patch)

    def test_cluster_labels_triangular(self):
        self._check_labels(_patch(TRI, 1.0, 1.0))


class TestCrossingOracle(unittest.TestCase):
    def test_matches_graph_search(self):
        patch = _patch(FCS, 0.5, 3.0)
        quad = Quad(-3.0, 3.0, -3.0, 3.0)
        rng = np.random.default_rng(0)
        seen = set()
        for _ in range(200):
            coloring = Coloring(patch, rng.random(patch.n_vertices) < 0.5)
            result = crosses(coloring, quad)
            self.assertEqual(result.occurred, _oracle_crossing(coloring, -3.0, 3.0))
            seen.add(result.occurred)
        self.assertEqual(seen, {True, False})

    def test_witness_is_open_path(self):
        patch = _patch(FCS, 0.5, 3.0)
        quad = Quad(-3.0, 3.0, -3.0, 3.0)
        rng = np.random.default_rng(1)
        found = 0
        for _ in range(50):
            coloring = Coloring(patch, rng.random(patch.n_vertices) < 0.6)
            result = crosses(coloring, quad, witness=True)
            if not result:
                continue
            found += 1
            path = result.witness
            self.assertTrue(all(coloring.black[path]))
            for a, b in zip(path, path[1:]):
                self.assertIn(b, patch.neighbors(a))
            self.assertAlmostEqual(patch.points[path[0], 0], -3.0)
            self.assertAlmostEqual(patch.points[path[-1], 0], 3.0)
        self.assertGreater(found, 0)

    def test_cluster_labels_closed_vertices(self):
        patch = _patch(FCS, 1.0, 1.0)
        labels = cluster_labels(patch, np.zeros(patch.n_vertices, dtype=bool))
        self.assertTrue(np.all(labels == -1))
        labels = cluster_labels(patch, np.ones(patch.n_vertices, dtype=bool))
        self.assertEqual(np.unique(labels).size, 1)

    def test_quad_outside_patch(self):
        coloring = _painted(_patch(FCS, 1.0, 1.0), lambda x, y: True)
        with self.assertRaises(DomainError):
            crosses(coloring, Quad(-1.0, 2.0, -1.0, 1.0))

    def test_degenerate_quad(self):
        with self.assertRaises(DomainError):
            Quad(1.0, 1.0, 0.0, 1.0)


class TestCircuit(unittest.TestCase):
    def setUp(self):
        self.patch = _patch(FCS, 1.0, 3.0)

    def _ring(self, x, y):
        return abs(max(abs(x), abs(y)) - 2.0) < 1e-9

    def test_uniform_colourings(self):
        black = _painted(self.patch, lambda x, y: True)
        self.assertTrue(circuit(black, 1.0, 3.0))
        self.assertFalse(circuit(exchange(black), 1.0, 3.0))
        self.assertTrue(circuit(exchange(black), 1.0, 3.0, Color.WHITE))

    def test_single_ring(self):
        coloring = _painted(self.patch, self._ring)
        result = circuit(coloring, 1.0, 3.0, witness=True)
        self.assertTrue(result)
        self.assertTrue(all(coloring.black[result.witness]))
        angles = np.arctan2(self.patch.points[result.witness, 1], self.patch.points[result.witness, 0])
        self.assertTrue(np.all(np.diff(angles) >= 0))

    def test_broken_ring(self):
        coloring = _painted(self.patch, lambda x, y: self._ring(x, y) and not (x == 2.0 and y == 0.0))
        self.assertFalse(circuit(coloring, 1.0, 3.0))

    def test_bad_radii(self):
        coloring = _painted(self.patch, lambda x, y: True)
        with self.assertRaises(DomainError):
            circuit(coloring, 2.0, 1.0)
        with self.assertRaises(DomainError):
            circuit(coloring, 1.0, 4.0)


class TestArmEvents(unittest.TestCase):
    def setUp(self):
        self.patch = _patch(FCS, 1.0, 3.0)

    def test_one_arm_along_axis(self):
        coloring = _painted(self.patch, lambda x, y: y == 0.0 and x >= 0)
        self.assertTrue(one_arm(coloring, 1.0, 3.0))
        self.assertFalse(one_arm(exchange(_painted(self.patch, lambda x, y: True)), 1.0, 3.0))

    def test_one_arm_needs_nested_boxes(self):
        coloring = _painted(self.patch, lambda x, y: True)
        with self.assertRaises(DomainError):
            one_arm(coloring, 2.0, 2.0)

    def test_h_event(self):
        coloring = _painted(self.patch, lambda x, y: y == 0.0)
        self.assertTrue(event_H(coloring, 6.0, -1.0, 1.0))
        self.assertFalse(event_H(coloring, 6.0, 1.0, 3.0))
        with self.assertRaises(DomainError):
            event_H(coloring, 6.0, 1.0, 0.0)

    def test_x_event(self):
        frame = _painted(self.patch, lambda x, y: abs(x) == 3.0 or y == 0.0)
        self.assertTrue(event_X(frame, 6.0, 1.0))
        left_only = _painted(self.patch, lambda x, y: x == -3.0)
        self.assertFalse(event_X(left_only, 6.0, 1.0))
        self.assertFalse(event_X(exchange(frame), 6.0, 1.0))


class TestNodalCrossing(unittest.TestCase):
    def setUp(self):
        self.patch = _patch(FCS, 1.0, 2.0)
        self.quad = Quad(-2.0, 2.0, -2.0, 2.0)

    def test_sub_quads(self):
        upper, lower = nodal_sub_quads(self.quad, 1.0, 1.0)
        self.assertEqual((upper.y0, upper.y1), (0.5, 2.0))
        self.assertEqual((lower.y0, lower.y1), (-2.0, -0.5))
        right, left = nodal_sub_quads(Quad(-2.0, 2.0, -2.0, 2.0, SidePair.TOP_BOTTOM), 1.0, 1.0)
        self.assertEqual((right.x0, left.x1), (0.5, -0.5))

    def test_half_planes(self):
        coloring = _painted(self.patch, lambda x, y: y > 0)
        self.assertTrue(quad_nodal_crossing(coloring, self.quad, 1.0))
        self.assertFalse(quad_nodal_crossing(exchange(coloring), self.quad, 1.0))

    def test_witness_joins_both_bands(self):
        coloring = _painted(self.patch, lambda x, y: y > 0)
        result = quad_nodal_crossing(coloring, self.quad, 1.0, witness=True)
        self.assertTrue(any(coloring.black[result.witness]))
        self.assertFalse(all(coloring.black[result.witness]))

    def test_gap_too_wide(self):
        coloring = _painted(self.patch, lambda x, y: y > 0)
        with self.assertRaises(DomainError):
            quad_nodal_crossing(coloring, self.quad, 3.5)


if __name__ == "__main__":
    unittest.main()
