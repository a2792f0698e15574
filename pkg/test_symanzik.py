#!/usr/bin/env python3
"""
Symanzik Polynomial Test Suite for Canon
Tests Psi, Phi, Xi, spanning forest polynomials and their recursions
"""

import os
import sys
import unittest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from canon.graph_core import Edge, Graph, GraphError, Leg, contract, delete, loop_number
from canon.kinematics import Kinematics, Quaternion, route
from canon.library import builtin, suite
from canon.polynomial import edge_var, poly_to_text, to_ring
from canon.symanzik import (
    forest_poly, graph_ring, mass_form, phi, phi_from_forests, psi, psi_subgraph, symanzik_set,
    two_forests, xi,
)


def variables(graph):
    ring = graph_ring(graph)
    return ring, {e: edge_var(ring, e) for e in graph.edge_ids}


class TestPsi(unittest.TestCase):
    """Test the first Symanzik polynomial"""

    def test_bubble(self):
        """Test Psi of the bubble"""
        graph, _ = builtin('bubble')
        self.assertEqual(poly_to_text(psi(graph)), 'a1+a2')

    def test_one_loop_is_edge_sum(self):
        """Test that one-loop graphs give the sum of all variables"""
        for name in ('triangle', 'box', 'hexagon'):
            graph, _ = builtin(name)
            ring, a = variables(graph)
            self.assertEqual(psi(graph), sum(a.values(), ring.zero), name)

    def test_dunce(self):
        """Test Psi = a3 a4 + (a1 + a2)(a3 + a4)"""
        graph, _ = builtin('dunce')
        _, a = variables(graph)
        self.assertEqual(psi(graph), a[3] * a[4] + (a[1] + a[2]) * (a[3] + a[4]))

    def test_double_bubble_factorizes(self):
        """Test Psi of a one-vertex join is the product"""
        graph, _ = builtin('double_bubble')
        _, a = variables(graph)
        self.assertEqual(psi(graph), (a[1] + a[2]) * (a[3] + a[4]))

    def test_contraction_deletion(self):
        """Test Psi_G = a_e Psi_{G minus e} + Psi_{G/e} on the wheel"""
        graph, _ = builtin('wheel3')
        ring, a = variables(graph)
        deleted = to_ring(psi(delete(graph, [1])), ring)
        contracted = to_ring(psi(contract(graph, [1])), ring)
        self.assertEqual(psi(graph), a[1] * deleted + contracted)

    def test_homogeneous_of_loop_degree(self):
        """Test that every monomial of Psi has degree h"""
        for name, (graph, _) in suite().items():
            h = loop_number(graph)
            degrees = {sum(m[:-1]) for m in psi(graph).monoms()}
            self.assertEqual(degrees, {h}, name)

    def test_psi_of_subgraph(self):
        """Test Psi of connected and disconnected subgraphs"""
        graph, _ = builtin('dunce')
        _, a = variables(graph)
        self.assertEqual(psi_subgraph(graph, [3, 4]), a[3] + a[4])
        self.assertEqual(psi_subgraph(graph, [1, 3, 4]), a[3] + a[4])
        box, _ = builtin('box')
        self.assertEqual(psi_subgraph(box, [1, 3]), graph_ring(box).one)

    def test_tadpole_multiplies(self):
        """Test that a self-edge contributes its variable"""
        graph, _ = builtin('bubble')
        looped = Graph(graph.vertices, graph.edges + (Edge(3, 1, 1),), graph.legs)
        ring, a = variables(looped)
        self.assertEqual(psi(looped), a[3] * (a[1] + a[2]))


class TestPhiAndXi(unittest.TestCase):
    """Test the second Symanzik polynomial and its mass correction"""

    def test_bubble(self):
        """Test Phi = |q1|^2 a1 a2 and Xi with masses 1 and 3"""
        graph, kin = builtin('bubble')
        _, a = variables(graph)
        self.assertEqual(phi(graph, kin), 5 * a[1] * a[2])
        self.assertEqual(xi(graph, kin), a[1] ** 2 + 9 * a[1] * a[2] + 3 * a[2] ** 2)

    def test_triangle(self):
        """Test Phi of the triangle from its three 2-forests"""
        graph, kin = builtin('triangle')
        _, a = variables(graph)
        self.assertEqual(len(two_forests(graph)), 3)
        self.assertEqual(phi(graph, kin), a[1] * a[2] + a[2] * a[3] + 2 * a[1] * a[3])

    def test_massless_xi_is_phi(self):
        """Test Xi at zero masses"""
        for name in ('bubble', 'box', 'wheel3'):
            graph, kin = builtin(name)
            self.assertEqual(xi(graph, kin.massless()), phi(graph, kin), name)

    def test_mass_form(self):
        """Test sum of a_e m_e^2 skips massless labels"""
        graph, kin = builtin('dunce')
        _, a = variables(graph)
        self.assertEqual(mass_form(graph, kin), a[3] + 2 * a[4])

    def test_phi_positive_and_homogeneous(self):
        """Test real nonnegative coefficients and degree h + 1"""
        for name, (graph, kin) in suite().items():
            p = phi(graph, kin)
            self.assertTrue(all(c.y == 0 and c.x >= 0 for c in p.coeffs()), name)
            degrees = {sum(m[:-1]) for m in p.monoms()}
            self.assertEqual(degrees, {loop_number(graph) + 1}, name)

    def test_symanzik_set(self):
        """Test the bundled computation matches the parts"""
        graph, kin = builtin('box')
        bundle = symanzik_set(graph, kin)
        self.assertEqual(bundle.psi, psi(graph))
        self.assertEqual(bundle.phi, phi(graph, kin))
        self.assertEqual(bundle.xi, xi(graph, kin))

    def test_disconnected_rejected(self):
        """Test that Phi needs a connected graph"""
        graph = Graph(((1, 0), (2, 0), (3, 0)), (Edge(1, 1, 2),), (Leg(1, 1), Leg(2, 2)))
        q = Quaternion(1)
        with self.assertRaises(GraphError):
            phi(graph, Kinematics(2, {1: q, 2: -q}))


class TestForests(unittest.TestCase):
    """Test spanning forest polynomials and the forest expansion of Phi"""

    def test_bubble_two_blocks(self):
        """Test phi^{{1},{2}} of the bubble"""
        graph, _ = builtin('bubble')
        _, a = variables(graph)
        self.assertEqual(forest_poly(graph, [{1}, {2}]), a[1] * a[2])

    def test_overlapping_blocks_vanish(self):
        """Test that a vertex in two blocks gives zero"""
        graph, _ = builtin('box')
        self.assertEqual(forest_poly(graph, [{1, 2}, {2, 3}]), graph_ring(graph).zero)

    def test_single_block_is_psi(self):
        """Test that one block holding a vertex recovers Psi"""
        graph, _ = builtin('dunce')
        self.assertEqual(forest_poly(graph, [{1}]), psi(graph))

    def test_phi_from_forests(self):
        """Test the routing expansion against the 2-forest definition"""
        for name, (graph, kin) in suite().items():
            expansion = phi_from_forests(graph, kin, route(graph, kin))
            self.assertEqual(expansion, phi(graph, kin), name)


def run_symanzik_tests():
    """Run the Symanzik polynomial test suite"""
    print("🧪 Running Symanzik Polynomial Tests")
    print("=" * 60)

    test_suite = unittest.TestSuite()
    for test_class in [TestPsi, TestPhiAndXi, TestForests]:
        test_suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))

    result = unittest.TextTestRunner(verbosity=2).run(test_suite)
    print("\n" + "=" * 60)
    print(f"📊 Tests run: {result.testsRun}, failures: {len(result.failures)}, errors: {len(result.errors)}")
    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_symanzik_tests()
    sys.exit(0 if success else 1)
