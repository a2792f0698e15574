#!/usr/bin/env python3
"""
Stokes Relation Test Suite for Canon
Tests the motic product-term plan, residual reports and the five-term box relation
"""

import math
import os
import sys
import unittest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from canon.forms import FIRST_KIND, SECOND_KIND, FormSpec
from canon.integrator import IntegralConfig
from canon.kinematics import KinematicsError, Kinematics, Quaternion
from canon.library import builtin
from canon.stokes import (
    MM_CASE, UV_CASE, StokesError, StokesReport, five_term_box, product_term_plan, recast,
    stokes_residual,
)

CFG = IntegralConfig(samples=20000, batches=10, seed=11)


class TestRecast(unittest.TestCase):
    """Test changing generator kinds"""

    def test_second_to_first(self):
        """Test p1 and p5 map to w1 and w5"""
        mapping = {SECOND_KIND: FIRST_KIND}
        self.assertEqual(recast(FormSpec.parse('p1'), mapping), FormSpec.parse('w1'))
        self.assertEqual(recast(FormSpec.parse('p5'), mapping), FormSpec.parse('w5'))

    def test_missing_first_kind_degree(self):
        """Test p3 has no first-kind counterpart"""
        self.assertTrue(recast(FormSpec.parse('p3'), {SECOND_KIND: FIRST_KIND}).is_zero())

    def test_unit_untouched(self):
        """Test the unit form survives any recast"""
        self.assertEqual(recast(FormSpec.unit(), {SECOND_KIND: FIRST_KIND}), FormSpec.unit())


class TestProductTermPlan(unittest.TestCase):
    """Test the motic subgraph terms before integration"""

    def setUp(self):
        self.graph, self.kin = builtin('dunce')
        self.plan = product_term_plan(self.graph, self.kin, FormSpec.parse('w1^p1'))

    def test_bubble_is_core(self):
        """Test the massive bubble {3,4} enters as a core subgraph"""
        cases = {(tuple(t['gamma']), t['case']) for t in self.plan}
        self.assertIn(((3, 4), UV_CASE), cases)

    def test_mass_momentum_subgraphs(self):
        """Test the spanning trees through the bubble are m.m."""
        mm = {tuple(t['gamma']) for t in self.plan if t['case'] == MM_CASE}
        self.assertEqual(mm, {(1, 3, 4), (2, 3, 4)})

    def test_core_left_side_is_first_kind(self):
        """Test that the subgraph side of a core term only carries w generators"""
        for term in self.plan:
            if term['case'] == UV_CASE:
                self.assertNotIn('p', term['left'])

    def test_left_degrees(self):
        """Test the subgraph side has degree |gamma| - 1"""
        for term in self.plan:
            if not term['left_spec'].is_zero():
                self.assertEqual(term['left_spec'].degree, len(term['gamma']) - 1)

    def test_one_loop_has_no_terms(self):
        """Test a massive one-loop graph has no strict motic subgraphs"""
        graph, kin = builtin('pentagon')
        self.assertEqual(product_term_plan(graph, kin, FormSpec.parse('p3')), [])


class TestStokesResidual(unittest.TestCase):
    """Test assembled Stokes relations"""

    def test_o1_refused(self):
        """Test that o1 has no Stokes relation here"""
        graph, kin = builtin('triangle')
        with self.assertRaises(StokesError):
            stokes_residual(graph, kin, FormSpec.parse('o1'), CFG)

    def test_degree_mismatch(self):
        """Test that the form degree must be N - 2"""
        graph, kin = builtin('box')
        with self.assertRaises(StokesError):
            stokes_residual(graph, kin, FormSpec.parse('p3'), CFG)

    def test_non_generic(self):
        """Test that degenerate momenta are refused"""
        graph, kin = builtin('triangle')
        degenerate = Kinematics(2, {1: Quaternion(1), 2: Quaternion(-1), 3: Quaternion(0)}, kin.masses)
        with self.assertRaises(KinematicsError):
            stokes_residual(graph, degenerate, FormSpec.parse('p1'), CFG)

    def test_one_loop_first_kind_terms_vanish(self):
        """Test w1 ^ p1 on the box: d log Psi is zero along the slice"""
        graph, kin = builtin('box')
        report = stokes_residual(graph, kin, FormSpec.parse('w1^p1'), CFG)
        self.assertEqual(len(report.edge_terms), 4)
        self.assertEqual(report.product_terms, [])
        self.assertLess(abs(report.total), 1e-12)
        self.assertTrue(report.passed())

    def test_two_loop_motic_terms(self):
        """Test p3 on the kite: the infrared product terms close the relation"""
        graph, kin = builtin('kite')
        cfg = IntegralConfig(samples=40000, batches=10, seed=3)
        report = stokes_residual(graph, kin, FormSpec.parse('p3'), cfg)
        self.assertEqual(len(report.edge_terms), 5)

        uv = [t for t in report.product_terms if t['case'] == UV_CASE]
        mm = [t for t in report.product_terms if t['case'] == MM_CASE]
        self.assertEqual([tuple(t['gamma']) for t in uv], [(1, 2, 3, 4)])
        self.assertTrue(uv[0]['structural_zero'])
        self.assertEqual(sorted(tuple(t['gamma']) for t in mm), [(1, 2, 3, 5), (1, 2, 4, 5), (1, 3, 4, 5)])
        for term in mm:
            self.assertFalse(term['structural_zero'])
            self.assertEqual((term['left'], term['right']), ('p3', '1'))
            self.assertGreater(abs(complex(*term['estimate'])), 0.0)

        self.assertTrue(report.consistent(sigmas=5.0))

    def test_five_term_relation(self):
        """Test the five box integrals of p3 sum to zero"""
        graph, kin = builtin('pentagon')
        report = five_term_box(kin, CFG, cross_check=True, pentagon=graph)
        self.assertEqual(len(report.edge_terms), 5)
        self.assertGreater(report.scale, 0.0)
        self.assertTrue(report.consistent(sigmas=5.0))
        self.assertEqual(len(report.cross_checks), 5)
        for row, check in zip(report.edge_terms, report.cross_checks):
            combined = math.hypot(row['stderr'], check['stderr'])
            self.assertLessEqual(check['difference'], 5 * combined + 1e-12)

    def test_edge_terms_use_sub_seeds(self):
        """Test the edge terms are independent but reproducible"""
        graph, kin = builtin('pentagon')
        first = stokes_residual(graph, kin, FormSpec.parse('p3'), CFG)
        again = stokes_residual(graph, kin, FormSpec.parse('p3'), CFG)
        self.assertEqual(first.to_dict()['total'], again.to_dict()['total'])
        self.assertEqual(first.config['seed'], 11)

    def test_orientation_flip(self):
        """Test reversing the pentagon negates every term"""
        graph, kin = builtin('pentagon')
        forward = stokes_residual(graph, kin, FormSpec.parse('p3'), CFG)
        backward = stokes_residual(graph.reversed(), kin, FormSpec.parse('p3'), CFG)
        for a, b in zip(forward.edge_terms, backward.edge_terms):
            self.assertAlmostEqual(a['estimate'][0], -b['estimate'][0], places=12)
        self.assertAlmostEqual(forward.residual_ratio, backward.residual_ratio, places=12)

    def test_five_term_needs_dim_2(self):
        """Test the quaternionic case is refused"""
        _, kin = builtin('hexagon')
        with self.assertRaises(StokesError):
            five_term_box(kin, CFG)


class TestStokesReport(unittest.TestCase):
    """Test report arithmetic and tables"""

    def setUp(self):
        self.report = StokesReport('toy', 'p3')
        self.report.edge_terms = [
            {'edge': 1, 'estimate': [1.0, 0.0], 'stderr': 0.03, 'method': 'monte-carlo'},
            {'edge': 2, 'estimate': [-0.98, 0.0], 'stderr': 0.04, 'method': 'monte-carlo'},
        ]
        self.report.product_terms = [{
            'gamma': [1, 2], 'case': UV_CASE, 'left': 'w1', 'right': 'p1', 'sign': -1,
            'structural_zero': False, 'estimate': [0.0, 0.0], 'stderr': 0.0,
        }]

    def test_totals(self):
        """Test the total, combined error and residual ratio"""
        self.assertAlmostEqual(self.report.total.real, 0.02)
        self.assertAlmostEqual(self.report.stderr, 0.05)
        self.assertAlmostEqual(self.report.scale, 1.0)
        self.assertAlmostEqual(self.report.residual_ratio, 0.02)
        self.assertTrue(self.report.consistent())
        self.assertFalse(self.report.passed(sigmas=0.1))

    def test_dataframe(self):
        """Test one table row per term"""
        table = self.report.to_dataframe()
        self.assertEqual(list(table['Type']), ['edge', 'edge', UV_CASE])
        self.assertEqual(table['Term'].iloc[0], 'G/1')
        self.assertEqual(table['Term'].iloc[2], '{1,2}: w1 | p1')

    def test_empty_report(self):
        """Test an empty report passes trivially"""
        report = StokesReport('toy', 'p3')
        self.assertEqual(report.scale, 0.0)
        self.assertEqual(report.residual_ratio, 0.0)
        self.assertTrue(report.consistent())


def run_stokes_tests():
    """Run the Stokes relation test suite"""
    print("🧪 Running Stokes Relation Tests")
    print("=" * 60)

    test_suite = unittest.TestSuite()
    for test_class in [TestRecast, TestProductTermPlan, TestStokesResidual, TestStokesReport]:
        test_suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))

    result = unittest.TextTestRunner(verbosity=2).run(test_suite)
    print("\n" + "=" * 60)
    print(f"📊 Tests run: {result.testsRun}, failures: {len(result.failures)}, errors: {len(result.errors)}")
    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_stokes_tests()
    sys.exit(0 if success else 1)
