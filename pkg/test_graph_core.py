#!/usr/bin/env python3
"""
Graph Core Test Suite for Canon
Tests contraction, spanning trees and forests, cycle bases and subgraph
classification on the built-in graphs
"""

import os
import sys
import unittest
from itertools import combinations

import networkx as nx

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from canon.graph_core import (
    Edge, Graph, GraphError, Leg, classify_subgraph, contract, cycle_basis, delete,
    is_core, is_motic, loop_number, motic_subgraphs, spanning_forests, spanning_trees,
    subgraph_graph,
)
from canon.kinematics import Kinematics, KinematicsError, Quaternion
from canon.library import banana, builtin, load_graph


def boundary(graph, cycle):
    out = {v: 0 for v in graph.vertex_ids}
    for edge_id, coeff in cycle.items():
        edge = graph.edge(edge_id)
        out[edge.source] -= coeff
        out[edge.target] += coeff
    return out


class TestGraphModel(unittest.TestCase):
    """Test graph construction and validation"""

    def test_loop_numbers(self):
        """Test h = E - V + components on the library graphs"""
        self.assertEqual(load_graph('bubble').loop_number(), 1)
        self.assertEqual(load_graph('box').loop_number(), 1)
        self.assertEqual(load_graph('wheel3').loop_number(), 3)
        self.assertEqual(load_graph('dunce').loop_number(), 2)
        self.assertEqual(banana(5).loop_number(), 4)
        self.assertEqual(loop_number(banana(3)), 2)

    def test_undeclared_endpoint_rejected(self):
        """Test that edges must end at declared vertices"""
        with self.assertRaises(GraphError):
            Graph(((1, 0),), (Edge(1, 1, 2),))

    def test_duplicate_edge_ids_rejected(self):
        """Test that edge ids are unique"""
        with self.assertRaises(GraphError):
            Graph(((1, 0), (2, 0)), (Edge(1, 1, 2), Edge(1, 2, 1)))

    def test_from_dict_requires_contiguous_ids(self):
        """Test that input edge ids must be 1..N"""
        data = {'vertices': [{'id': 1}, {'id': 2}],
                'edges': [{'id': 1, 'source': 1, 'target': 2}, {'id': 3, 'source': 2, 'target': 1}]}
        with self.assertRaises(GraphError):
            Graph.from_dict(data)

    def test_orientation_list_gives_parity(self):
        """Test that an odd edge order flips the orientation"""
        data = load_graph('bubble').to_dict()
        data['orientation'] = [2, 1]
        self.assertEqual(Graph.from_dict(data).orientation, -1)
        data['orientation'] = [1, 2]
        self.assertEqual(Graph.from_dict(data).orientation, 1)

    def test_dict_round_trip_keeps_orientation(self):
        """Test that to_dict records a reversed orientation"""
        graph = load_graph('box').reversed()
        again = Graph.from_dict(graph.to_dict())
        self.assertEqual(again.orientation, -1)
        self.assertEqual(again.edges, graph.edges)


class TestContraction(unittest.TestCase):
    """Test edge contraction and deletion"""

    def test_box_contract_one_edge(self):
        """Test box/{e1} is a triangle with legs 1 and 4 on the merged vertex"""
        box = load_graph('box')
        tri = contract(box, [1])
        self.assertEqual(tri.edge_ids, [2, 3, 4])
        self.assertEqual(tri.num_vertices, 3)
        self.assertEqual(tri.loop_number(), 1)
        legs = {leg.index: leg.vertex for leg in tri.legs}
        self.assertEqual(legs[1], legs[4])
        self.assertEqual(tri.orientation, 1)

    def test_contract_second_edge_flips_orientation(self):
        """Test that removing the edge in position 2 changes the sign"""
        box = load_graph('box')
        self.assertEqual(contract(box, [2]).orientation, -1)
        self.assertEqual(contract(box, [3]).orientation, 1)

    def test_tadpole_contraction_raises_weight(self):
        """Test that contracting a self-edge deletes it and adds one to the weight"""
        graph = Graph(((1, 0), (2, 0)), (Edge(1, 1, 2), Edge(2, 2, 1), Edge(3, 1, 1)),
                      (Leg(1, 1), Leg(2, 2)))
        quotient = contract(graph, [3])
        self.assertEqual(quotient.edge_ids, [1, 2])
        self.assertEqual(quotient.weights[1], 1)
        self.assertEqual(quotient.genus(), graph.genus())

    def test_full_box_contraction_keeps_genus(self):
        """Test box/E is a single vertex of weight one with four legs"""
        box = load_graph('box')
        point = contract(box, box.edge_ids)
        self.assertEqual(point.num_edges, 0)
        self.assertEqual(point.vertices, ((1, 1),))
        self.assertEqual(len(point.legs), 4)
        self.assertEqual(point.genus(), 1)

    def test_genus_preserved_by_every_contraction(self):
        """Test g(G/gamma) = g(G) over all subsets of small graphs"""
        for name in ('dunce', 'double_bubble', 'box'):
            graph = load_graph(name)
            for size in range(len(graph.edge_ids) + 1):
                for gamma in combinations(graph.edge_ids, size):
                    self.assertEqual(contract(graph, gamma).genus(), graph.genus(), (name, gamma))

    def test_delete_keeps_vertices(self):
        """Test that deletion keeps every vertex and leg"""
        box = load_graph('box')
        path = delete(box, [1])
        self.assertEqual(path.num_vertices, 4)
        self.assertEqual(len(path.legs), 4)
        self.assertEqual(path.loop_number(), 0)

    def test_unknown_edge_rejected(self):
        """Test that contracting a missing edge raises"""
        with self.assertRaises(GraphError):
            contract(load_graph('bubble'), [7])

    def test_subgraph_graph_drops_legs(self):
        """Test that a subgraph keeps only its own vertices"""
        dunce = load_graph('dunce')
        sub = subgraph_graph(dunce, [3, 4], keep_legs=False)
        self.assertEqual(sub.vertex_ids, [2, 3])
        self.assertEqual(sub.legs, ())
        self.assertEqual(sub.loop_number(), 1)


class TestTreesAndForests(unittest.TestCase):
    """Test spanning tree and forest enumeration"""

    def test_bubble_trees(self):
        """Test the bubble has the two single-edge trees"""
        self.assertEqual(spanning_trees(load_graph('bubble')), [frozenset({1}), frozenset({2})])

    def test_box_trees(self):
        """Test the box trees are the four 3-edge subsets"""
        trees = spanning_trees(load_graph('box'))
        self.assertEqual(len(trees), 4)
        self.assertTrue(all(len(t) == 3 for t in trees))

    def test_dunce_tree_complements(self):
        """Test the dunce's cap tree complements are 13, 14, 23, 24, 34"""
        dunce = load_graph('dunce')
        complements = {frozenset(dunce.edge_ids) - t for t in spanning_trees(dunce)}
        expected = {frozenset(p) for p in [(1, 3), (1, 4), (2, 3), (2, 4), (3, 4)]}
        self.assertEqual(complements, expected)

    def test_wheel_tree_count(self):
        """Test K4 has 16 spanning trees"""
        self.assertEqual(len(spanning_trees(load_graph('wheel3'))), 16)

    def test_disconnected_rejected(self):
        """Test that trees need a connected graph"""
        graph = Graph(((1, 0), (2, 0), (3, 0)), (Edge(1, 1, 2),))
        with self.assertRaises(GraphError):
            spanning_trees(graph)

    def test_bubble_empty_forest(self):
        """Test the bubble forest for {s},{t} is the empty forest"""
        self.assertEqual(spanning_forests(load_graph('bubble'), [[1], [2]]), [frozenset()])

    def test_box_opposite_corners(self):
        """Test opposite box corners admit no forest"""
        self.assertEqual(spanning_forests(load_graph('box'), [[1, 3], [2, 4]]), [])

    def test_overlapping_blocks(self):
        """Test overlapping blocks give no forests"""
        self.assertEqual(spanning_forests(load_graph('box'), [[1, 2], [2, 3]]), [])

    def test_forests_match_brute_force(self):
        """Test dunce's cap forests against a subset filter"""
        dunce = load_graph('dunce')
        found = set(spanning_forests(dunce, [{2}, {3}]))
        expected = set()
        for subset in combinations(dunce.edge_ids, dunce.num_vertices - 2):
            mg = dunce.multigraph(subset)
            if nx.number_connected_components(mg) == 2 and not nx.has_path(mg, 2, 3):
                expected.add(frozenset(subset))
        self.assertEqual(found, expected)
        self.assertEqual(found, {frozenset({1}), frozenset({2})})

    def test_unknown_vertex_rejected(self):
        """Test that partitions must use known vertices"""
        with self.assertRaises(GraphError):
            spanning_forests(load_graph('bubble'), [[1], [9]])


class TestCycleBasis(unittest.TestCase):
    """Test cycle bases and the marked-edge property"""

    def test_bubble_marked(self):
        """Test the bubble cycle is e1 + e2"""
        self.assertEqual(cycle_basis(load_graph('bubble'), [1]), [{1: 1, 2: 1}])

    def test_banana_cycles(self):
        """Test banana cycles c_i = e_i + e_n"""
        graph = banana(4)
        self.assertEqual(cycle_basis(graph), [{1: 1, 4: 1}, {2: 1, 4: 1}, {3: 1, 4: 1}])

    def test_cycles_are_closed(self):
        """Test every basis vector has zero boundary"""
        for name in ('dunce', 'wheel3', 'double_bubble', 'box_triangle'):
            graph = load_graph(name)
            basis = cycle_basis(graph)
            self.assertEqual(len(basis), graph.loop_number())
            for cycle in basis:
                self.assertFalse(any(boundary(graph, cycle).values()), (name, cycle))

    def test_marked_delta_property(self):
        """Test marked edge i appears only in cycle i with coefficient one"""
        wheel = load_graph('wheel3')
        marked = [2, 5]
        basis = cycle_basis(wheel, marked)
        for i, edge_id in enumerate(marked):
            for j, cycle in enumerate(basis):
                self.assertEqual(cycle.get(edge_id, 0), int(i == j))

    def test_too_many_marked(self):
        """Test that more marked edges than loops is an error"""
        with self.assertRaises(GraphError):
            cycle_basis(load_graph('box'), [1, 2])

    def test_disconnecting_marks(self):
        """Test that marks whose removal disconnects the graph are rejected"""
        graph = Graph(((1, 0), (2, 0), (3, 0)),
                      (Edge(1, 1, 2), Edge(2, 2, 1), Edge(3, 2, 3), Edge(4, 3, 2)))
        with self.assertRaises(GraphError):
            cycle_basis(graph, [1, 2])


class TestSubgraphClasses(unittest.TestCase):
    """Test core, m.m. and motic subgraphs"""

    def test_dunce_divergent_subgraph(self):
        """Test the dunce's cap edges 3, 4 are core but not m.m."""
        dunce, kin = builtin('dunce')
        flags = classify_subgraph(dunce, [3, 4], kin)
        self.assertTrue(flags.core)
        self.assertFalse(flags.mm)

    def test_whole_graph_is_mm(self):
        """Test that E(G) is always m.m."""
        for name in ('bubble', 'box', 'dunce', 'wheel3'):
            graph, kin = builtin(name)
            self.assertTrue(classify_subgraph(graph, graph.edge_ids, kin).mm, name)

    def test_bubble_massless_edge(self):
        """Test that one massive bubble edge is m.m. when the other is massless"""
        graph, kin = builtin('bubble')
        kin = kin.with_masses({1: 1, 2: 0})
        flags = classify_subgraph(graph, [1], kin)
        self.assertTrue(flags.mass_spanning)
        self.assertTrue(flags.momentum_spanning)
        self.assertTrue(flags.mm)

    def test_path_is_not_core(self):
        """Test that a forest is never core"""
        self.assertFalse(is_core(load_graph('box'), [1, 2]))

    def test_motic_examples(self):
        """Test motic subgraph lists of the bubble, pentagon and dunce's cap"""
        self.assertEqual(motic_subgraphs(*builtin('bubble')), [])
        self.assertEqual(motic_subgraphs(*builtin('pentagon')), [])
        dunce_motic = [s.sorted_edges() for s in motic_subgraphs(*builtin('dunce'))]
        self.assertEqual(set(dunce_motic), {(3, 4), (1, 2, 3), (1, 2, 4), (1, 3, 4), (2, 3, 4)})

    def test_motic_filter_is_idempotent(self):
        """Test that every listed subgraph passes the motic predicate again"""
        dunce, kin = builtin('dunce')
        for sub in motic_subgraphs(dunce, kin):
            self.assertTrue(is_motic(dunce, sub.edges, kin))

    def test_motic_needs_generic_kinematics(self):
        """Test that null subset momenta are refused"""
        box = load_graph('box')
        q = Quaternion(1, 2)
        kin = Kinematics(2, {1: q, 2: -q, 3: Quaternion(0, 1), 4: Quaternion(0, -1)},
                         {1: 1, 2: 1, 3: 1, 4: 1})
        with self.assertRaises(KinematicsError):
            motic_subgraphs(box, kin)


def run_graph_core_tests():
    """Run the graph core test suite"""
    print("🧪 Running Graph Core Tests")
    print("=" * 60)

    test_suite = unittest.TestSuite()
    for test_class in [TestGraphModel, TestContraction, TestTreesAndForests, TestCycleBasis, TestSubgraphClasses]:
        test_suite.addTests(unittest.TestLoader().loadTestsFromTestCase(test_class))

    result = unittest.TextTestRunner(verbosity=2).run(test_suite)
    print("\n" + "=" * 60)
    print(f"📊 Tests run: {result.testsRun}, failures: {len(result.failures)}, errors: {len(result.errors)}")
    return result.wasSuccessful()


if __name__ == "__main__":
    success = run_graph_core_tests()
    sys.exit(0 if success else 1)
