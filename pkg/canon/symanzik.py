"""
Symanzik Polynomial Module for Canon

First and second Symanzik polynomials, the mass-corrected polynomial Xi,
spanning forest polynomials and the forest expansion of Phi in terms of a
momentum routing.
"""

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Any, Iterable, List, Optional, Sequence

import networkx as nx
from sympy.polys.rings import PolyElement, PolyRing

from canon.graph_core import (
    Graph, GraphError, contract, edge_set, spanning_forests, spanning_trees, subgraph_graph,
)
from canon.kinematics import Kinematics, Routing, ZERO, validate_routing
from canon.polynomial import constant, edge_var, poly_ring, to_ring

# Configure logging
logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SymanzikSet:
    psi: PolyElement
    phi: PolyElement
    xi: PolyElement


def graph_ring(graph: Graph) -> PolyRing:
    """Polynomial ring of a graph's edge variables."""
    return poly_ring(graph.edge_ids)


def _complement_monomial(ring: PolyRing, graph: Graph, kept: Iterable[int]) -> PolyElement:
    kept = set(kept)
    term = ring.one
    for edge_id in graph.edge_ids:
        if edge_id not in kept:
            term *= edge_var(ring, edge_id)
    return term


def psi(graph: Graph, ring: Optional[PolyRing] = None) -> PolyElement:
    """
    First Symanzik polynomial, the sum over spanning trees T of the product
    of a_e for e not in T.

    Args:
        graph (Graph): Connected graph
        ring (PolyRing, optional): Target ring; the graph's own if None

    Returns:
        PolyElement: Psi_G
    """
    ring = ring or graph_ring(graph)
    total = ring.zero
    for tree in spanning_trees(graph):
        total += _complement_monomial(ring, graph, tree)
    return total


def psi_subgraph(graph: Graph, gamma: Any, ring: Optional[PolyRing] = None) -> PolyElement:
    """
    Psi of the subgraph gamma, the product over its connected components.
    """
    ring = ring or graph_ring(graph)
    ids = edge_set(graph, gamma)
    sub = subgraph_graph(graph, ids, keep_legs=False)
    total = ring.one
    for component in nx.connected_components(sub.multigraph()):
        comp_edges = [e.id for e in sub.edges if e.source in component]
        total *= psi(subgraph_graph(sub, comp_edges, keep_legs=False), ring)
    return total


def forest_poly(graph: Graph, partition: Sequence[Iterable[int]],
                ring: Optional[PolyRing] = None) -> PolyElement:
    """
    Spanning forest polynomial phi_G^P.

    Args:
        graph (Graph): Connected graph
        partition: Blocks of vertex ids; overlapping blocks give 0
        ring (PolyRing, optional): Target ring

    Returns:
        PolyElement: Sum over admissible forests of the complement monomials
    """
    ring = ring or graph_ring(graph)
    total = ring.zero
    for forest in spanning_forests(graph, partition):
        total += _complement_monomial(ring, graph, forest)
    return total


def two_forests(graph: Graph) -> List[frozenset]:
    """Spanning forests with exactly two trees."""
    size = graph.num_vertices - 2
    if size < 0:
        return []
    candidates = [e for e in graph.edges if not e.is_tadpole]
    forests = []
    for subset in combinations(candidates, size):
        uf = nx.utils.UnionFind(graph.vertex_ids)
        acyclic = True
        for edge in subset:
            if uf[edge.source] == uf[edge.target]:
                acyclic = False
                break
            uf.union(edge.source, edge.target)
        if acyclic:
            forests.append(frozenset(e.id for e in subset))
    return forests


def phi(graph: Graph, kin: Kinematics, ring: Optional[PolyRing] = None) -> PolyElement:
    """
    Second Symanzik polynomial: sum over spanning 2-forests T1 u T2 of
    |q^{T1}|^2 times the complement monomial.

    Args:
        graph (Graph): Connected graph
        kin (Kinematics): External momenta

    Returns:
        PolyElement: Phi_G(q), real with nonnegative coefficients
    """
    if not graph.is_connected():
        raise GraphError(f"Graph {graph.name!r} is not connected")
    kin.check_compatible(graph)
    ring = ring or graph_ring(graph)
    q = kin.vertex_momenta(graph)
    total = ring.zero
    for forest in two_forests(graph):
        mg = nx.Graph()
        mg.add_nodes_from(graph.vertex_ids)
        for edge_id in forest:
            edge = graph.edge(edge_id)
            mg.add_edge(edge.source, edge.target)
        first = next(iter(nx.connected_components(mg)))
        q_tree = sum((q[v] for v in first), ZERO)
        weight = q_tree.norm2()
        if weight:
            total += constant(ring, weight) * _complement_monomial(ring, graph, forest)
    return total


def mass_form(graph: Graph, kin: Kinematics, ring: Optional[PolyRing] = None) -> PolyElement:
    """Sum of a_e m_e^2 over the edges."""
    ring = ring or graph_ring(graph)
    total = ring.zero
    for edge in graph.edges:
        m2 = kin.mass_sq(edge.mass_label)
        if m2:
            total += constant(ring, m2) * edge_var(ring, edge.id)
    return total


def xi(graph: Graph, kin: Kinematics, ring: Optional[PolyRing] = None) -> PolyElement:
    """
    Xi_G(q, m) = Phi_G(q) + (sum_e a_e m_e^2) Psi_G.
    """
    ring = ring or graph_ring(graph)
    return phi(graph, kin, ring) + mass_form(graph, kin, ring) * psi(graph, ring)


def symanzik_set(graph: Graph, kin: Kinematics) -> SymanzikSet:
    ring = graph_ring(graph)
    psi_g = psi(graph, ring)
    phi_g = phi(graph, kin, ring)
    return SymanzikSet(psi_g, phi_g, phi_g + mass_form(graph, kin, ring) * psi_g)


def phi_from_forests(graph: Graph, kin: Kinematics, routing: Routing,
                     ring: Optional[PolyRing] = None) -> PolyElement:
    """
    Phi expressed through a momentum routing:

        sum_e (mu_e . mu_e) a_e Psi_{G//e}
        + sum_{e != f} (mu_e . mu_f) (phi^{{s(e),s(f)},{t(e),t(f)}}
                                      - phi^{{s(e),t(f)},{s(f),t(e)}})

    Every forest admitted by either partition avoids e and f, so the forest
    polynomials of G already carry the factor a_e a_f. Tadpoles contribute
    nothing.

    Args:
        graph (Graph): Connected graph
        kin (Kinematics): External momenta
        routing (Routing): Valid routing

    Returns:
        PolyElement: Phi_G(q)
    """
    validate_routing(graph, kin, routing)
    ring = ring or graph_ring(graph)
    active = [e for e in graph.edges if not e.is_tadpole and not routing[e.id].is_zero()]
    total = ring.zero

    for edge in active:
        mu = routing[edge.id]
        quotient_psi = to_ring(psi(contract(graph, [edge.id])), ring)
        total += constant(ring, mu.dot(mu)) * edge_var(ring, edge.id) * quotient_psi

    for e in active:
        for f in active:
            if e.id == f.id:
                continue
            weight = routing[e.id].dot(routing[f.id])
            if not weight:
                continue
            same = forest_poly(graph, [{e.source, f.source}, {e.target, f.target}], ring)
            crossed = forest_poly(graph, [{e.source, f.target}, {f.source, e.target}], ring)
            diff = same - crossed
            if diff:
                total += constant(ring, weight) * diff
    return total
