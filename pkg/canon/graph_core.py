"""
Graph Core Module for Canon

Feynman graphs with vertex weights, mass labels and external legs:
contraction and deletion, spanning trees and forests, cycle bases and the
subgraph classes (core, mass-momentum spanning, motic) used by the Stokes
relations.
"""

import logging
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
from sympy.combinatorics import Permutation

# Configure logging
logger = logging.getLogger(__name__)


class GraphError(ValueError):
    """Raised for malformed graphs and invalid graph operations."""


@dataclass(frozen=True, order=True)
class Edge:
    id: int
    source: int
    target: int
    mass_label: int = 0

    @property
    def is_tadpole(self) -> bool:
        return self.source == self.target


@dataclass(frozen=True, order=True)
class Leg:
    index: int
    vertex: int


@dataclass(frozen=True)
class Graph:
    """
    Immutable weighted graph with masses and external legs.

    orientation is the sign of the edge ordering e_1 ^ ... ^ e_N relative to
    increasing edge ids.
    """
    vertices: Tuple[Tuple[int, int], ...]
    edges: Tuple[Edge, ...]
    legs: Tuple[Leg, ...] = ()
    orientation: int = 1
    name: str = ''
    _edge_map: Dict[int, Edge] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, 'vertices', tuple(sorted((int(v), int(w)) for v, w in self.vertices)))
        object.__setattr__(self, 'edges', tuple(sorted(self.edges)))
        object.__setattr__(self, 'legs', tuple(sorted(self.legs)))
        object.__setattr__(self, '_edge_map', {e.id: e for e in self.edges})
        is_valid, error_msg = self.validate()
        if not is_valid:
            raise GraphError(error_msg)

    def validate(self) -> Tuple[bool, str]:
        """
        Check endpoints, weights, ids and orientation.

        Returns:
            Tuple[bool, str]: (is_valid, error_message)
        """
        vertex_ids = [v for v, _ in self.vertices]
        if len(set(vertex_ids)) != len(vertex_ids):
            return False, "Duplicate vertex ids"
        if any(w < 0 for _, w in self.vertices):
            return False, "Vertex weights must be nonnegative"
        declared = set(vertex_ids)
        if len(self._edge_map) != len(self.edges):
            return False, "Duplicate edge ids"
        for edge in self.edges:
            if edge.id <= 0:
                return False, f"Edge ids must be positive, got {edge.id}"
            if edge.source not in declared or edge.target not in declared:
                return False, f"Edge {edge.id} has an undeclared endpoint"
            if edge.mass_label < 0:
                return False, f"Edge {edge.id} has a negative mass label"
        indices = [leg.index for leg in self.legs]
        if len(set(indices)) != len(indices):
            return False, "Duplicate leg indices"
        for leg in self.legs:
            if leg.vertex not in declared:
                return False, f"Leg {leg.index} is attached to undeclared vertex {leg.vertex}"
        if self.orientation not in (1, -1):
            return False, f"Orientation must be +1 or -1, got {self.orientation}"
        return True, ""

    # Basic accessors

    @property
    def vertex_ids(self) -> List[int]:
        return [v for v, _ in self.vertices]

    @property
    def weights(self) -> Dict[int, int]:
        return dict(self.vertices)

    @property
    def edge_ids(self) -> List[int]:
        return [e.id for e in self.edges]

    @property
    def leg_indices(self) -> List[int]:
        return [leg.index for leg in self.legs]

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def edge(self, edge_id: int) -> Edge:
        try:
            return self._edge_map[edge_id]
        except KeyError as e:
            raise GraphError(f"Unknown edge id {edge_id} in graph {self.name!r}") from e

    def multigraph(self, edge_ids: Optional[Iterable[int]] = None) -> nx.MultiGraph:
        """Underlying networkx multigraph on all vertices, keyed by edge id."""
        mg = nx.MultiGraph()
        mg.add_nodes_from(self.vertex_ids)
        chosen = self.edge_ids if edge_ids is None else edge_ids
        for edge_id in chosen:
            edge = self.edge(edge_id)
            mg.add_edge(edge.source, edge.target, key=edge_id)
        return mg

    def is_connected(self) -> bool:
        return self.num_vertices > 0 and nx.is_connected(self.multigraph())

    def loop_number(self) -> int:
        return loop_number(self)

    def genus(self) -> int:
        """h_G plus the total vertex weight."""
        return loop_number(self) + sum(self.weights.values())

    def with_orientation(self, orientation: int) -> 'Graph':
        return replace(self, orientation=orientation)

    def reversed(self) -> 'Graph':
        """Same graph with the opposite edge-order orientation."""
        return replace(self, orientation=-self.orientation)

    def renamed(self, name: str) -> 'Graph':
        return replace(self, name=name)

    # Serialization

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], name: str = '') -> 'Graph':
        """
        Parse the graph JSON layout.

        Edge ids must be contiguous 1..N on input. An optional `orientation`
        list gives the edge order; its sign is the parity of that order.

        Args:
            data: {vertices, edges, legs, orientation?}
            name (str): Graph name used in logs and reports

        Returns:
            Graph: Parsed graph
        """
        try:
            vertices = [(int(v['id']), int(v.get('weight', 0))) for v in data['vertices']]
            edges = [
                Edge(int(e['id']), int(e['source']), int(e['target']), int(e.get('mass_label', 0)))
                for e in data['edges']
            ]
            legs = [Leg(int(l['index']), int(l['vertex'])) for l in data.get('legs', [])]
        except (KeyError, TypeError, ValueError) as e:
            raise GraphError(f"Malformed graph data: {e}") from e

        ids = sorted(e.id for e in edges)
        if ids != list(range(1, len(ids) + 1)):
            raise GraphError(f"Edge ids must be contiguous 1..N, got {ids}")
        leg_ids = sorted(l.index for l in legs)
        if leg_ids != list(range(1, len(leg_ids) + 1)):
            raise GraphError(f"Leg indices must be contiguous 1..n, got {leg_ids}")

        orientation = 1
        order = data.get('orientation')
        if order is not None:
            order = [int(e) for e in order]
            if sorted(order) != ids:
                raise GraphError("Orientation must list every edge id exactly once")
            orientation = -1 if Permutation([e - 1 for e in order]).parity() else 1
        return cls(tuple(vertices), tuple(edges), tuple(legs), orientation,
                   name or str(data.get('name', '')))

    def to_dict(self) -> Dict[str, Any]:
        data = {
            'name': self.name,
            'vertices': [{'id': v, 'weight': w} for v, w in self.vertices],
            'edges': [
                {'id': e.id, 'source': e.source, 'target': e.target, 'mass_label': e.mass_label}
                for e in self.edges
            ],
            'legs': [{'index': l.index, 'vertex': l.vertex} for l in self.legs],
        }
        if self.orientation == -1:
            ids = self.edge_ids
            data['orientation'] = [ids[1], ids[0]] + ids[2:] if len(ids) > 1 else ids
        return data


@dataclass(frozen=True)
class Subgraph:
    """A set of edge ids of a parent graph."""
    parent: str
    edges: FrozenSet[int]

    def __len__(self):
        return len(self.edges)

    def sorted_edges(self) -> Tuple[int, ...]:
        return tuple(sorted(self.edges))


@dataclass(frozen=True)
class SubgraphFlags:
    core: bool
    mass_spanning: bool
    momentum_spanning: bool

    @property
    def mm(self) -> bool:
        return self.mass_spanning and self.momentum_spanning

    def to_dict(self) -> Dict[str, bool]:
        return {'core': self.core, 'mass_spanning': self.mass_spanning,
                'momentum_spanning': self.momentum_spanning, 'mm': self.mm}


def edge_set(graph: Graph, gamma: Any) -> FrozenSet[int]:
    """
    Normalize a Subgraph or an iterable of edge ids against a graph.

    Raises:
        GraphError: On unknown edge ids
    """
    ids = gamma.edges if isinstance(gamma, Subgraph) else gamma
    ids = frozenset(int(e) for e in ids)
    unknown = ids - set(graph.edge_ids)
    if unknown:
        raise GraphError(f"Unknown edge ids {sorted(unknown)} in graph {graph.name!r}")
    return ids


def _format_edges(ids: Iterable[int]) -> str:
    return ','.join(str(e) for e in sorted(ids))


def loop_number(graph: Graph) -> int:
    """
    First Betti number E - V + #components.

    Args:
        graph (Graph): Any graph

    Returns:
        int: Number of independent loops
    """
    if graph.num_vertices == 0:
        return 0
    components = nx.number_connected_components(graph.multigraph())
    return graph.num_edges - graph.num_vertices + components


def _spanning_loop_number(graph: Graph, ids: Iterable[int]) -> int:
    """Loop number of the spanning subgraph (V(G), ids)."""
    ids = list(ids)
    components = nx.number_connected_components(graph.multigraph(ids))
    return len(ids) - graph.num_vertices + components


def contract(graph: Graph, gamma: Any) -> Graph:
    """
    Contract the edges of gamma one at a time in increasing id order.

    A non-tadpole edge merges its endpoints into the smaller vertex id and
    adds the weights; a tadpole is removed and its vertex weight goes up by
    one. Legs follow their vertices. Each removal multiplies the recorded
    orientation by (-1)^(pos-1), pos being the 1-based position of the edge
    among the remaining ones.

    Args:
        graph (Graph): Graph to contract
        gamma: Subgraph or edge ids

    Returns:
        Graph: The quotient G/gamma
    """
    ids = edge_set(graph, gamma)
    weights = graph.weights
    edges = {e.id: e for e in graph.edges}
    legs = list(graph.legs)
    sign = graph.orientation

    for edge_id in sorted(ids):
        current = sorted(edges)
        pos = current.index(edge_id) + 1
        if pos % 2 == 0:
            sign = -sign
        edge = edges.pop(edge_id)
        if edge.is_tadpole:
            weights[edge.source] += 1
            continue
        keep, drop = min(edge.source, edge.target), max(edge.source, edge.target)
        weights[keep] += weights.pop(drop)
        for other_id, other in list(edges.items()):
            if drop in (other.source, other.target):
                edges[other_id] = replace(
                    other,
                    source=keep if other.source == drop else other.source,
                    target=keep if other.target == drop else other.target,
                )
        legs = [Leg(l.index, keep) if l.vertex == drop else l for l in legs]

    name = f"{graph.name}/{{{_format_edges(ids)}}}" if ids else graph.name
    return Graph(tuple(weights.items()), tuple(edges.values()), tuple(legs), sign, name)


def delete(graph: Graph, gamma: Any) -> Graph:
    """
    Delete the edges of gamma, keeping every vertex and leg.

    Args:
        graph (Graph): Graph to delete from
        gamma: Subgraph or edge ids

    Returns:
        Graph: G minus gamma
    """
    ids = edge_set(graph, gamma)
    edges = tuple(e for e in graph.edges if e.id not in ids)
    name = f"{graph.name}\\{{{_format_edges(ids)}}}" if ids else graph.name
    return Graph(graph.vertices, edges, graph.legs, graph.orientation, name)


def subgraph_graph(graph: Graph, gamma: Any, keep_legs: bool = True) -> Graph:
    """
    The graph formed by the edges of gamma and their endpoints.

    Args:
        graph (Graph): Parent graph
        gamma: Subgraph or edge ids
        keep_legs (bool): Keep the legs attached to the retained vertices

    Returns:
        Graph: gamma as a graph in its own right
    """
    ids = edge_set(graph, gamma)
    edges = tuple(e for e in graph.edges if e.id in ids)
    vertex_ids = {v for e in edges for v in (e.source, e.target)}
    weights = graph.weights
    vertices = tuple((v, weights[v]) for v in sorted(vertex_ids))
    legs = tuple(l for l in graph.legs if l.vertex in vertex_ids) if keep_legs else ()
    return Graph(vertices, edges, legs, 1, f"{graph.name}[{_format_edges(ids)}]")


def _require_connected(graph: Graph) -> None:
    if not graph.is_connected():
        raise GraphError(f"Graph {graph.name!r} is not connected")


def _trees(vertices: FrozenSet[int], edges: Tuple[Tuple[int, int, int], ...]) -> List[FrozenSet[int]]:
    """Contraction-deletion recursion on (id, u, v) edge triples."""
    edges = tuple(e for e in edges if e[1] != e[2])
    if len(vertices) == 1:
        return [frozenset()]
    if not edges:
        return []
    (edge_id, u, v), rest = edges[0], edges[1:]

    # Trees through the edge: contract v into u
    merged = tuple((i, u if a == v else a, u if b == v else b) for i, a, b in rest)
    with_edge = [t | {edge_id} for t in _trees(vertices - {v}, merged)]

    # Trees avoiding the edge, only while the rest stays connected
    probe = nx.MultiGraph()
    probe.add_nodes_from(vertices)
    probe.add_edges_from((a, b) for _, a, b in rest)
    without_edge = _trees(vertices, rest) if nx.is_connected(probe) else []
    return with_edge + without_edge


def spanning_trees(graph: Graph) -> List[FrozenSet[int]]:
    """
    All spanning trees as edge-id sets, by contraction-deletion.

    Args:
        graph (Graph): Connected graph

    Returns:
        List[FrozenSet[int]]: Sorted list of trees
    """
    _require_connected(graph)
    triples = tuple((e.id, e.source, e.target) for e in graph.edges)
    trees = _trees(frozenset(graph.vertex_ids), triples)
    return sorted(trees, key=lambda t: tuple(sorted(t)))


def spanning_forests(graph: Graph, partition: Sequence[Iterable[int]]) -> List[FrozenSet[int]]:
    """
    Spanning forests T_1 u ... u T_r whose i-th tree holds exactly the
    vertices of block i among the partition vertices.

    Overlapping blocks give no forests.

    Args:
        graph (Graph): Connected graph
        partition: Blocks of vertex ids

    Returns:
        List[FrozenSet[int]]: Sorted list of forests
    """
    _require_connected(graph)
    blocks = [frozenset(int(v) for v in block) for block in partition]
    known = set(graph.vertex_ids)
    for block in blocks:
        if not block:
            raise GraphError("Partition blocks must be nonempty")
        unknown = block - known
        if unknown:
            raise GraphError(f"Unknown vertices {sorted(unknown)} in partition")
    if sum(len(b) for b in blocks) != len(frozenset().union(*blocks)):
        return []

    r = len(blocks)
    size = graph.num_vertices - r
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
        if not acyclic:
            continue
        roots = []
        for block in blocks:
            block_roots = {uf[v] for v in block}
            if len(block_roots) != 1:
                break
            roots.append(block_roots.pop())
        else:
            if len(set(roots)) == r:
                forests.append(frozenset(e.id for e in subset))
    return sorted(forests, key=lambda f: tuple(sorted(f)))


def _tree_cycles(graph: Graph, tree: Sequence[int], chords: Sequence[int]) -> List[Dict[int, int]]:
    """Fundamental cycle of each chord: chord plus tree path t(c) -> s(c)."""
    tree_graph = nx.Graph()
    tree_graph.add_nodes_from(graph.vertex_ids)
    for edge_id in tree:
        edge = graph.edge(edge_id)
        tree_graph.add_edge(edge.source, edge.target, id=edge_id)

    cycles = []
    for chord_id in chords:
        chord = graph.edge(chord_id)
        cycle = {chord_id: 1}
        if not chord.is_tadpole:
            path = nx.shortest_path(tree_graph, chord.target, chord.source)
            for x, y in zip(path, path[1:]):
                edge = graph.edge(tree_graph[x][y]['id'])
                cycle[edge.id] = cycle.get(edge.id, 0) + (1 if edge.source == x else -1)
        cycles.append({e: c for e, c in cycle.items() if c})
    return cycles


def cycle_basis(graph: Graph, marked: Sequence[int] = ()) -> List[Dict[int, int]]:
    """
    Integer basis of H_1 made of fundamental cycles.

    The tree avoids the marked edges and is built from the highest edge id
    down. Chords come as the marked edges in the given order, then the rest
    by increasing id, so the coefficient of marked edge i in cycle j is
    delta_ij.

    Args:
        graph (Graph): Connected graph
        marked (Sequence[int]): Edges that must be chords

    Returns:
        List[Dict[int, int]]: One {edge_id: coefficient} map per cycle
    """
    marked = [int(e) for e in marked]
    if len(set(marked)) != len(marked):
        raise GraphError("Marked edges must be distinct")
    edge_set(graph, marked)
    h = loop_number(graph)
    if len(marked) > h:
        raise GraphError(f"Too many marked edges: {len(marked)} > h = {h}")
    rest = [e for e in graph.edge_ids if e not in marked]
    if not nx.is_connected(graph.multigraph(rest)):
        raise GraphError(f"Removing marked edges {marked} disconnects {graph.name!r}")

    uf = nx.utils.UnionFind(graph.vertex_ids)
    tree = []
    for edge_id in sorted(rest, reverse=True):
        edge = graph.edge(edge_id)
        if edge.is_tadpole or uf[edge.source] == uf[edge.target]:
            continue
        uf.union(edge.source, edge.target)
        tree.append(edge_id)
    chords = marked + [e for e in graph.edge_ids if e not in marked and e not in tree]
    return _tree_cycles(graph, tree, chords)


def adapted_cycle_basis(graph: Graph, gamma: Any, gamma_first: bool = True) -> Tuple[List[Dict[int, int]], int]:
    """
    Cycle basis whose gamma-part spans H_1(gamma).

    A spanning forest of gamma is extended to a spanning tree of G, so the
    fundamental cycles of gamma's chords live inside gamma.

    Args:
        graph (Graph): Connected graph
        gamma: Subgraph or edge ids
        gamma_first (bool): Put gamma's cycles first (else last)

    Returns:
        Tuple[List[Dict[int, int]], int]: (basis, number of gamma cycles)
    """
    ids = edge_set(graph, gamma)
    _require_connected(graph)
    uf = nx.utils.UnionFind(graph.vertex_ids)
    tree = []
    for edge_id in sorted(graph.edge_ids, key=lambda e: (e not in ids, -e)):
        edge = graph.edge(edge_id)
        if edge.is_tadpole or uf[edge.source] == uf[edge.target]:
            continue
        uf.union(edge.source, edge.target)
        tree.append(edge_id)
    inner = [e for e in graph.edge_ids if e in ids and e not in tree]
    outer = [e for e in graph.edge_ids if e not in ids and e not in tree]
    chords = inner + outer if gamma_first else outer + inner
    return _tree_cycles(graph, tree, chords), len(inner)


def is_core(graph: Graph, gamma: Any) -> bool:
    """True iff deleting any edge of gamma lowers its loop number."""
    ids = edge_set(graph, gamma)
    h = _spanning_loop_number(graph, ids)
    return all(_spanning_loop_number(graph, ids - {e}) < h for e in ids)


def classify_subgraph(graph: Graph, gamma: Any, kin: Any) -> SubgraphFlags:
    """
    Classify gamma, viewed as the spanning subgraph (V(G), gamma).

    Args:
        graph (Graph): Parent graph
        gamma: Subgraph or edge ids
        kin (Kinematics): Masses and momenta

    Returns:
        SubgraphFlags: core, mass_spanning, momentum_spanning (and mm)
    """
    ids = edge_set(graph, gamma)
    massive = {e.id for e in graph.edges if kin.mass_sq(e.mass_label) != 0}
    mass_spanning = massive <= ids

    q = kin.vertex_momenta(graph)
    carriers = [v for v, qv in q.items() if not qv.is_zero()]
    if carriers:
        component = nx.node_connected_component(graph.multigraph(ids), carriers[0])
        momentum_spanning = all(v in component for v in carriers)
    else:
        momentum_spanning = True

    return SubgraphFlags(is_core(graph, ids), mass_spanning, momentum_spanning)


def is_motic(graph: Graph, gamma: Any, kin: Any) -> bool:
    """
    Core, or m.m. with every edge either in a loop of gamma or needed for
    the m.m. property.
    """
    ids = edge_set(graph, gamma)
    flags = classify_subgraph(graph, ids, kin)
    if flags.core:
        return True
    if not flags.mm:
        return False
    h = _spanning_loop_number(graph, ids)
    for edge_id in ids:
        rest = ids - {edge_id}
        if _spanning_loop_number(graph, rest) < h:
            continue
        if classify_subgraph(graph, rest, kin).mm:
            return False
    return True


def motic_subgraphs(graph: Graph, kin: Any) -> List[Subgraph]:
    """
    Strict motic subgraphs with at least two edges.

    Args:
        graph (Graph): Parent graph
        kin (Kinematics): Generic kinematics

    Returns:
        List[Subgraph]: Ordered by size, then by edge ids

    Raises:
        KinematicsError: If the kinematics are not generic
    """
    from canon.kinematics import KinematicsError
    if not kin.is_generic(graph.leg_indices):
        raise KinematicsError("Motic subgraphs need generic kinematics")
    found = []
    ids = graph.edge_ids
    for size in range(2, len(ids)):
        for subset in combinations(ids, size):
            if is_motic(graph, subset, kin):
                found.append(Subgraph(graph.name, frozenset(subset)))
    logger.info(f"{len(found)} motic subgraphs in {graph.name!r}")
    return found
