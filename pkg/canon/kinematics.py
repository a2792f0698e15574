"""
Kinematics Module for Canon

Exact scalars (rationals, Gaussian rationals and rational quaternions),
external momenta with masses, genericity, momentum routing and the complex
adjoint representation of quaternionic matrices.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
from sympy.polys.domains import QQ, QQ_I

from canon.graph_core import Graph, GraphError

# Configure logging
logger = logging.getLogger(__name__)

Number = Union[int, Fraction, str]


class KinematicsError(ValueError):
    """Raised for inconsistent momenta, masses or routings."""


def to_fraction(value: Any) -> Fraction:
    """
    Convert ints, Fractions, "p/q" strings and sympy rationals to Fraction.

    Args:
        value: Value to convert

    Returns:
        Fraction: Exact rational value
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError as e:
            raise KinematicsError(f"Not an exact rational: {value!r}") from e
    if isinstance(value, float):
        raise KinematicsError(f"Floats are not exact rationals: {value!r}")
    # sympy mpq / PythonMPQ
    try:
        return Fraction(int(value.numerator), int(value.denominator))
    except AttributeError as e:
        raise KinematicsError(f"Cannot interpret {value!r} as a rational") from e


def qq(value: Any):
    """Convert a rational to an element of sympy's QQ."""
    f = to_fraction(value)
    return QQ(f.numerator, f.denominator)


class Quaternion:
    """
    Rational quaternion x1 + x2 i + x3 j + x4 k.

    Rationals and Gaussian rationals are the quaternions with vanishing
    trailing components, so one type serves every scalar ring.
    """

    __slots__ = ('_c',)

    def __init__(self, x1: Number = 0, x2: Number = 0, x3: Number = 0, x4: Number = 0):
        self._c = (to_fraction(x1), to_fraction(x2), to_fraction(x3), to_fraction(x4))

    @classmethod
    def from_components(cls, components: Sequence[Number]) -> 'Quaternion':
        """
        Build from 1, 2 or 4 components.

        Args:
            components (Sequence): (re,), (re, im) or (x1, x2, x3, x4)

        Returns:
            Quaternion: Parsed scalar
        """
        if len(components) not in (1, 2, 4):
            raise KinematicsError(f"Expected 1, 2 or 4 components, got {len(components)}")
        return cls(*components)

    @property
    def components(self) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        return self._c

    @property
    def kind(self) -> str:
        """'rat', 'gauss' or 'quat': the smallest ring holding the value."""
        x1, x2, x3, x4 = self._c
        if x3 or x4:
            return 'quat'
        if x2:
            return 'gauss'
        return 'rat'

    @property
    def real(self) -> Fraction:
        return self._c[0]

    def is_zero(self) -> bool:
        return not any(self._c)

    def conjugate(self) -> 'Quaternion':
        """The anti-involution iota."""
        x1, x2, x3, x4 = self._c
        return Quaternion(x1, -x2, -x3, -x4)

    def norm2(self) -> Fraction:
        """Squared Euclidean norm, x iota(x) as a rational."""
        return sum((c * c for c in self._c), Fraction(0))

    def dot(self, other: 'Quaternion') -> Fraction:
        """Euclidean inner product, the real part of x iota(y)."""
        return sum((a * b for a, b in zip(self._c, other._c)), Fraction(0))

    def to_gaussian(self):
        """
        Convert to an element of sympy's QQ_I.

        Raises:
            KinematicsError: If the value has j or k components
        """
        x1, x2, x3, x4 = self._c
        if x3 or x4:
            raise KinematicsError(f"Quaternion {self} is not a Gaussian rational")
        return QQ_I(qq(x1), qq(x2))

    def to_complex(self) -> complex:
        if self._c[2] or self._c[3]:
            raise KinematicsError(f"Quaternion {self} is not a Gaussian rational")
        return complex(float(self._c[0]), float(self._c[1]))

    def chi(self) -> List[List[Any]]:
        """
        Complex adjoint 2x2 block of this scalar, over QQ_I.

        i maps to diag(i, -i), j to ((0, -1), (1, 0)) and k to their product.
        """
        x1, x2, x3, x4 = self._c
        return [
            [QQ_I(qq(x1), qq(x2)), QQ_I(qq(-x3), qq(-x4))],
            [QQ_I(qq(x3), qq(-x4)), QQ_I(qq(x1), qq(-x2))],
        ]

    def _coerce(self, other: Any) -> Optional['Quaternion']:
        if isinstance(other, Quaternion):
            return other
        if isinstance(other, (int, Fraction)):
            return Quaternion(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Quaternion(*(a + b for a, b in zip(self._c, o._c)))

    __radd__ = __add__

    def __neg__(self):
        return Quaternion(*(-a for a in self._c))

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        a1, a2, a3, a4 = self._c
        b1, b2, b3, b4 = o._c
        return Quaternion(
            a1 * b1 - a2 * b2 - a3 * b3 - a4 * b4,
            a1 * b2 + a2 * b1 + a3 * b4 - a4 * b3,
            a1 * b3 - a2 * b4 + a3 * b1 + a4 * b2,
            a1 * b4 + a2 * b3 - a3 * b2 + a4 * b1,
        )

    def __rmul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self._c == o._c

    def __hash__(self):
        return hash(self._c)

    def __repr__(self):
        return f"Quaternion({', '.join(str(c) for c in self._c)})"

    def __str__(self):
        parts = []
        for coeff, unit in zip(self._c, ('', 'i', 'j', 'k')):
            if coeff:
                parts.append(f"{coeff}{unit}")
        return '+'.join(parts).replace('+-', '-') if parts else '0'


ZERO = Quaternion()
ONE = Quaternion(1)

QuatMatrix = List[List[Quaternion]]


def quat_matmul(a: Sequence[Sequence[Quaternion]], b: Sequence[Sequence[Quaternion]]) -> QuatMatrix:
    """Product of two quaternionic matrices."""
    inner = len(b)
    cols = len(b[0]) if inner else 0
    out = []
    for row in a:
        out_row = []
        for j in range(cols):
            acc = ZERO
            for t in range(inner):
                if not row[t].is_zero() and not b[t][j].is_zero():
                    acc = acc + row[t] * b[t][j]
            out_row.append(acc)
        out.append(out_row)
    return out


def quat_adjoint(a: Sequence[Sequence[Quaternion]]) -> QuatMatrix:
    """Conjugate transpose iota(M)^T."""
    rows = len(a)
    cols = len(a[0]) if rows else 0
    return [[a[i][j].conjugate() for i in range(rows)] for j in range(cols)]


def is_hermitian(a: Sequence[Sequence[Quaternion]]) -> bool:
    """True if M^T = iota(M)."""
    return [list(r) for r in a] == quat_adjoint(a)


def chi(matrix: Sequence[Sequence[Quaternion]]) -> List[List[Any]]:
    """
    Complex adjoint of a quaternionic matrix.

    Each entry becomes its 2x2 block; block (a, b) occupies rows 2a, 2a+1
    and columns 2b, 2b+1.

    Args:
        matrix: n x m matrix of Quaternion

    Returns:
        List[List]: 2n x 2m matrix of QQ_I elements
    """
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    out = [[QQ_I.zero] * (2 * cols) for _ in range(2 * rows)]
    for a in range(rows):
        for b in range(cols):
            block = matrix[a][b].chi()
            for r in range(2):
                for c in range(2):
                    out[2 * a + r][2 * b + c] = block[r][c]
    return out


def is_rational_square(value: Fraction) -> bool:
    """Exact test that a nonnegative rational is the square of a rational."""
    from math import isqrt
    if value < 0:
        return False
    num, den = value.numerator, value.denominator
    return isqrt(num) ** 2 == num and isqrt(den) ** 2 == den


@dataclass(frozen=True)
class Kinematics:
    """
    External momenta by leg index plus squared masses by mass label.

    dim 2 momenta are Gaussian rationals, dim 4 momenta are quaternions.
    """
    dim: int
    momenta: Mapping[int, Quaternion]
    masses: Mapping[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'momenta', {int(k): v for k, v in sorted(self.momenta.items())})
        object.__setattr__(self, 'masses', {int(k): to_fraction(v) for k, v in sorted(self.masses.items())})
        is_valid, error_msg = self.validate()
        if not is_valid:
            raise KinematicsError(error_msg)

    def validate(self) -> Tuple[bool, str]:
        """
        Check dimension, scalar kinds, conservation and masses.

        Returns:
            Tuple[bool, str]: (is_valid, error_message)
        """
        if self.dim not in (2, 4):
            return False, f"dim must be 2 or 4, got {self.dim}"
        for leg, q in self.momenta.items():
            if not isinstance(q, Quaternion):
                return False, f"Momentum of leg {leg} is not a Quaternion"
            if self.dim == 2 and q.kind == 'quat':
                return False, f"Leg {leg} has a quaternionic momentum in dim 2"
        total = sum(self.momenta.values(), ZERO)
        if not total.is_zero():
            return False, f"Momentum conservation fails: sum of momenta is {total}"
        for label, m2 in self.masses.items():
            if label < 0:
                return False, f"Negative mass label {label}"
            if label == 0 and m2 != 0:
                return False, "Mass label 0 is reserved for massless edges"
            if m2 < 0:
                return False, f"Mass label {label} has negative mass squared {m2}"
        return True, ""

    def mass_sq(self, label: int) -> Fraction:
        """Squared mass of a label; label 0 is massless."""
        if label == 0:
            return Fraction(0)
        try:
            return self.masses[label]
        except KeyError as e:
            raise KinematicsError(f"No mass given for label {label}") from e

    def momentum(self, leg: int) -> Quaternion:
        try:
            return self.momenta[leg]
        except KeyError as e:
            raise KinematicsError(f"No momentum given for leg {leg}") from e

    def check_compatible(self, graph: Graph) -> None:
        """
        Check that every leg and mass label of the graph is covered.

        Raises:
            KinematicsError: On a missing leg momentum or mass
        """
        for leg in graph.legs:
            self.momentum(leg.index)
        for edge in graph.edges:
            self.mass_sq(edge.mass_label)

    def vertex_momenta(self, graph: Graph) -> Dict[int, Quaternion]:
        """Total incoming external momentum q_v at each vertex."""
        q = {v: ZERO for v in graph.vertex_ids}
        for leg in graph.legs:
            q[leg.vertex] = q[leg.vertex] + self.momentum(leg.index)
        return q

    def is_generic(self, legs: Iterable[int]) -> bool:
        """
        True iff no nonempty strict subset of the given legs has a null
        total momentum.
        """
        from itertools import combinations
        legs = sorted(legs)
        for size in range(1, len(legs)):
            for subset in combinations(legs, size):
                total = sum((self.momentum(i) for i in subset), ZERO)
                if total.norm2() == 0:
                    return False
        return True

    def restricted(self, legs: Iterable[int]) -> 'Kinematics':
        """Kinematics keeping only the given legs (must still conserve)."""
        legs = set(legs)
        return Kinematics(self.dim, {i: q for i, q in self.momenta.items() if i in legs}, self.masses)

    def massless(self) -> 'Kinematics':
        """The same momenta with every mass set to zero."""
        return Kinematics(self.dim, self.momenta, {label: 0 for label in self.masses})

    def with_masses(self, masses: Mapping[int, Number]) -> 'Kinematics':
        return Kinematics(self.dim, self.momenta, {k: to_fraction(v) for k, v in masses.items()})

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'Kinematics':
        """
        Parse the kinematics JSON layout.

        Args:
            data: {dim, momenta: [{leg, components}], masses: [{label, m2}]}

        Returns:
            Kinematics: Parsed kinematics
        """
        try:
            dim = int(data['dim'])
            momenta = {
                int(item['leg']): Quaternion.from_components(item['components'])
                for item in data.get('momenta', [])
            }
            masses = {int(item['label']): to_fraction(item['m2']) for item in data.get('masses', [])}
        except (KeyError, TypeError) as e:
            raise KinematicsError(f"Malformed kinematics data: {e}") from e
        return cls(dim, momenta, masses)

    def to_dict(self) -> Dict[str, Any]:
        width = 2 if self.dim == 2 else 4
        return {
            'dim': self.dim,
            'momenta': [
                {'leg': leg, 'components': [str(c) for c in q.components[:width]]}
                for leg, q in self.momenta.items()
            ],
            'masses': [{'label': label, 'm2': str(m2)} for label, m2 in self.masses.items()],
        }


@dataclass(frozen=True)
class Routing:
    """Edge momenta mu_e solving the vertex conservation equations."""
    momenta: Mapping[int, Quaternion]

    def __post_init__(self):
        object.__setattr__(self, 'momenta', {int(k): v for k, v in sorted(self.momenta.items())})

    def __getitem__(self, edge_id: int) -> Quaternion:
        return self.momenta.get(edge_id, ZERO)

    def items(self):
        return self.momenta.items()

    def defects(self, graph: Graph, kin: Kinematics) -> Dict[int, Quaternion]:
        """
        Conservation defect at each vertex: outflow - inflow - q_v.

        Returns:
            Dict[int, Quaternion]: Vertices with a nonzero defect
        """
        flow = {v: ZERO for v in graph.vertex_ids}
        for edge in graph.edges:
            mu = self[edge.id]
            flow[edge.source] = flow[edge.source] + mu
            flow[edge.target] = flow[edge.target] - mu
        q = kin.vertex_momenta(graph)
        return {v: flow[v] - q[v] for v in graph.vertex_ids if not (flow[v] - q[v]).is_zero()}

    def is_valid(self, graph: Graph, kin: Kinematics) -> bool:
        return not self.defects(graph, kin)

    def shifted(self, basis: Sequence[Mapping[int, int]], shift: Sequence[Quaternion]) -> 'Routing':
        """Add sum_k shift_k c_k; the result is another valid routing."""
        new = dict(self.momenta)
        for cycle, s in zip(basis, shift):
            for edge_id, coeff in cycle.items():
                new[edge_id] = new.get(edge_id, ZERO) + coeff * s
        return Routing(new)


def check_genericity(graph: Graph, kin: Kinematics) -> bool:
    """
    Exact genericity test for the external momenta of a graph.

    Args:
        graph (Graph): Graph whose legs are tested
        kin (Kinematics): Momenta

    Returns:
        bool: True iff every nonempty strict leg subset has nonzero total norm
    """
    return kin.is_generic(leg.index for leg in graph.legs)


def _greedy_tree(graph: Graph, preferred: Iterable[int] = ()) -> List[int]:
    """Spanning forest by decreasing edge id, preferred edges first."""
    preferred = set(preferred)
    uf = nx.utils.UnionFind(graph.vertex_ids)
    order = sorted(graph.edge_ids, key=lambda e: (e not in preferred, -e))
    tree = []
    for edge_id in order:
        edge = graph.edge(edge_id)
        if edge.is_tadpole:
            continue
        if uf[edge.source] != uf[edge.target]:
            uf.union(edge.source, edge.target)
            tree.append(edge_id)
    return tree


def route(graph: Graph, kin: Kinematics, prefer: Iterable[int] = (),
          allow_disconnected: bool = False) -> Routing:
    """
    Deterministic tree routing of the external momenta.

    The spanning tree is built greedily from the highest edge id down
    (edges in `prefer` first), so the lowest ids end up as chords carrying
    zero momentum. Tadpoles always carry zero.

    Args:
        graph (Graph): Graph to route
        kin (Kinematics): External momenta
        prefer (Iterable[int]): Edges to put into the tree first
        allow_disconnected (bool): Route each component separately

    Returns:
        Routing: Valid routing (outflow - inflow = q_v at every vertex)
    """
    kin.check_compatible(graph)
    if not allow_disconnected and not graph.is_connected():
        raise GraphError(f"Cannot route momenta on disconnected graph {graph.name!r}")
    q = kin.vertex_momenta(graph)
    tree = _greedy_tree(graph, prefer)

    forest = nx.Graph()
    forest.add_nodes_from(graph.vertex_ids)
    for edge_id in tree:
        edge = graph.edge(edge_id)
        forest.add_edge(edge.source, edge.target, id=edge_id)

    if allow_disconnected:
        for component in nx.connected_components(forest):
            total = sum((q[v] for v in component), ZERO)
            if not total.is_zero():
                raise KinematicsError(f"Momentum is not conserved on component {sorted(component)}")

    momenta = {e: ZERO for e in graph.edge_ids}
    for edge_id in tree:
        edge = graph.edge(edge_id)
        forest.remove_edge(edge.source, edge.target)
        side = nx.node_connected_component(forest, edge.source)
        momenta[edge_id] = sum((q[v] for v in side), ZERO)
        forest.add_edge(edge.source, edge.target, id=edge_id)

    routing = Routing(momenta)
    logger.debug(f"Routed {graph.name!r} on tree {sorted(tree)}")
    return routing


def validate_routing(graph: Graph, kin: Kinematics, routing: Routing) -> None:
    """
    Raise unless the routing conserves momentum at every vertex.

    Raises:
        KinematicsError: Listing the vertices that fail
    """
    defects = routing.defects(graph, kin)
    if defects:
        raise KinematicsError(f"Invalid routing: conservation fails at vertices {sorted(defects)}")
