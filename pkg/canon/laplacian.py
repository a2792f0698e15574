"""
Laplacian Module for Canon

Graph Laplacians and generalized graph Laplacians of Feynman graphs over the
rationals, Gaussian rationals and rational quaternions, their complex
adjoints, the determinant identities they satisfy, the indeterminacy group
action and the block structure under rescaling of a subgraph.

Every Laplacian is kept as a pencil: one constant (h+1)x(h+1) quaternionic
matrix A_e per edge, with the matrix itself being sum_e a_e A_e.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import Matrix, ZZ
from sympy.matrices.normalforms import smith_normal_form

from canon.graph_core import (
    Edge, Graph, GraphError, adapted_cycle_basis, classify_subgraph, contract, cycle_basis,
    delete, edge_set, subgraph_graph,
)
from canon.kinematics import (
    Kinematics, Quaternion, QuatMatrix, Routing, ZERO, chi, quat_adjoint, quat_matmul, route,
    validate_routing,
)
from canon.polynomial import (
    PolyMatrix, det_poly, edge_var, gaussian, poly_ring, poly_to_text, to_ring, z_coefficient,
    z_order,
)
from canon.symanzik import psi, psi_subgraph, forest_poly, mass_form, xi

# Configure logging
logger = logging.getLogger(__name__)

FIRST_KIND = 'first'
SECOND_KIND = 'second'
QUATERNIONIC_KIND = 'quaternionic'
KINDS = (FIRST_KIND, SECOND_KIND, QUATERNIONIC_KIND)

Cycle = Mapping[int, int]


class LaplacianError(ValueError):
    """Raised for invalid bases, transforms and subgraph decompositions."""


def _as_quaternion(value: Any) -> Quaternion:
    if isinstance(value, Quaternion):
        return value
    if isinstance(value, (list, tuple)):
        return Quaternion.from_components(value)
    return Quaternion(value)


def validate_basis(graph: Graph, basis: Sequence[Cycle]) -> None:
    """
    Check that the cycles form a Z-basis of H_1(G).

    Each vector must have zero boundary, there must be h_G of them, and the
    lattice they span must be saturated (all invariant factors 1).

    Raises:
        LaplacianError: If the basis is not valid for H_1
    """
    h = graph.loop_number()
    if len(basis) != h:
        raise LaplacianError(f"Basis rank {len(basis)} differs from h_G = {h} for {graph.name!r}")
    known = set(graph.edge_ids)
    for k, cycle in enumerate(basis):
        unknown = set(cycle) - known
        if unknown:
            raise LaplacianError(f"Cycle {k + 1} uses unknown edges {sorted(unknown)}")
        boundary = {v: 0 for v in graph.vertex_ids}
        for edge_id, coeff in cycle.items():
            edge = graph.edge(edge_id)
            boundary[edge.source] -= coeff
            boundary[edge.target] += coeff
        if any(boundary.values()):
            raise LaplacianError(f"Cycle {k + 1} is not closed: {dict(cycle)}")
    if h == 0:
        return
    columns = Matrix([[cycle.get(e, 0) for cycle in basis] for e in graph.edge_ids])
    snf = smith_normal_form(columns, domain=ZZ)
    factors = [abs(snf[i, i]) for i in range(h)]
    if any(f != 1 for f in factors):
        raise LaplacianError(f"Cycles do not span H_1 of {graph.name!r}: invariant factors {factors}")


def _edge_block(coefficients: Sequence[int], mu: Quaternion, m2: Any) -> QuatMatrix:
    """r* r + m^2 E_corner for the row r = (c_1(e), ..., c_h(e), mu_e)."""
    row = [Quaternion(c) for c in coefficients] + [mu]
    block = [[a.conjugate() * b for b in row] for a in row]
    block[-1][-1] = block[-1][-1] + Quaternion(m2)
    return block


def _text_term(coeff: str, var: str) -> str:
    if coeff == '1':
        return var
    if coeff == '-1':
        return '-' + var
    if any(ch in coeff[1:] for ch in '+-') or any(u in coeff for u in 'ijk'):
        return f"({coeff})*{var}"
    return f"{coeff}*{var}"


class QuatPolyMatrix:
    """
    Quaternionic matrix sum_e a_e A_e with constant quaternionic A_e.

    Determinants and traces are only ever taken through chi().
    """

    def __init__(self, pencil: Mapping[int, QuatMatrix], ring):
        self.pencil = dict(pencil)
        self.ring = ring
        size = len(next(iter(self.pencil.values()))) if self.pencil else 0
        self.shape = (size, size)

    def entry(self, i: int, j: int) -> Dict[int, Quaternion]:
        """Coefficients of a_e in entry (i, j)."""
        return {e: block[i][j] for e, block in self.pencil.items() if not block[i][j].is_zero()}

    def chi(self) -> PolyMatrix:
        """Complex adjoint, a 2n x 2n PolyMatrix over the Gaussian rationals."""
        n = 2 * self.shape[0]
        out = [[self.ring.zero] * n for _ in range(n)]
        for edge_id, block in self.pencil.items():
            var = edge_var(self.ring, edge_id)
            doubled = chi(block)
            for a in range(n):
                for b in range(n):
                    c = doubled[a][b]
                    if c:
                        out[a][b] += self.ring.ground_new(c) * var
        return PolyMatrix(out, self.ring)

    def is_hermitian(self) -> bool:
        return all(quat_adjoint(block) == [list(r) for r in block] for block in self.pencil.values())

    def to_text(self) -> List[List[str]]:
        n = self.shape[0]
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                terms = [_text_term(str(q), f"a{e}") for e, q in sorted(self.entry(i, j).items())]
                text = '+'.join(terms).replace('+-', '-') if terms else '0'
                row.append(text)
            rows.append(row)
        return rows

    def __repr__(self):
        return f"QuatPolyMatrix({self.to_text()})"


@dataclass(frozen=True)
class LaplacianBundle:
    """
    Laplacian data of one graph for one choice of cycle basis and routing.

    pencil maps each edge id to its constant quaternionic matrix A_e; the
    top-left h x h block of sum_e a_e A_e is Lambda_G, the whole sum is the
    generalized Laplacian.
    """
    graph: Graph
    kinematics: Kinematics
    basis: Tuple[Dict[int, int], ...]
    routing: Routing
    pencil: Dict[int, QuatMatrix] = field(repr=False)

    @property
    def h(self) -> int:
        return len(self.basis)

    @cached_property
    def ring(self):
        return poly_ring(self.graph.edge_ids)

    @property
    def dim(self) -> int:
        return self.kinematics.dim

    def _pencil_matrix(self, size: int, convert) -> PolyMatrix:
        ring = self.ring
        out = [[ring.zero] * size for _ in range(size)]
        for edge_id, block in self.pencil.items():
            var = edge_var(ring, edge_id)
            for a in range(size):
                for b in range(size):
                    q = block[a][b]
                    if not q.is_zero():
                        out[a][b] += ring.ground_new(convert(q)) * var
        return PolyMatrix(out, ring)

    @cached_property
    def lambda_matrix(self) -> PolyMatrix:
        """Lambda_G = H^T D H, symmetric with rational entries."""
        return self._pencil_matrix(self.h, lambda q: gaussian(q.real))

    @cached_property
    def lambda_tilde(self) -> Union[PolyMatrix, QuatPolyMatrix]:
        """Generalized Laplacian: a PolyMatrix in dim 2, a QuatPolyMatrix in dim 4."""
        if self.dim == 2:
            return self._pencil_matrix(self.h + 1, lambda q: q.to_gaussian())
        return QuatPolyMatrix(self.pencil, self.ring)

    @cached_property
    def chi_tilde(self) -> Optional[PolyMatrix]:
        """Complex adjoint of the quaternionic generalized Laplacian (dim 4 only)."""
        if self.dim != 4:
            return None
        return self.lambda_tilde.chi()

    def form_matrix(self, kind: str) -> PolyMatrix:
        """
        The commutative matrix on which forms of a given kind are realized.

        Args:
            kind (str): 'first', 'second' (dim 2) or 'quaternionic' (dim 4)

        Returns:
            PolyMatrix: Lambda_G, Lambda~_G or chi(Lambda~_G)
        """
        if kind == FIRST_KIND:
            return self.lambda_matrix
        if kind == SECOND_KIND:
            if self.dim != 2:
                raise LaplacianError("Second-kind forms need dim 2 kinematics; use the quaternionic kind")
            return self.lambda_tilde
        if kind == QUATERNIONIC_KIND:
            if self.dim != 4:
                raise LaplacianError("Quaternionic forms need dim 4 kinematics")
            return self.chi_tilde
        raise LaplacianError(f"Unknown form kind {kind!r}")

    def numeric_pencil(self, kind: str, dtype=np.complex128) -> np.ndarray:
        """
        Coefficient matrices of form_matrix(kind) as an (N, r, r) array in
        edge id order.
        """
        mats = []
        for edge_id in self.graph.edge_ids:
            block = self.pencil[edge_id]
            if kind == FIRST_KIND:
                mats.append(np.array([[float(block[a][b].real) for b in range(self.h)]
                                      for a in range(self.h)], dtype=dtype).reshape(self.h, self.h))
            elif kind == SECOND_KIND:
                if self.dim != 2:
                    raise LaplacianError("Second-kind forms need dim 2 kinematics")
                mats.append(np.array([[q.to_complex() for q in row] for row in block], dtype=dtype))
            elif kind == QUATERNIONIC_KIND:
                if self.dim != 4:
                    raise LaplacianError("Quaternionic forms need dim 4 kinematics")
                doubled = chi(block)
                mats.append(np.array([[complex(float(c.x), float(c.y)) for c in row] for row in doubled],
                                     dtype=dtype))
            else:
                raise LaplacianError(f"Unknown form kind {kind!r}")
        return np.stack(mats)

    def to_dict(self) -> Dict[str, Any]:
        width = 2 if self.dim == 2 else 4
        data = {
            'graph': self.graph.name,
            'dim': self.dim,
            'basis': [{str(e): c for e, c in sorted(cycle.items())} for cycle in self.basis],
            'routing': {str(e): [str(c) for c in q.components[:width]] for e, q in self.routing.items()},
            'lambda': self.lambda_matrix.to_text(),
            'lambda_tilde': self.lambda_tilde.to_text(),
        }
        if self.chi_tilde is not None:
            data['chi_tilde'] = self.chi_tilde.to_text()
        return data


def _check_routing(graph: Graph, kin: Kinematics, routing: Routing) -> None:
    unknown = set(routing.momenta) - set(graph.edge_ids)
    if unknown:
        raise LaplacianError(f"Routing mentions edges {sorted(unknown)} not in {graph.name!r}")
    if kin.dim == 2 and any(q.kind == 'quat' for _, q in routing.items()):
        raise LaplacianError("Quaternionic edge momenta with dim 2 kinematics")
    validate_routing(graph, kin, routing)


def laplacian_bundle(graph: Graph, kin: Kinematics, routing: Optional[Routing] = None,
                     basis: Optional[Sequence[Cycle]] = None, marked: Sequence[int] = ()) -> LaplacianBundle:
    """
    Build the Laplacian pencil of a graph.

    Args:
        graph (Graph): Connected graph
        kin (Kinematics): Momenta and masses
        routing (Routing, optional): Defaults to the tree routing
        basis (Sequence, optional): Defaults to cycle_basis(graph, marked)
        marked (Sequence[int]): Chords for the default basis

    Returns:
        LaplacianBundle: Bundle with validated basis and routing
    """
    if not graph.is_connected():
        raise GraphError(f"Graph {graph.name!r} is not connected")
    kin.check_compatible(graph)
    if basis is None:
        basis = cycle_basis(graph, marked)
    basis = tuple({int(e): int(c) for e, c in cycle.items() if c} for cycle in basis)
    validate_basis(graph, basis)
    if routing is None:
        routing = route(graph, kin)
    _check_routing(graph, kin, routing)

    pencil = {}
    for edge in graph.edges:
        coefficients = [cycle.get(edge.id, 0) for cycle in basis]
        pencil[edge.id] = _edge_block(coefficients, routing[edge.id], kin.mass_sq(edge.mass_label))
    logger.debug(f"Built Laplacian pencil for {graph.name!r} (h={len(basis)}, dim={kin.dim})")
    return LaplacianBundle(graph, kin, basis, routing, pencil)


def build_laplacian(graph: Graph, basis: Optional[Sequence[Cycle]] = None) -> PolyMatrix:
    """
    The graph Laplacian H^T D H for a cycle basis.

    Args:
        graph (Graph): Connected graph
        basis (Sequence, optional): Z-basis of H_1; defaults to cycle_basis(graph)

    Returns:
        PolyMatrix: Symmetric h x h matrix with det equal to Psi_G
    """
    if basis is None:
        basis = cycle_basis(graph)
    validate_basis(graph, basis)
    ring = poly_ring(graph.edge_ids)
    h = len(basis)
    rows = [[ring.zero] * h for _ in range(h)]
    for edge in graph.edges:
        var = edge_var(ring, edge.id)
        c = [cycle.get(edge.id, 0) for cycle in basis]
        for a in range(h):
            if not c[a]:
                continue
            for b in range(h):
                if c[b]:
                    rows[a][b] += c[a] * c[b] * var
    return PolyMatrix(rows, ring)


def build_gen_laplacian(graph: Graph, kin: Kinematics, routing: Optional[Routing] = None,
                        basis: Optional[Sequence[Cycle]] = None) -> Union[PolyMatrix, QuatPolyMatrix]:
    """
    The generalized graph Laplacian H~* D H~ + M~* D M~.

    Returns:
        PolyMatrix in dim 2, QuatPolyMatrix in dim 4
    """
    return laplacian_bundle(graph, kin, routing, basis).lambda_tilde


def determinant_matrix(bundle: LaplacianBundle) -> Tuple[PolyMatrix, int]:
    """The commutative matrix whose determinant is Xi^d, with d = 1 or 2."""
    if bundle.dim == 2:
        return bundle.lambda_tilde, 1
    return bundle.chi_tilde, 2


def verify_det_identity(graph: Graph, kin: Kinematics, routing: Optional[Routing] = None,
                        basis: Optional[Sequence[Cycle]] = None, method: str = 'cofactor') -> Dict[str, Any]:
    """
    Check det Lambda~ = Xi (dim 2) or det chi(Lambda~) = Xi^2 (dim 4) exactly,
    together with det Lambda = Psi and, in dim 2, the mass decomposition
    det Lambda~(mu, m) = (sum a_e m_e^2) det Lambda + det Lambda~(mu, 0).

    Returns:
        Dict: lhs/rhs polynomials and texts plus a boolean per identity
    """
    bundle = laplacian_bundle(graph, kin, routing, basis)
    matrix, power = determinant_matrix(bundle)
    lhs = det_poly(matrix, method)
    xi_g = xi(graph, kin, bundle.ring)
    rhs = xi_g ** power
    psi_g = psi(graph, bundle.ring)
    det_lambda = det_poly(bundle.lambda_matrix, method)

    mass_ok = None
    if bundle.dim == 2:
        massless = laplacian_bundle(graph, kin.massless(), bundle.routing, bundle.basis)
        mass_ok = lhs == mass_form(graph, kin, bundle.ring) * det_lambda + det_poly(massless.lambda_tilde, method)

    report = {
        'graph': graph.name,
        'dim': bundle.dim,
        'lhs': lhs,
        'rhs': rhs,
        'lhs_text': poly_to_text(lhs),
        'rhs_text': poly_to_text(rhs),
        'passed': lhs == rhs,
        'psi_passed': det_lambda == psi_g,
        'mass_decomposition_passed': mass_ok,
    }
    level = logging.INFO if report['passed'] else logging.WARNING
    logger.log(level, f"Determinant identity on {graph.name!r}: {'PASS' if report['passed'] else 'FAIL'}")
    return report


def verify_tadpole_factorization(graph: Graph, kin: Kinematics, edge_id: int) -> Dict[str, Any]:
    """
    Check det Lambda~_G(mu, 0) = a_e det Lambda~_{G minus e}(mu, 0) for a
    tadpole e, with every mass set to zero.
    """
    edge = graph.edge(edge_id)
    if not edge.is_tadpole:
        raise LaplacianError(f"Edge {edge_id} of {graph.name!r} is not a tadpole")
    massless = kin.massless()
    full = laplacian_bundle(graph, massless)
    rest_graph = delete(graph, [edge_id])
    rest = laplacian_bundle(rest_graph, massless)
    full_matrix, power = determinant_matrix(full)
    rest_matrix, _ = determinant_matrix(rest)
    lhs = det_poly(full_matrix)
    rhs = (edge_var(full.ring, edge_id) ** power) * to_ring(det_poly(rest_matrix), full.ring)
    return {'graph': graph.name, 'edge': edge_id, 'lhs_text': poly_to_text(lhs),
            'rhs_text': poly_to_text(rhs), 'passed': lhs == rhs}


def verify_minor_identities(graph: Graph, e1: int, e2: int) -> Dict[str, Any]:
    """
    Minors of the graph Laplacian in a basis where e1, e2 occur only in the
    first and second cycle, each with coefficient 1.

    Checks det Lambda^{1,1} = Psi_{G\\e1}, det Lambda^{2,2} = Psi_{G\\e2},
    det Lambda^{12,12} = Psi_{G\\{e1,e2}} and the Dodgson identity
    (det Lambda^{1,2})^2 = Psi_{G\\e1} Psi_{G\\e2} - Psi_{G\\{e1,e2}} Psi_G.
    The sign relating det Lambda^{1,2} to the forest polynomial difference
    phi^{{s1,s2},{t1,t2}} - phi^{{s1,t2},{s2,t1}} is recorded, not assumed.
    """
    basis = cycle_basis(graph, (e1, e2))
    lam = build_laplacian(graph, basis)
    ring = lam.ring

    def psi_without(ids):
        return to_ring(psi(delete(graph, ids)), ring)

    psi_1, psi_2, psi_12 = psi_without([e1]), psi_without([e2]), psi_without([e1, e2])
    psi_g = psi(graph, ring)
    m11, m22 = lam.minor(0, 0), lam.minor(1, 1)
    m12 = lam.minor(0, 1)
    m1212 = lam.deleted_minor([0, 1], [0, 1])

    # Both forest polynomials carry a_e1 a_e2
    a, b = graph.edge(e1), graph.edge(e2)
    dodgson_forests = (forest_poly(graph, [{a.source, b.source}, {a.target, b.target}], ring)
                       - forest_poly(graph, [{a.source, b.target}, {b.source, a.target}], ring))
    dodgson_forests = dodgson_forests.exquo(edge_var(ring, e1) * edge_var(ring, e2))
    if m12 == dodgson_forests:
        sign = 1
    elif m12 == -dodgson_forests:
        sign = -1
    else:
        sign = 0

    report = {
        'graph': graph.name,
        'edges': [e1, e2],
        'minor_11_passed': m11 == psi_1,
        'minor_22_passed': m22 == psi_2,
        'minor_1212_passed': m1212 == psi_12,
        'dodgson_passed': m12 ** 2 == psi_1 * psi_2 - psi_12 * psi_g,
        'forest_sign': sign,
    }
    report['passed'] = all(report[k] for k in ('minor_11_passed', 'minor_22_passed',
                                               'minor_1212_passed', 'dodgson_passed')) and sign != 0
    return report


def transform(bundle: LaplacianBundle, P: Sequence[Sequence[int]],
              S: Sequence[Any]) -> LaplacianBundle:
    """
    Act by an element (S, P) of the indeterminacy group.

    Each A_e becomes T* A_e T with T = P~ S~, so the generalized Laplacian
    becomes S~* P~^T Lambda~ P~ S~. The new basis is H P and the new routing
    is mu + (H P) s.

    Args:
        bundle (LaplacianBundle): Bundle to transform
        P: h x h integer matrix with det +-1
        S: h shifts (Quaternion, number or component list)

    Returns:
        LaplacianBundle: Transformed bundle
    """
    h = bundle.h
    P = [[int(x) for x in row] for row in P]
    if len(P) != h or any(len(row) != h for row in P):
        raise LaplacianError(f"P must be {h}x{h}")
    if h and abs(Matrix(P).det()) != 1:
        raise LaplacianError(f"P is not invertible over Z: det = {Matrix(P).det()}")
    shifts = [_as_quaternion(s) for s in S]
    if len(shifts) != h:
        raise LaplacianError(f"S must have {h} entries")
    if bundle.dim == 2 and any(s.kind == 'quat' for s in shifts):
        raise LaplacianError("Quaternionic shifts with dim 2 kinematics")

    # T = P~ S~ with P~ = diag(P, 1) and S~ = ((I, s), (0, 1))
    T = [[Quaternion(P[i][j]) for j in range(h)] + [ZERO] for i in range(h)] + [[ZERO] * h + [Quaternion(1)]]
    S_tilde = [[Quaternion(1) if i == j else ZERO for j in range(h)] + [shifts[i]] for i in range(h)]
    S_tilde.append([ZERO] * h + [Quaternion(1)])
    T = quat_matmul(T, S_tilde)
    T_star = quat_adjoint(T)
    pencil = {e: quat_matmul(T_star, quat_matmul(block, T)) for e, block in bundle.pencil.items()}

    new_basis = []
    for j in range(h):
        cycle = {}
        for i in range(h):
            if P[i][j]:
                for edge_id, c in bundle.basis[i].items():
                    cycle[edge_id] = cycle.get(edge_id, 0) + c * P[i][j]
        new_basis.append({e: c for e, c in cycle.items() if c})
    new_routing = bundle.routing.shifted(new_basis, shifts)
    return LaplacianBundle(bundle.graph, bundle.kinematics, tuple(new_basis), new_routing, pencil)


def random_transform(h: int, dim: int, rng: np.random.Generator,
                     steps: int = 4, bound: int = 3) -> Tuple[List[List[int]], List[Quaternion]]:
    """
    A random element (P, S): P a product of elementary integer row
    operations and a sign flip, S rational shifts of the right kind.
    """
    P = [[int(i == j) for j in range(h)] for i in range(h)]
    for _ in range(steps if h > 1 else 0):
        i, j = (int(x) for x in rng.choice(h, size=2, replace=False))
        factor = int(rng.integers(-2, 3))
        for row in P:
            row[i] += factor * row[j]
    if h and rng.random() < 0.5:
        k = int(rng.integers(h))
        for row in P:
            row[k] = -row[k]
    width = 2 if dim == 2 else 4
    shifts = [Quaternion.from_components([int(rng.integers(-bound, bound + 1)) for _ in range(width)])
              for _ in range(h)]
    return P, shifts


def reorient_edges(bundle: LaplacianBundle, edge_ids: Sequence[int]) -> LaplacianBundle:
    """
    Reverse the direction of some edges, flipping their cycle coefficients
    and edge momenta; the pencil is carried over unchanged.
    """
    ids = edge_set(bundle.graph, edge_ids)
    edges = tuple(Edge(e.id, e.target, e.source, e.mass_label) if e.id in ids else e
                  for e in bundle.graph.edges)
    graph = replace(bundle.graph, edges=edges)
    basis = tuple({e: (-c if e in ids else c) for e, c in cycle.items()} for cycle in bundle.basis)
    routing = Routing({e: (-q if e in ids else q) for e, q in bundle.routing.items()})
    flipped = laplacian_bundle(graph, bundle.kinematics, routing, basis)
    return flipped


def rescaled_blocks(bundle: LaplacianBundle, gamma: Any, case: Optional[str] = None) -> Dict[str, Any]:
    """
    Block structure of the generalized Laplacian after a_e -> z a_e for the
    edges of gamma.

    'uv' case (gamma not m.m.): with gamma's cycles first the matrix is
    ((z L_gamma, z B), (z C, D)) with D mod z the generalized Laplacian of
    G/gamma, and det is z^{h_gamma} Psi_gamma Xi_{G/gamma} mod z^{h_gamma+1}.

    'mm' case (gamma m.m.): with momentum routed through gamma and gamma's
    cycles last the matrix is ((A, z B), (z C, z L~_gamma)) with A mod z the
    Laplacian of G/gamma, and det is z^{h_gamma+1} Xi_gamma Psi_{G/gamma} mod
    z^{h_gamma+2}.

    In dim 4 every statement applies to chi, with doubled blocks and squared
    leading coefficients.

    Args:
        bundle (LaplacianBundle): Supplies the graph and kinematics
        gamma: Subgraph or edge ids
        case (str, optional): 'uv' or 'mm'; chosen from the m.m. test if None

    Returns:
        Dict: Per-check booleans, the leading z-order and an overall 'passed'
    """
    graph, kin = bundle.graph, bundle.kinematics
    ids = edge_set(graph, gamma)
    if not ids or ids == set(graph.edge_ids):
        raise LaplacianError("gamma must be a nonempty strict subgraph")
    flags = classify_subgraph(graph, ids, kin)
    if case is None:
        case = 'mm' if flags.mm else 'uv'
    if case == 'mm' and not flags.mm:
        raise LaplacianError(f"Subgraph {sorted(ids)} is not mass-momentum spanning")
    if case not in ('uv', 'mm'):
        raise LaplacianError(f"Unknown rescaling case {case!r}")

    quotient = contract(graph, ids)
    ring = bundle.ring
    d = 1 if bundle.dim == 2 else 2

    if case == 'uv':
        basis, h_gamma = adapted_cycle_basis(graph, ids, gamma_first=True)
        adapted = laplacian_bundle(graph, kin, bundle.routing, basis)
        scaled_rows = range(d * h_gamma)
        quotient_basis = [{e: c for e, c in cycle.items() if e not in ids} for cycle in basis[h_gamma:]]
        quotient_routing = Routing({e: q for e, q in bundle.routing.items() if e not in ids})
        expected_block = laplacian_bundle(quotient, kin, quotient_routing, quotient_basis)
        expected_block = determinant_matrix(expected_block)[0]
        order = d * h_gamma
        leading = (psi_subgraph(graph, ids, ring) * to_ring(xi(quotient, kin), ring)) ** d
    else:
        sub = subgraph_graph(graph, ids)
        if not sub.is_connected():
            raise LaplacianError(f"Disconnected m.m. subgraph {sorted(ids)} is not supported")
        routing = route(graph, kin, prefer=ids)
        basis, h_gamma = adapted_cycle_basis(graph, ids, gamma_first=False)
        adapted = laplacian_bundle(graph, kin, routing, basis)
        h_outer = len(basis) - h_gamma
        scaled_rows = range(d * h_outer, d * (len(basis) + 1))
        quotient_basis = [{e: c for e, c in cycle.items() if e not in ids} for cycle in basis[:h_outer]]
        expected_block = build_laplacian(quotient, quotient_basis)
        if d == 2:
            expected_block = PolyMatrix(
                [[expected_block[i // 2, j // 2] if i % 2 == j % 2 else expected_block.ring.zero
                  for j in range(2 * h_outer)] for i in range(2 * h_outer)],
                expected_block.ring,
            )
        order = d * (h_gamma + 1)
        leading = (to_ring(xi(sub, kin.restricted(l.index for l in sub.legs)), ring)
                   * to_ring(psi(quotient), ring)) ** d

    matrix = determinant_matrix(adapted)[0]
    scaled = matrix.rescale(ids)
    size = scaled.shape[0]
    inner = set(scaled_rows)

    pattern_ok = True
    for i in range(size):
        for j in range(size):
            entry = scaled[i, j]
            if (i in inner or j in inner) and entry and z_order(entry) < 1:
                pattern_ok = False

    outer = [i for i in range(size) if i not in inner]
    block_mod_z = scaled.submatrix(outer, outer).map(lambda p: z_coefficient(p, 0))
    block_ok = block_mod_z == expected_block.set_ring(ring)

    det_scaled = det_poly(scaled)
    lowest = z_order(det_scaled)
    leading_ok = z_coefficient(det_scaled, order) == leading and (lowest is None or lowest >= order)

    report = {
        'graph': graph.name,
        'gamma': sorted(ids),
        'case': case,
        'h_gamma': h_gamma,
        'block_pattern_passed': pattern_ok,
        'quotient_block_passed': block_ok,
        'leading_order': order,
        'lowest_order': lowest,
        'leading_coefficient_passed': leading_ok,
        'leading_coefficient': poly_to_text(leading),
    }
    report['passed'] = pattern_ok and block_ok and leading_ok
    logger.info(f"Rescaling {report['case']} blocks for {sorted(ids)} in {graph.name!r}: "
                f"{'PASS' if report['passed'] else 'FAIL'}")
    return report
