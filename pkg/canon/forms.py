"""
Forms Module for Canon

The algebra of canonical forms (primitive generators of three kinds, wedge
products and the coproduct) and its realization on graph Laplacians: exact
symbolic differential forms in the edge variables and a vectorized numeric
evaluator used by the integrator.
"""

import logging
import re
from fractions import Fraction
from itertools import combinations
from typing import Any, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sympy.combinatorics import Permutation
from sympy.polys.polyerrors import ExactQuotientFailed
from sympy.polys.rings import PolyElement, PolyRing

from canon.graph_core import Graph
from canon.kinematics import Kinematics, Routing
from canon.laplacian import (
    FIRST_KIND, QUATERNIONIC_KIND, SECOND_KIND, LaplacianBundle, laplacian_bundle,
)
from canon.polynomial import (
    PolyMatrix, RationalFn, NumericPoly, constant, edge_var, poly_to_text, ring_edge_ids,
)
from canon.symanzik import psi, xi

# Configure logging
logger = logging.getLogger(__name__)

EXCEPTIONAL_KIND = 'exceptional'

_PREFIX = {FIRST_KIND: 'w', SECOND_KIND: 'p', QUATERNIONIC_KIND: 'pq'}
_KIND_OF_PREFIX = {v: k for k, v in _PREFIX.items()}
_KIND_ORDER = {FIRST_KIND: 0, SECOND_KIND: 1, QUATERNIONIC_KIND: 2, EXCEPTIONAL_KIND: 3}
_TOKEN = re.compile(r'^(pq|p|w)(\d+)$')


class FormSpecError(ValueError):
    """Raised for malformed or inconsistent form specifications."""


class FormConsistencyError(ArithmeticError):
    """Raised when an exact reduction that must succeed does not."""


class SingularMatrixError(ArithmeticError):
    """Raised when a Laplacian is singular at a sample point."""

    def __init__(self, message: str, point: Optional[np.ndarray] = None):
        super().__init__(message)
        self.point = point


def shuffle_sign(sequence: Sequence[int]) -> int:
    """Sign of the permutation sorting a sequence of distinct keys."""
    order = sorted(range(len(sequence)), key=lambda i: sequence[i])
    return -1 if Permutation(order).parity() else 1


# Abstract algebra

class Generator:
    """Primitive generator beta^{2k+1} of a given kind."""

    __slots__ = ('kind', 'degree')

    def __init__(self, kind: str, degree: int):
        if kind not in _KIND_ORDER:
            raise FormSpecError(f"Unknown generator kind {kind!r}")
        if degree < 1 or degree % 2 == 0:
            raise FormSpecError(f"Generators have odd positive degree, got {degree}")
        if kind in (FIRST_KIND, QUATERNIONIC_KIND) and degree % 4 != 1:
            raise FormSpecError(f"{kind} generators only exist in degrees 4k+1, got {degree}")
        if kind == EXCEPTIONAL_KIND and degree != 1:
            raise FormSpecError("The exceptional form has degree 1")
        self.kind = kind
        self.degree = degree

    @property
    def k(self) -> int:
        return (self.degree - 1) // 2

    @property
    def token(self) -> str:
        if self.kind == EXCEPTIONAL_KIND:
            return 'o1'
        return f"{_PREFIX[self.kind]}{self.degree}"

    def sort_key(self) -> Tuple[int, int]:
        return (self.degree, _KIND_ORDER[self.kind])

    def __eq__(self, other):
        return isinstance(other, Generator) and (self.kind, self.degree) == (other.kind, other.degree)

    def __hash__(self):
        return hash((self.kind, self.degree))

    def __repr__(self):
        return f"Generator({self.token})"


Monomial = Tuple[Generator, ...]


def _normalize(monomial: Sequence[Generator]) -> Tuple[int, Monomial]:
    """Sort a wedge of odd generators; returns (sign, sorted) or (0, ()) on a repeat."""
    if len(set(monomial)) != len(monomial):
        return 0, ()
    keys = [g.sort_key() for g in monomial]
    ordered = tuple(sorted(monomial, key=Generator.sort_key))
    return shuffle_sign(keys), ordered


class FormSpec:
    """
    Formal linear combination of wedge monomials in primitive generators,
    kept in graded-commutative normal form.
    """

    __slots__ = ('terms',)

    def __init__(self, terms: Optional[Mapping[Monomial, Any]] = None):
        normal: Dict[Monomial, Fraction] = {}
        for monomial, coeff in (terms or {}).items():
            sign, ordered = _normalize(monomial)
            if not sign:
                continue
            normal[ordered] = normal.get(ordered, Fraction(0)) + sign * Fraction(coeff)
        self.terms = {m: c for m, c in normal.items() if c}
        exceptional = [m for m in self.terms if any(g.kind == EXCEPTIONAL_KIND for g in m)]
        if exceptional and (len(self.terms) > 1 or len(exceptional[0]) > 1):
            raise FormSpecError("o1 can only be used on its own")

    @classmethod
    def unit(cls) -> 'FormSpec':
        return cls({(): 1})

    @classmethod
    def generator(cls, kind: str, degree: int) -> 'FormSpec':
        return cls({(Generator(kind, degree),): 1})

    @classmethod
    def parse(cls, text: str) -> 'FormSpec':
        """
        Parse `token ('^' token)*` with tokens w{4k+1}, p{2k+1}, pq{4k+1},
        the exceptional o1, or the unit 1.

        Args:
            text (str): e.g. 'p3', 'w5^p3'

        Returns:
            FormSpec: Parsed specification
        """
        text = (text or '').strip()
        if not text:
            raise FormSpecError("Empty form specification")
        if text == '1':
            return cls.unit()
        gens = []
        for token in text.split('^'):
            token = token.strip()
            if token == 'o1':
                gens.append(Generator(EXCEPTIONAL_KIND, 1))
                continue
            match = _TOKEN.match(token)
            if not match:
                raise FormSpecError(f"Bad form token {token!r}")
            gens.append(Generator(_KIND_OF_PREFIX[match.group(1)], int(match.group(2))))
        spec = cls({tuple(gens): 1})
        if spec.is_zero():
            logger.info(f"Form specification {text!r} is zero in the exterior algebra")
        return spec

    def is_zero(self) -> bool:
        return not self.terms

    def is_exceptional(self) -> bool:
        return any(g.kind == EXCEPTIONAL_KIND for m in self.terms for g in m)

    @property
    def degree(self) -> int:
        degrees = {sum(g.degree for g in m) for m in self.terms}
        if len(degrees) > 1:
            raise FormSpecError(f"Inhomogeneous form specification {self}")
        return degrees.pop() if degrees else 0

    def kinds(self) -> List[str]:
        return sorted({g.kind for m in self.terms for g in m}, key=_KIND_ORDER.get)

    def monomials(self) -> List[Tuple[Monomial, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: [g.sort_key() for g in t[0]])

    def __add__(self, other: 'FormSpec') -> 'FormSpec':
        merged = dict(self.terms)
        for m, c in other.terms.items():
            merged[m] = merged.get(m, Fraction(0)) + c
        return FormSpec(merged)

    def scale(self, factor: Any) -> 'FormSpec':
        return FormSpec({m: c * Fraction(factor) for m, c in self.terms.items()})

    def wedge(self, other: 'FormSpec') -> 'FormSpec':
        out: Dict[Monomial, Fraction] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                sign, ordered = _normalize(ma + mb)
                if sign:
                    out[ordered] = out.get(ordered, Fraction(0)) + sign * ca * cb
        return FormSpec(out)

    __xor__ = wedge

    def with_kind(self, kind: str) -> 'FormSpec':
        """Replace the kind of every generator, keeping degrees."""
        return FormSpec({tuple(Generator(kind, g.degree) for g in m): c for m, c in self.terms.items()})

    def coproduct(self) -> List[Tuple['FormSpec', 'FormSpec', int]]:
        """
        Delta(g) = 1 (x) g + g (x) 1 on generators, extended multiplicatively
        with Koszul signs.

        Returns:
            List of (left, right, sign); the left factor carries the
            coefficient of the monomial
        """
        out = []
        for monomial, coeff in self.monomials():
            n = len(monomial)
            for size in range(n + 1):
                for left_idx in combinations(range(n), size):
                    right_idx = [i for i in range(n) if i not in left_idx]
                    inversions = sum(1 for r in right_idx for l in left_idx if r < l)
                    left = FormSpec({tuple(monomial[i] for i in left_idx): coeff})
                    right = FormSpec({tuple(monomial[i] for i in right_idx): 1})
                    out.append((left, right, -1 if inversions % 2 else 1))
        return out

    def __eq__(self, other):
        return isinstance(other, FormSpec) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __str__(self):
        if not self.terms:
            return '0'
        parts = []
        for monomial, coeff in self.monomials():
            body = '^'.join(g.token for g in monomial) or '1'
            if coeff == 1:
                parts.append(body)
            elif coeff == -1:
                parts.append('-' + body)
            else:
                parts.append(f"{coeff}*{body}")
        return '+'.join(parts).replace('+-', '-')

    def __repr__(self):
        return f"FormSpec({self})"


def vanishes_structurally(spec: FormSpec, h: int, kind_override: Optional[str] = None) -> bool:
    """
    True when every monomial contains a generator that vanishes on a graph
    of loop number h: first kind in degrees 4k+3 or with k >= h, second
    kind with k >= h+1, quaternionic in degrees 4k+3 or with k >= 2(h+1).
    """
    def dead(g: Generator) -> bool:
        kind = kind_override or g.kind
        if kind == FIRST_KIND:
            return g.degree % 4 == 3 or g.k >= h
        if kind == SECOND_KIND:
            return g.k >= h + 1
        if kind == QUATERNIONIC_KIND:
            return g.degree % 4 == 3 or g.k >= 2 * (h + 1)
        return False

    return all(any(dead(g) for g in m) for m in spec.terms)


# Symbolic forms

class SymbolicForm:
    """
    Differential form sum_S f_S da_S with S a sorted tuple of edge ids and
    f_S a rational function.
    """

    __slots__ = ('ring', 'degree', 'coeffs')

    def __init__(self, ring: PolyRing, degree: int, coeffs: Optional[Mapping[Tuple[int, ...], RationalFn]] = None):
        self.ring = ring
        self.degree = degree
        self.coeffs = {tuple(S): f for S, f in (coeffs or {}).items() if not f.is_zero()}
        for S in self.coeffs:
            if len(S) != degree:
                raise FormSpecError(f"Term {S} does not have degree {degree}")

    @classmethod
    def zero(cls, ring: PolyRing, degree: int) -> 'SymbolicForm':
        return cls(ring, degree)

    @classmethod
    def function(cls, f: RationalFn) -> 'SymbolicForm':
        return cls(f.ring, 0, {(): f})

    @classmethod
    def differential(cls, ring: PolyRing, edge_id: int) -> 'SymbolicForm':
        return cls(ring, 1, {(edge_id,): RationalFn(ring.one)})

    @property
    def variables(self) -> List[int]:
        return ring_edge_ids(self.ring)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: 'SymbolicForm') -> 'SymbolicForm':
        if other.degree != self.degree:
            raise FormSpecError("Cannot add forms of different degrees")
        out = dict(self.coeffs)
        for S, f in other.coeffs.items():
            out[S] = out[S] + f if S in out else f
        return SymbolicForm(self.ring, self.degree, out)

    def __neg__(self) -> 'SymbolicForm':
        return SymbolicForm(self.ring, self.degree, {S: -f for S, f in self.coeffs.items()})

    def __sub__(self, other: 'SymbolicForm') -> 'SymbolicForm':
        return self + (-other)

    def scale(self, factor: Any) -> 'SymbolicForm':
        """Multiply by a constant or a RationalFn."""
        if isinstance(factor, RationalFn):
            return SymbolicForm(self.ring, self.degree, {S: f * factor for S, f in self.coeffs.items()})
        c = constant(self.ring, factor)
        return SymbolicForm(self.ring, self.degree, {S: f * c for S, f in self.coeffs.items()})

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, SymbolicForm):
            return NotImplemented
        if self.degree != other.degree:
            return self.is_zero() and other.is_zero()
        for S in set(self.coeffs) | set(other.coeffs):
            a = self.coeffs.get(S)
            b = other.coeffs.get(S)
            if a is None or b is None:
                return False
            if not a == b:
                return False
        return True

    __hash__ = None

    def coefficient(self, S: Sequence[int]) -> RationalFn:
        return self.coeffs.get(tuple(S), RationalFn(self.ring.zero))

    def terms(self) -> List[Tuple[Tuple[int, ...], RationalFn]]:
        return sorted(self.coeffs.items())

    def conjugate(self) -> 'SymbolicForm':
        return SymbolicForm(self.ring, self.degree, {S: f.conjugate() for S, f in self.coeffs.items()})

    def to_dict(self) -> Dict[str, Any]:
        return {
            'degree': self.degree,
            'variables': [f"a{e}" for e in self.variables],
            'terms': [
                {'edges': list(S), 'numerator': poly_to_text(f.num), 'denominator': poly_to_text(f.den)}
                for S, f in self.terms()
            ],
        }

    def __repr__(self):
        return f"SymbolicForm(degree={self.degree}, terms={len(self.coeffs)})"


def wedge(a: SymbolicForm, b: SymbolicForm) -> SymbolicForm:
    """
    Exterior product by shuffle-sign expansion.

    Args:
        a, b (SymbolicForm): Forms over the same ring

    Returns:
        SymbolicForm: a ^ b of degree deg a + deg b
    """
    if a.ring != b.ring:
        raise FormSpecError("Wedge of forms over different rings")
    out: Dict[Tuple[int, ...], RationalFn] = {}
    for S, f in a.coeffs.items():
        for T, g in b.coeffs.items():
            if set(S) & set(T):
                continue
            merged = S + T
            key = tuple(sorted(merged))
            term = f * g if shuffle_sign(merged) > 0 else -(f * g)
            out[key] = out[key] + term if key in out else term
    return SymbolicForm(a.ring, a.degree + b.degree, out)


def exterior_derivative(a: SymbolicForm) -> SymbolicForm:
    """
    d(f da_S) = sum_v (df/da_v) da_v ^ da_S.

    Args:
        a (SymbolicForm): Form with rational coefficients

    Returns:
        SymbolicForm: da
    """
    ring = a.ring
    out: Dict[Tuple[int, ...], RationalFn] = {}
    for S, f in a.coeffs.items():
        for v in ring_edge_ids(ring):
            if v in S:
                continue
            df = f.diff(edge_var(ring, v))
            if df.is_zero():
                continue
            below = sum(1 for s in S if s < v)
            key = tuple(sorted(S + (v,)))
            term = -df if below % 2 else df
            out[key] = out[key] + term if key in out else term
    return SymbolicForm(ring, a.degree + 1, out)


def restrict(a: SymbolicForm, edge_id: int) -> SymbolicForm:
    """Pull back to the face a_e = 0: set a_e to zero and drop every da_e term."""
    out = {}
    for S, f in a.coeffs.items():
        if edge_id in S:
            continue
        out[S] = f.set_zero(edge_id)
    return SymbolicForm(a.ring, a.degree, out)


def euler_contraction(a: SymbolicForm) -> SymbolicForm:
    """Interior product with the Euler vector field sum_e a_e d/da_e."""
    ring = a.ring
    if a.degree == 0:
        return SymbolicForm.zero(ring, 0)
    out: Dict[Tuple[int, ...], RationalFn] = {}
    for S, f in a.coeffs.items():
        for j, s in enumerate(S):
            key = S[:j] + S[j + 1:]
            term = f * edge_var(ring, s)
            term = -term if j % 2 else term
            out[key] = out[key] + term if key in out else term
    return SymbolicForm(ring, a.degree - 1, out)


def evaluate(a: SymbolicForm, points: np.ndarray, frame: Optional[np.ndarray] = None) -> Any:
    """
    Evaluate coefficients at points of shape (S, N), in ring variable order.

    Without a frame returns {S: values}; with a frame of shape (d, N),
    d = degree, returns the values of the form on those tangent vectors.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    variables = a.variables
    values = {S: NumericPoly(f.num)(points) / NumericPoly(f.den)(points) for S, f in a.coeffs.items()}
    if frame is None:
        return values
    frame = np.atleast_2d(np.asarray(frame, dtype=float))
    if frame.shape[0] != a.degree:
        raise FormSpecError(f"A {a.degree}-form needs {a.degree} tangent vectors, got {frame.shape[0]}")
    total = np.zeros(points.shape[0], dtype=np.complex128)
    for S, vals in values.items():
        cols = [variables.index(e) for e in S]
        total += vals * (np.linalg.det(frame[:, cols]) if cols else 1.0)
    return total


def omega_form(ring: PolyRing) -> SymbolicForm:
    """Omega = sum_i (-1)^i a_i da_1 ^ ... ^ (da_i omitted) ^ ... ^ da_N, i from 1."""
    ids = ring_edge_ids(ring)
    out = {}
    for i, e in enumerate(ids, start=1):
        rest = tuple(x for x in ids if x != e)
        term = RationalFn(edge_var(ring, e))
        out[rest] = -term if i % 2 else term
    return SymbolicForm(ring, len(ids) - 1, out)


def feynman_form(numerator: PolyElement, base: PolyElement, power: int) -> SymbolicForm:
    """numerator * Omega / base^power."""
    ring = numerator.ring
    omega = omega_form(ring)
    return omega.scale(RationalFn(numerator, base ** power))


def omega_numerator(form: SymbolicForm, base: PolyElement, power: int) -> PolyElement:
    """
    The polynomial P with form = P Omega / base^power.

    Raises:
        FormConsistencyError: If the form is not of that shape
    """
    ring = form.ring
    ids = ring_edge_ids(ring)
    if form.degree != len(ids) - 1:
        raise FormSpecError(f"Expected a form of degree {len(ids) - 1}, got {form.degree}")
    denominator = base ** power
    first = form.coefficient(tuple(ids[1:]))
    try:
        P = (-(first.num * denominator)).exquo(first.den * edge_var(ring, ids[0]))
    except ExactQuotientFailed as e:
        raise FormConsistencyError("Form is not a polynomial multiple of Omega/base^power") from e
    if not form == feynman_form(P, base, power):
        raise FormConsistencyError("Form is not proportional to Omega")
    return P


def primitive_on_matrix(X: PolyMatrix, k: int,
                        inverse: Optional[Tuple[PolyMatrix, PolyElement]] = None) -> SymbolicForm:
    """
    beta^{2k+1}_X = tr((X^{-1} dX)^{2k+1}) for X affine-linear in the edge
    variables.

    With X^{-1} = P / F (P = adj X, F = det X unless `inverse` supplies
    another pair), the coefficient of da_S is the signed sum over orderings
    of S of tr(P A_{s1} ... P A_{sn}) / F^n. It is reduced exactly to
    denominator F^{k+1}.

    Args:
        X (PolyMatrix): Square commutative matrix with det X != 0
        k (int): Degree parameter, the form has degree 2k+1
        inverse (Tuple[PolyMatrix, PolyElement], optional): (P, F) with X^{-1} = P/F

    Returns:
        SymbolicForm: The primitive form

    Raises:
        FormConsistencyError: If the exact reduction fails
    """
    if not isinstance(X, PolyMatrix):
        raise FormSpecError(
            f"Primitive forms need a commutative PolyMatrix, got {type(X).__name__}; "
            "pass quaternionic matrices through chi"
        )
    n = 2 * k + 1
    ring = X.ring
    if inverse is None:
        P, F = X.adjugate(), X.det()
    else:
        P, F = inverse
    if not F:
        raise FormConsistencyError("Matrix is singular as a polynomial matrix")

    Y = {}
    for v in ring_edge_ids(ring):
        A = X.coefficient_matrix(v)
        if not A.is_zero():
            Y[v] = P @ A
    if n > len(Y):
        return SymbolicForm.zero(ring, n)

    theta: Dict[Tuple[int, ...], PolyMatrix] = {(v,): Yv for v, Yv in Y.items()}
    for _ in range(n - 2):
        grown: Dict[Tuple[int, ...], PolyMatrix] = {}
        for S, M in theta.items():
            for v, Yv in Y.items():
                if v in S:
                    continue
                above = sum(1 for s in S if s > v)
                term = M @ Yv
                if above % 2:
                    term = -term
                key = tuple(sorted(S + (v,)))
                grown[key] = grown[key] + term if key in grown else term
        theta = grown

    traces: Dict[Tuple[int, ...], PolyElement] = {}
    if n == 1:
        for v, Yv in Y.items():
            traces[(v,)] = Yv.trace()
    else:
        for S, M in theta.items():
            for v, Yv in Y.items():
                if v in S:
                    continue
                above = sum(1 for s in S if s > v)
                t = M.trace_product(Yv)
                if above % 2:
                    t = -t
                key = tuple(sorted(S + (v,)))
                traces[key] = traces.get(key, ring.zero) + t

    reducer = F ** k
    stored = F ** (k + 1)
    coeffs = {}
    for S, t in traces.items():
        if not t:
            continue
        try:
            coeffs[S] = RationalFn(t.exquo(reducer), stored)
        except ExactQuotientFailed as e:
            raise FormConsistencyError(f"Coefficient of da_{S} is not divisible by det^{k}") from e
    return SymbolicForm(ring, n, coeffs)


def _check_kinds(spec: FormSpec, dim: int) -> None:
    kinds = spec.kinds()
    if SECOND_KIND in kinds and dim != 2:
        raise FormSpecError("Second-kind generators p{2k+1} need dim 2 kinematics; use pq{4k+1}")
    if QUATERNIONIC_KIND in kinds and dim != 4:
        raise FormSpecError("Quaternionic generators pq{4k+1} need dim 4 kinematics")


def _matrix_and_inverse(bundle: LaplacianBundle, kind: str) -> Tuple[PolyMatrix, Optional[Tuple[PolyMatrix, PolyElement]]]:
    X = bundle.form_matrix(kind)
    if kind != QUATERNIONIC_KIND:
        return X, None
    # det chi = Xi^2 and chi^{-1} = (adj chi / Xi) / Xi
    xi_g = xi(bundle.graph, bundle.kinematics, bundle.ring)
    try:
        P = X.adjugate().exquo(xi_g)
    except ExactQuotientFailed as e:
        raise FormConsistencyError("adj(chi) is not divisible by Xi") from e
    return X, (P, xi_g)


def realize(spec: FormSpec, graph: Graph, kin: Kinematics, routing: Optional[Routing] = None,
            basis: Optional[Sequence[Mapping[int, int]]] = None,
            bundle: Optional[LaplacianBundle] = None) -> SymbolicForm:
    """
    Realize a form specification on the Laplacians of a graph.

    First-kind generators use Lambda_G, second-kind ones the generalized
    Laplacian, quaternionic ones its complex adjoint. o1 is realized by
    o1_form.

    Args:
        spec (FormSpec): Homogeneous specification
        graph (Graph): Connected graph
        kin (Kinematics): Momenta and masses
        routing, basis: Optional choices; see laplacian_bundle
        bundle (LaplacianBundle, optional): Prebuilt bundle

    Returns:
        SymbolicForm: Exact form; zero if the degree exceeds the edge count
    """
    _check_kinds(spec, kin.dim)
    bundle = bundle or laplacian_bundle(graph, kin, routing, basis)
    ring = bundle.ring
    degree = spec.degree
    if spec.is_exceptional():
        coeff = next(iter(spec.terms.values()))
        return o1_form(graph, kin, bundle=bundle).scale(coeff)
    if degree > graph.num_edges:
        return SymbolicForm.zero(ring, degree)

    primitives: Dict[Generator, SymbolicForm] = {}
    total = SymbolicForm.zero(ring, degree)
    for monomial, coeff in spec.monomials():
        form = SymbolicForm.function(RationalFn(ring.one))
        for g in monomial:
            if g not in primitives:
                X, inverse = _matrix_and_inverse(bundle, g.kind)
                primitives[g] = primitive_on_matrix(X, g.k, inverse)
            form = wedge(form, primitives[g])
            if form.is_zero():
                break
        if form.is_zero():
            continue
        total = total + form.scale(coeff)
    logger.debug(f"Realized {spec} on {graph.name!r}: {len(total.coeffs)} terms")
    return total


def o1_form(graph: Graph, kin: Kinematics, routing: Optional[Routing] = None,
            basis: Optional[Sequence[Mapping[int, int]]] = None,
            bundle: Optional[LaplacianBundle] = None) -> SymbolicForm:
    """
    The exceptional form h d log Xi - (h+1) d log Psi.

    Returns:
        SymbolicForm: Degree-1 form, d log(Xi^h / Psi^(h+1))
    """
    bundle = bundle or laplacian_bundle(graph, kin, routing, basis)
    ring = bundle.ring
    h = bundle.h
    psi_g = psi(graph, ring)
    xi_g = xi(graph, kin, ring)
    out = {}
    for e in graph.edge_ids:
        var = edge_var(ring, e)
        num = h * xi_g.diff(var) * psi_g - (h + 1) * psi_g.diff(var) * xi_g
        if num:
            out[(e,)] = RationalFn(num, xi_g * psi_g)
    return SymbolicForm(ring, 1, out)


def denominator_base(spec: FormSpec, graph: Graph, kin: Kinematics, ring: PolyRing) -> Tuple[PolyElement, str]:
    """
    The polynomial D with realize(spec) = N Omega / D for top-degree
    monomial specs: Psi^(k+1) per first-kind generator and Xi^(k+1) per
    second-kind or quaternionic one.

    Returns:
        Tuple[PolyElement, str]: (D, text such as 'Psi^3*Xi^2')
    """
    if len(spec.terms) != 1:
        raise FormSpecError("Denominators are reported for single monomials only")
    monomial = next(iter(spec.terms))
    psi_power = sum(g.k + 1 for g in monomial if g.kind == FIRST_KIND)
    xi_power = sum(g.k + 1 for g in monomial if g.kind in (SECOND_KIND, QUATERNIONIC_KIND))
    base = ring.one
    if psi_power:
        base *= psi(graph, ring) ** psi_power
    if xi_power:
        base *= xi(graph, kin, ring) ** xi_power
    parts = [f"Psi^{psi_power}"] * bool(psi_power) + [f"Xi^{xi_power}"] * bool(xi_power)
    return base, '*'.join(parts) or '1'


# Numeric evaluation

def simplex_frame(n: int) -> np.ndarray:
    """Tangent frame e_i - e_N (i < N) of the slice sum a = 1, shape (N-1, N)."""
    frame = np.zeros((max(n - 1, 0), n))
    for i in range(n - 1):
        frame[i, i] = 1.0
        frame[i, n - 1] = -1.0
    return frame


def _subset_shuffles(indices: Tuple[int, ...], sizes: Sequence[int]) -> Iterator[Tuple[int, List[Tuple[int, ...]]]]:
    """Split sorted indices into consecutive-size sorted blocks with the shuffle sign."""
    if not sizes:
        yield 1, []
        return
    for first in combinations(indices, sizes[0]):
        rest = tuple(i for i in indices if i not in first)
        for sign, blocks in _subset_shuffles(rest, sizes[1:]):
            yield sign * shuffle_sign(first + rest), [first] + blocks


class NumericForm:
    """
    Floating-point evaluator of a realized form on tangent frames.

    Inverses are taken by batched linear solves; the signed products over
    frame subsets follow the same recursion as the symbolic path.
    """

    def __init__(self, spec: FormSpec, bundle: LaplacianBundle, dtype=np.complex128):
        _check_kinds(spec, bundle.dim)
        self.spec = spec
        self.bundle = bundle
        self.dtype = dtype
        self.h = bundle.h
        kinds = set(spec.kinds())
        if EXCEPTIONAL_KIND in kinds:
            kinds = {FIRST_KIND, SECOND_KIND if bundle.dim == 2 else QUATERNIONIC_KIND}
        self.pencils = {kind: bundle.numeric_pencil(kind, dtype) for kind in kinds}

    @property
    def degree(self) -> int:
        return self.spec.degree

    def _solve(self, kind: str, points: np.ndarray, frame: np.ndarray) -> Optional[np.ndarray]:
        pencil = self.pencils[kind]
        if pencil.shape[-1] == 0:
            return None
        X = np.einsum('sn,nij->sij', points.astype(self.dtype), pencil)
        B = np.einsum('dn,nij->dij', frame.astype(self.dtype), pencil)
        try:
            return np.linalg.solve(X[:, None, :, :], np.broadcast_to(B[None], (X.shape[0],) + B.shape))
        except np.linalg.LinAlgError:
            dets = np.abs(np.linalg.det(X))
            bad = int(np.argmin(dets))
            raise SingularMatrixError(
                f"Singular {kind} Laplacian of {self.bundle.graph.name!r} at a = {points[bad].tolist()}",
                points[bad],
            )

    @staticmethod
    def _primitive_values(Y: Optional[np.ndarray], n: int, d: int, size: int) -> Dict[Tuple[int, ...], np.ndarray]:
        """Values of tr((X^-1 dX)^n) on every sorted n-subset of the d frame vectors."""
        if Y is None:
            return {}
        theta = {(i,): Y[:, i] for i in range(d)}
        if n == 1:
            return {(i,): np.trace(Y[:, i], axis1=1, axis2=2) for i in range(d)}
        for _ in range(n - 2):
            grown = {}
            for S, M in theta.items():
                for v in range(d):
                    if v in S:
                        continue
                    above = sum(1 for s in S if s > v)
                    term = M @ Y[:, v]
                    key = tuple(sorted(S + (v,)))
                    term = -term if above % 2 else term
                    grown[key] = grown[key] + term if key in grown else term
            theta = grown
        values = {}
        for S, M in theta.items():
            for v in range(d):
                if v in S:
                    continue
                above = sum(1 for s in S if s > v)
                t = np.einsum('sij,sji->s', M, Y[:, v])
                key = tuple(sorted(S + (v,)))
                t = -t if above % 2 else t
                values[key] = values[key] + t if key in values else t
        return values

    def evaluate(self, points: np.ndarray, frame: np.ndarray) -> np.ndarray:
        """
        Value of the form at points (S, N) on a frame (d, N).

        Returns:
            np.ndarray: Shape (S,); zero when the degree exceeds d

        Raises:
            SingularMatrixError: If a Laplacian is singular at some point
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        frame = np.atleast_2d(np.asarray(frame, dtype=float))
        S, d = points.shape[0], frame.shape[0]
        degree = self.degree
        out = np.zeros(S, dtype=self.dtype)
        if degree > d:
            return out
        if degree < d:
            raise FormSpecError(f"A {degree}-form needs {degree} tangent vectors, got {d}")

        solved = {kind: self._solve(kind, points, frame) for kind in self.pencils}

        if self.spec.is_exceptional():
            coeff = complex(next(iter(self.spec.terms.values())))
            second = SECOND_KIND if self.bundle.dim == 2 else QUATERNIONIC_KIND
            half = 1.0 if second == SECOND_KIND else 0.5
            xi_part = self._primitive_values(solved[second], 1, d, S).get((0,), out)
            psi_part = self._primitive_values(solved[FIRST_KIND], 1, d, S).get((0,), out)
            return coeff * (self.h * half * xi_part - (self.h + 1) * psi_part)

        cache: Dict[Generator, Dict[Tuple[int, ...], np.ndarray]] = {}
        indices = tuple(range(d))
        for monomial, coeff in self.spec.monomials():
            for g in monomial:
                if g not in cache:
                    cache[g] = self._primitive_values(solved[g.kind], g.degree, d, S)
            sizes = [g.degree for g in monomial]
            for sign, blocks in _subset_shuffles(indices, sizes):
                term = np.full(S, sign * float(coeff), dtype=self.dtype)
                for g, block in zip(monomial, blocks):
                    vals = cache[g].get(block)
                    if vals is None:
                        term = None
                        break
                    term = term * vals
                if term is not None:
                    out = out + term
        return out


def evaluate_numeric(spec: FormSpec, graph: Graph, kin: Kinematics, point: Sequence[float],
                     frame: Optional[np.ndarray] = None, routing: Optional[Routing] = None,
                     basis: Optional[Sequence[Mapping[int, int]]] = None) -> complex:
    """
    Value of a realized form at one interior point on a tangent frame
    (the simplex frame by default).
    """
    bundle = laplacian_bundle(graph, kin, routing, basis)
    if frame is None:
        frame = simplex_frame(graph.num_edges)
    return complex(NumericForm(spec, bundle).evaluate(np.asarray(point, dtype=float)[None, :], frame)[0])


# Property checks

def check_closed(spec: FormSpec, graph: Graph, kin: Kinematics) -> Dict[str, Any]:
    """d(realize(spec)) = 0 exactly."""
    form = realize(spec, graph, kin)
    d_form = exterior_derivative(form)
    return {'check': 'closed', 'graph': graph.name, 'form': str(spec),
            'terms': len(form.coeffs), 'passed': d_form.is_zero()}


def check_restriction(spec: FormSpec, graph: Graph, kin: Kinematics) -> Dict[str, Any]:
    """
    realize(spec, G) restricted to a_e = 0 equals realize(spec, G/e) for
    every edge e that is neither a tadpole nor an m.m. subgraph on its own.
    """
    from canon.graph_core import classify_subgraph, contract

    form = realize(spec, graph, kin)
    edges = {}
    for edge in graph.edges:
        if edge.is_tadpole or classify_subgraph(graph, [edge.id], kin).mm:
            continue
        quotient = contract(graph, [edge.id])
        edges[edge.id] = restrict(form, edge.id) == realize(spec, quotient, kin)
    return {'check': 'restrict', 'graph': graph.name, 'form': str(spec),
            'edges': edges, 'passed': all(edges.values())}


def check_invariance(spec: FormSpec, graph: Graph, kin: Kinematics,
                     rng: Optional[np.random.Generator] = None, trials: int = 5) -> Dict[str, Any]:
    """realize(spec) is unchanged under random changes of cycle basis and routing."""
    from canon.laplacian import random_transform, transform

    rng = rng or np.random.default_rng(0)
    bundle = laplacian_bundle(graph, kin)
    reference = realize(spec, graph, kin, bundle=bundle)
    results = []
    for _ in range(trials):
        P, S = random_transform(bundle.h, bundle.dim, rng)
        moved = transform(bundle, P, S)
        results.append(realize(spec, graph, kin, bundle=moved) == reference)
    return {'check': 'invariance', 'graph': graph.name, 'form': str(spec),
            'trials': trials, 'passed': all(results)}


PROPERTY_CHECKS = {
    'closed': check_closed,
    'restrict': check_restriction,
    'invariance': check_invariance,
}
