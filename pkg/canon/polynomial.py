"""
Polynomial Module for Canon

Sparse polynomials in the edge variables a1..aN and the rescaling variable
z over the Gaussian rationals, rational functions, polynomial matrices with
exact determinants and minors, and vectorized numeric evaluation.
"""

import logging
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sympy.polys.matrices import DomainMatrix
from sympy.polys.domains import QQ_I
from sympy.polys.orderings import grevlex
from sympy.polys.polyerrors import ExactQuotientFailed
from sympy.polys.rings import PolyElement, PolyRing

from canon.kinematics import qq, to_fraction

# Configure logging
logger = logging.getLogger(__name__)

Z_SYMBOL = 'z'


class PolynomialError(ValueError):
    """Raised for unsupported polynomial operations."""


def poly_ring(edge_ids: Iterable[int]) -> PolyRing:
    """
    Ring QQ_I[a_e for e in edge_ids, z] in grevlex order.

    Rings are cached by sympy, so equal edge sets give the same ring.
    """
    names = [f"a{int(e)}" for e in edge_ids] + [Z_SYMBOL]
    return PolyRing(','.join(names), QQ_I, grevlex)


def ring_edge_ids(ring: PolyRing) -> List[int]:
    """Edge ids of the a-variables of a ring, in generator order."""
    return [int(str(s)[1:]) for s in ring.symbols if str(s) != Z_SYMBOL]


def edge_var(ring: PolyRing, edge_id: int) -> PolyElement:
    try:
        return ring.gens[ring_edge_ids(ring).index(edge_id)]
    except ValueError as e:
        raise PolynomialError(f"Edge {edge_id} has no variable in {ring}") from e


def z_var(ring: PolyRing) -> PolyElement:
    return ring.gens[-1]


def gaussian(value: Any):
    """Coerce ints, Fractions and Quaternions (of Gaussian kind) into QQ_I."""
    if hasattr(value, 'to_gaussian'):
        return value.to_gaussian()
    if isinstance(value, (int, Fraction, str)):
        return QQ_I(qq(value), qq(0))
    return QQ_I.convert(value)


def constant(ring: PolyRing, value: Any) -> PolyElement:
    return ring.ground_new(gaussian(value))


def conjugate(p: PolyElement) -> PolyElement:
    """Complex conjugation of the coefficients."""
    return p.ring.from_dict({m: QQ_I(c.x, -c.y) for m, c in p.items()})


def is_real(p: PolyElement) -> bool:
    return all(c.y == 0 for c in p.values())


def is_imaginary(p: PolyElement) -> bool:
    return all(c.x == 0 for c in p.values())


def to_ring(p: PolyElement, ring: PolyRing) -> PolyElement:
    """Move a polynomial into a ring whose symbols contain its own."""
    if p.ring == ring:
        return p
    return p.set_ring(ring)


def set_variable_zero(p: PolyElement, edge_id: int) -> PolyElement:
    """Substitute a_e = 0, keeping the ring."""
    idx = ring_edge_ids(p.ring).index(edge_id)
    return p.ring.from_dict({m: c for m, c in p.items() if m[idx] == 0})


def rescale(p: PolyElement, gamma: Iterable[int]) -> PolyElement:
    """
    Substitute a_e -> z a_e for e in gamma.

    Args:
        p (PolyElement): Polynomial in the a-variables and z
        gamma (Iterable[int]): Edge ids to rescale

    Returns:
        PolyElement: Rescaled polynomial
    """
    ids = ring_edge_ids(p.ring)
    positions = [ids.index(e) for e in gamma]
    out = {}
    for m, c in p.items():
        extra = sum(m[i] for i in positions)
        key = m[:-1] + (m[-1] + extra,)
        out[key] = c
    return p.ring.from_dict(out)


def z_coefficient(p: PolyElement, power: int) -> PolyElement:
    """Coefficient of z^power, as a polynomial free of z."""
    return p.ring.from_dict({m[:-1] + (0,): c for m, c in p.items() if m[-1] == power})


def z_order(p: PolyElement) -> Optional[int]:
    """Lowest power of z present, None for the zero polynomial."""
    return min((m[-1] for m in p.keys()), default=None)


def is_linear_in_edges(p: PolyElement) -> bool:
    """Affine-linear in the a-variables and free of z."""
    return all(sum(m[:-1]) <= 1 and m[-1] == 0 for m in p.keys())


def _format_rational(value) -> str:
    f = Fraction(int(value.numerator), int(value.denominator))
    return str(f)


def format_coefficient(c) -> str:
    """Render a QQ_I coefficient: '3/2', '-1', '(1+2i)', '2i'."""
    re, im = c.x, c.y
    if im == 0:
        return _format_rational(re)
    im_text = _format_rational(im)
    im_text = {'1': '', '-1': '-'}.get(im_text, im_text) + 'i'
    if re == 0:
        return im_text
    sign = '+' if im > 0 else ''
    return f"({_format_rational(re)}{sign}{im_text})"


def poly_to_text(p: PolyElement) -> str:
    """
    Canonical text: grevlex order, unit coefficients omitted.

    Example: 'a1^2*a2+3*a3-(1+2i)*z'.
    """
    if not p:
        return '0'
    names = [str(s) for s in p.ring.symbols]
    pieces = []
    for monom, coeff in p.terms():
        factors = []
        for name, exp in zip(names, monom):
            if exp == 1:
                factors.append(name)
            elif exp > 1:
                factors.append(f"{name}^{exp}")
        coeff_text = format_coefficient(coeff)
        if factors:
            if coeff_text == '1':
                term = '*'.join(factors)
            elif coeff_text == '-1':
                term = '-' + '*'.join(factors)
            else:
                term = coeff_text + '*' + '*'.join(factors)
        else:
            term = coeff_text
        pieces.append(term)
    text = pieces[0]
    for term in pieces[1:]:
        text += term if term.startswith('-') else '+' + term
    return text


def poly_to_json(p: PolyElement) -> Dict[str, Any]:
    """Machine readable form: variables plus exponent/coefficient terms."""
    return {
        'variables': [str(s) for s in p.ring.symbols],
        'terms': [
            {'exponents': list(m), 'coefficient': [_format_rational(c.x), _format_rational(c.y)]}
            for m, c in p.terms()
        ],
    }


class NumericPoly:
    """
    Vectorized evaluator of a polynomial at points of the a-variables.

    z must not occur.
    """

    def __init__(self, p: PolyElement, dtype=np.complex128):
        if any(m[-1] for m in p.keys()):
            raise PolynomialError("Numeric evaluation does not support z")
        items = list(p.items())
        n_vars = len(p.ring.gens) - 1
        self.exponents = np.array([m[:-1] for m, _ in items], dtype=np.int64).reshape(len(items), n_vars)
        self.coefficients = np.array(
            [complex(float(c.x), float(c.y)) for _, c in items], dtype=dtype
        )

    def __call__(self, points: np.ndarray) -> np.ndarray:
        """
        Evaluate at points of shape (S, N); returns shape (S,).
        """
        points = np.atleast_2d(points)
        if not len(self.coefficients):
            return np.zeros(points.shape[0], dtype=self.coefficients.dtype)
        monomials = np.prod(points[:, None, :] ** self.exponents[None, :, :], axis=2)
        return monomials @ self.coefficients


class RationalFn:
    """
    Quotient of two polynomials of the same ring; equality by
    cross-multiplication.
    """

    __slots__ = ('num', 'den')

    def __init__(self, num: PolyElement, den: Optional[PolyElement] = None):
        if den is None:
            den = num.ring.one
        if not den:
            raise ZeroDivisionError("RationalFn with zero denominator")
        self.num = num
        self.den = den

    @property
    def ring(self) -> PolyRing:
        return self.num.ring

    def is_zero(self) -> bool:
        return not self.num

    def __add__(self, other: 'RationalFn') -> 'RationalFn':
        if self.den == other.den:
            return RationalFn(self.num + other.num, self.den)
        return RationalFn(self.num * other.den + other.num * self.den, self.den * other.den)

    def __neg__(self) -> 'RationalFn':
        return RationalFn(-self.num, self.den)

    def __sub__(self, other: 'RationalFn') -> 'RationalFn':
        return self + (-other)

    def __mul__(self, other: Any) -> 'RationalFn':
        if isinstance(other, RationalFn):
            return RationalFn(self.num * other.num, self.den * other.den)
        return RationalFn(self.num * other, self.den)

    __rmul__ = __mul__

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, RationalFn):
            return NotImplemented
        if self.ring != other.ring:
            ring = self.ring if len(self.ring.gens) >= len(other.ring.gens) else other.ring
            a, b = self.set_ring(ring), other.set_ring(ring)
            return a.num * b.den == b.num * a.den
        return self.num * other.den == other.num * self.den

    __hash__ = None

    def diff(self, var: PolyElement) -> 'RationalFn':
        """Quotient rule derivative."""
        dn = self.num.diff(var)
        dd = self.den.diff(var)
        if not dd:
            return RationalFn(dn, self.den)
        return RationalFn(dn * self.den - self.num * dd, self.den * self.den)

    def set_ring(self, ring: PolyRing) -> 'RationalFn':
        return RationalFn(to_ring(self.num, ring), to_ring(self.den, ring))

    def set_zero(self, edge_id: int) -> 'RationalFn':
        return RationalFn(set_variable_zero(self.num, edge_id), set_variable_zero(self.den, edge_id))

    def conjugate(self) -> 'RationalFn':
        return RationalFn(conjugate(self.num), conjugate(self.den))

    def evaluate(self, point: Sequence[float]) -> complex:
        """Value at a point of the a-variables (z = 0)."""
        pt = np.asarray(point, dtype=float)[None, :]
        return complex(NumericPoly(self.num)(pt)[0] / NumericPoly(self.den)(pt)[0])

    def __repr__(self):
        return f"RationalFn(({poly_to_text(self.num)})/({poly_to_text(self.den)}))"


class PolyMatrix:
    """
    Rectangular matrix of polynomials over one ring.

    Indices are 0-based.
    """

    def __init__(self, rows: Sequence[Sequence[PolyElement]], ring: PolyRing):
        self.ring = ring
        self.rows = [[ring(entry) if not isinstance(entry, PolyElement) else entry for entry in row]
                     for row in rows]
        widths = {len(row) for row in self.rows}
        if len(widths) > 1:
            raise PolynomialError("PolyMatrix rows must have equal length")
        self.shape = (len(self.rows), widths.pop() if widths else 0)

    @classmethod
    def zeros(cls, n: int, m: int, ring: PolyRing) -> 'PolyMatrix':
        return cls([[ring.zero] * m for _ in range(n)], ring)

    @classmethod
    def identity(cls, n: int, ring: PolyRing) -> 'PolyMatrix':
        return cls([[ring.one if i == j else ring.zero for j in range(n)] for i in range(n)], ring)

    @classmethod
    def from_constants(cls, values: Sequence[Sequence[Any]], ring: PolyRing) -> 'PolyMatrix':
        return cls([[constant(ring, v) for v in row] for row in values], ring)

    def __getitem__(self, index: Tuple[int, int]) -> PolyElement:
        i, j = index
        return self.rows[i][j]

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.shape == other.shape and all(
            a == b for ra, rb in zip(self.rows, other.rows) for a, b in zip(ra, rb)
        )

    __hash__ = None

    def is_zero(self) -> bool:
        return all(not entry for row in self.rows for entry in row)

    def map(self, fn: Callable[[PolyElement], PolyElement], ring: Optional[PolyRing] = None) -> 'PolyMatrix':
        return PolyMatrix([[fn(entry) for entry in row] for row in self.rows], ring or self.ring)

    def __add__(self, other: 'PolyMatrix') -> 'PolyMatrix':
        return PolyMatrix([[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)], self.ring)

    def __sub__(self, other: 'PolyMatrix') -> 'PolyMatrix':
        return PolyMatrix([[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self.rows, other.rows)], self.ring)

    def __neg__(self) -> 'PolyMatrix':
        return self.map(lambda p: -p)

    def scale(self, factor: Any) -> 'PolyMatrix':
        return self.map(lambda p: p * factor)

    def __matmul__(self, other: 'PolyMatrix') -> 'PolyMatrix':
        n, k = self.shape
        k2, m = other.shape
        if k != k2:
            raise PolynomialError(f"Shape mismatch {self.shape} @ {other.shape}")
        zero = self.ring.zero
        out = []
        for i in range(n):
            row = self.rows[i]
            out_row = []
            for j in range(m):
                acc = zero
                for t in range(k):
                    a = row[t]
                    if a:
                        b = other.rows[t][j]
                        if b:
                            acc = acc + a * b
                out_row.append(acc)
            out.append(out_row)
        return PolyMatrix(out, self.ring)

    def trace(self) -> PolyElement:
        return sum((self.rows[i][i] for i in range(min(self.shape))), self.ring.zero)

    def trace_product(self, other: 'PolyMatrix') -> PolyElement:
        """tr(self @ other) without forming the product."""
        n, k = self.shape
        acc = self.ring.zero
        for a in range(n):
            for b in range(k):
                x = self.rows[a][b]
                if x:
                    y = other.rows[b][a]
                    if y:
                        acc = acc + x * y
        return acc

    def transpose(self) -> 'PolyMatrix':
        n, m = self.shape
        return PolyMatrix([[self.rows[i][j] for i in range(n)] for j in range(m)], self.ring)

    def conjugate(self) -> 'PolyMatrix':
        return self.map(conjugate)

    def adjoint(self) -> 'PolyMatrix':
        """Conjugate transpose."""
        return self.transpose().conjugate()

    def is_hermitian(self) -> bool:
        return self == self.adjoint()

    def is_symmetric(self) -> bool:
        return self == self.transpose()

    def set_ring(self, ring: PolyRing) -> 'PolyMatrix':
        return self.map(lambda p: to_ring(p, ring), ring)

    def rescale(self, gamma: Iterable[int]) -> 'PolyMatrix':
        gamma = list(gamma)
        return self.map(lambda p: rescale(p, gamma))

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> 'PolyMatrix':
        return PolyMatrix([[self.rows[i][j] for j in cols] for i in rows], self.ring)

    def coefficient_matrix(self, edge_id: int) -> 'PolyMatrix':
        """
        d(self)/d(a_e) for a matrix affine-linear in the a-variables.

        Raises:
            PolynomialError: If an entry is not affine-linear
        """
        var = edge_var(self.ring, edge_id)
        for row in self.rows:
            for entry in row:
                if not is_linear_in_edges(entry):
                    raise PolynomialError("Matrix entries must be affine-linear in the edge variables")
        return self.map(lambda p: p.diff(var))

    # Determinants

    def _require_square(self) -> int:
        n, m = self.shape
        if n != m:
            raise PolynomialError(f"Determinant of non-square matrix {self.shape}")
        return n

    def _cofactor_det(self) -> PolyElement:
        n = self._require_square()
        memo: Dict[Tuple[int, ...], PolyElement] = {}

        def expand(row: int, cols: Tuple[int, ...]) -> PolyElement:
            if row == n:
                return self.ring.one
            if cols in memo:
                return memo[cols]
            acc = self.ring.zero
            for pos, col in enumerate(cols):
                entry = self.rows[row][col]
                if not entry:
                    continue
                rest = cols[:pos] + cols[pos + 1:]
                term = entry * expand(row + 1, rest)
                acc = acc - term if pos % 2 else acc + term
            memo[cols] = acc
            return acc

        return expand(0, tuple(range(n)))

    def det(self, method: str = 'cofactor') -> PolyElement:
        """
        Exact determinant.

        Args:
            method (str): 'cofactor' (Laplace expansion memoized on column
                subsets) or 'bareiss' (fraction-free elimination)

        Returns:
            PolyElement: det of the matrix; 1 for the empty matrix
        """
        n = self._require_square()
        if n == 0:
            return self.ring.one
        if method == 'cofactor':
            return self._cofactor_det()
        if method == 'bareiss':
            domain = self.ring.to_domain()
            dm = DomainMatrix([list(row) for row in self.rows], (n, n), domain)
            return dm.det()
        raise PolynomialError(f"Unknown determinant method {method!r}")

    def minor(self, i: int, j: int) -> PolyElement:
        """Determinant with row i and column j removed."""
        n = self._require_square()
        if not (0 <= i < n and 0 <= j < n):
            raise PolynomialError(f"Minor index ({i}, {j}) out of range for size {n}")
        return self.submatrix([r for r in range(n) if r != i], [c for c in range(n) if c != j]).det()

    def deleted_minor(self, rows: Sequence[int], cols: Sequence[int]) -> PolyElement:
        """Determinant with the given rows and columns removed."""
        n = self._require_square()
        return self.submatrix([r for r in range(n) if r not in rows], [c for c in range(n) if c not in cols]).det()

    def adjugate(self) -> 'PolyMatrix':
        """Classical adjoint, adj(M)[j][i] = (-1)^(i+j) minor(i, j)."""
        n = self._require_square()
        if n == 1:
            return PolyMatrix([[self.ring.one]], self.ring)
        out = [[self.ring.zero] * n for _ in range(n)]
        for i in range(n):
            for j in range(n):
                m = self.minor(i, j)
                out[j][i] = -m if (i + j) % 2 else m
        return PolyMatrix(out, self.ring)

    def exquo(self, divisor: PolyElement) -> 'PolyMatrix':
        """
        Exact entrywise division.

        Raises:
            ExactQuotientFailed: If some entry is not divisible
        """
        return self.map(lambda p: p.exquo(divisor) if p else p)

    def to_numpy(self, dtype=np.complex128) -> np.ndarray:
        """Constant matrix as a numpy array."""
        out = np.zeros(self.shape, dtype=dtype)
        for i, row in enumerate(self.rows):
            for j, entry in enumerate(row):
                if not entry:
                    continue
                if any(any(m) for m in entry.keys()):
                    raise PolynomialError("to_numpy needs constant entries")
                c = entry[self.ring.zero_monom]
                out[i, j] = complex(float(c.x), float(c.y))
        return out

    def to_text(self) -> List[List[str]]:
        return [[poly_to_text(entry) for entry in row] for row in self.rows]

    def __repr__(self):
        return f"PolyMatrix({self.to_text()})"


def det_poly(matrix: Any, method: str = 'cofactor') -> PolyElement:
    """
    Determinant of a commutative polynomial matrix.

    Args:
        matrix (PolyMatrix): Square matrix over the Gaussian rationals
        method (str): 'cofactor' or 'bareiss'

    Returns:
        PolyElement: Exact determinant

    Raises:
        PolynomialError: For quaternionic matrices, which need chi first
    """
    if not isinstance(matrix, PolyMatrix):
        raise PolynomialError(
            f"Determinant needs a commutative PolyMatrix, got {type(matrix).__name__}; "
            "pass quaternionic matrices through chi first"
        )
    return matrix.det(method)


def minor(matrix: PolyMatrix, i: int, j: int) -> PolyElement:
    return matrix.minor(i, j)


def exact_divide(p: PolyElement, q: PolyElement) -> Optional[PolyElement]:
    """p / q if exact, else None."""
    try:
        return p.exquo(q)
    except ExactQuotientFailed:
        return None
