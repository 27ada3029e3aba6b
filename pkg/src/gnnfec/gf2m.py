"""GF(2) polynomial arithmetic and GF(2^m) extension fields.

Polynomials over GF(2) are bit-packed integers, lowest degree first
(bit ``i`` is the coefficient of ``x^i``).  Extension fields are realized
as log/antilog tables over a primitive polynomial, which is all the BCH
construction needs.  Binary matrix row reduction lives here as well.
"""

import numpy as np

from .errors import EmptyInput, InvalidParameter, NotPrimitive


def _poly_mul_bits(a, b):
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def _poly_divmod_bits(a, b):
    if b == 0:
        raise ZeroDivisionError("polynomial division by zero")
    db = b.bit_length() - 1
    q = 0
    while a and a.bit_length() - 1 >= db:
        shift = a.bit_length() - 1 - db
        q ^= 1 << shift
        a ^= b << shift
    return q, a


def _poly_gcd_bits(a, b):
    while b:
        a, b = b, _poly_divmod_bits(a, b)[1]
    return a


class Gf2Poly:
    """Polynomial over GF(2), stored as a bit-packed integer."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        bits = int(bits)
        if bits < 0:
            raise InvalidParameter("polynomial bits must be non-negative")
        self.bits = bits

    @classmethod
    def from_coeffs(cls, coeffs):
        """Build from a coefficient sequence, lowest degree first."""
        bits = 0
        for i, c in enumerate(coeffs):
            if c not in (0, 1):
                raise InvalidParameter("coefficients must be 0 or 1")
            bits |= c << i
        return cls(bits)

    @property
    def degree(self):
        """Degree of the polynomial; -1 for the zero polynomial."""
        return self.bits.bit_length() - 1

    def coeffs(self):
        """Coefficient list, lowest degree first."""
        if self.bits == 0:
            return [0]
        return [(self.bits >> i) & 1 for i in range(self.degree + 1)]

    def __eq__(self, other):
        return isinstance(other, Gf2Poly) and self.bits == other.bits

    def __hash__(self):
        return hash(("Gf2Poly", self.bits))

    def __str__(self):
        if self.bits == 0:
            return "0"
        terms = []
        for i in range(self.degree, -1, -1):
            if (self.bits >> i) & 1:
                terms.append("1" if i == 0 else ("x" if i == 1 else f"x^{i}"))
        return " + ".join(terms)

    def __repr__(self):
        return f"Gf2Poly({self})"


def _as_bits(p):
    return p.bits if isinstance(p, Gf2Poly) else int(p)


def poly_mul(a, b):
    """Product of two GF(2) polynomials."""
    return Gf2Poly(_poly_mul_bits(_as_bits(a), _as_bits(b)))


def poly_divmod(a, b):
    """Quotient and remainder of GF(2) polynomial division."""
    q, r = _poly_divmod_bits(_as_bits(a), _as_bits(b))
    return Gf2Poly(q), Gf2Poly(r)


def poly_gcd(a, b):
    """Greatest common divisor of two GF(2) polynomials."""
    return Gf2Poly(_poly_gcd_bits(_as_bits(a), _as_bits(b)))


def poly_lcm(polys):
    """Least common multiple of a non-empty list of nonzero polynomials.

    Parameters
    ----------
    polys : sequence of Gf2Poly or int
        Bit-packed polynomials; must all be nonzero.

    Returns
    -------
    Gf2Poly
        Divisible by every input (remainder zero).
    """
    items = [_as_bits(p) for p in polys]
    if not items:
        raise EmptyInput("poly_lcm needs at least one polynomial")
    if any(p == 0 for p in items):
        raise InvalidParameter("poly_lcm of the zero polynomial is undefined")
    acc = items[0]
    for p in items[1:]:
        acc = _poly_mul_bits(acc, _poly_divmod_bits(p, _poly_gcd_bits(acc, p))[0])
    return Gf2Poly(acc)


def _build_tables(m, poly_bits):
    """Log/antilog tables for alpha = x mod poly; None if not primitive."""
    size = 1 << m
    order = size - 1
    antilog = np.zeros(order, dtype=np.int64)
    log = np.zeros(size, dtype=np.int64)
    seen = bytearray(size)
    x = 1
    for e in range(order):
        if seen[x]:
            return None
        seen[x] = 1
        antilog[e] = x
        log[x] = e
        x <<= 1
        if x & size:
            x ^= poly_bits
    if x != 1:
        return None
    return antilog, log


_DEFAULT_PRIMITIVE = {}


def default_primitive_poly(m):
    """Smallest primitive polynomial of degree m (ascending bit-packed order)."""
    if m not in _DEFAULT_PRIMITIVE:
        for candidate in range((1 << m) + 1, 1 << (m + 1), 2):
            if _build_tables(m, candidate) is not None:
                _DEFAULT_PRIMITIVE[m] = candidate
                break
        else:  # pragma: no cover - primitive polynomials exist for every m
            raise NotPrimitive(f"no primitive polynomial of degree {m} found")
    return Gf2Poly(_DEFAULT_PRIMITIVE[m])


class Gf2mField:
    """GF(2^m) represented through log/antilog tables.

    Elements are bit-packed integers in [0, 2^m); alpha is the residue of
    x modulo the primitive polynomial.  Immutable after construction.
    """

    def __init__(self, m, primitive_poly=None):
        m = int(m)
        if not 1 <= m <= 16:
            raise InvalidParameter(f"extension degree must be in 1..16, got {m}")
        if primitive_poly is None:
            primitive_poly = default_primitive_poly(m)
        poly_bits = _as_bits(primitive_poly)
        if poly_bits.bit_length() - 1 != m:
            raise InvalidParameter(
                f"primitive polynomial must have degree {m}, "
                f"got degree {poly_bits.bit_length() - 1}"
            )
        tables = _build_tables(m, poly_bits)
        if tables is None:
            raise NotPrimitive(
                f"{Gf2Poly(poly_bits)} is not primitive over GF(2^{m})"
            )
        self.m = m
        self.primitive_poly = Gf2Poly(poly_bits)
        self.antilog_table, self.log_table = tables
        self.order = (1 << m) - 1

    def pow_alpha(self, e):
        """alpha**e as a field element."""
        return int(self.antilog_table[e % self.order])

    def mul(self, a, b):
        """Field product of two elements."""
        if a == 0 or b == 0:
            return 0
        return int(self.antilog_table[(self.log_table[a] + self.log_table[b]) % self.order])

    @staticmethod
    def add(a, b):
        """Field sum (characteristic 2)."""
        return a ^ b

    def __repr__(self):
        return f"Gf2mField(m={self.m}, primitive_poly={self.primitive_poly})"


def field_new(m, primitive_poly=None):
    """Construct GF(2^m); verifies primitivity of the defining polynomial."""
    return Gf2mField(m, primitive_poly)


def minimal_polynomial(field, element_exponent):
    """Minimal polynomial over GF(2) of alpha**element_exponent.

    Multiplies (x - alpha^(e*2^j)) over the conjugacy class of the
    exponent; the result always has GF(2) coefficients.

    Parameters
    ----------
    field : Gf2mField
    element_exponent : int
        Exponent e with 0 <= e < 2^m - 1.

    Returns
    -------
    Gf2Poly
    """
    e = int(element_exponent)
    if not 0 <= e < field.order:
        raise InvalidParameter(f"exponent must be in [0, {field.order}), got {e}")
    conjugates = []
    c = e
    while c not in conjugates:
        conjugates.append(c)
        c = (2 * c) % field.order
    # coeffs[i] is the field-valued coefficient of x^i; multiply by (x + root)
    coeffs = [1]
    for exp in conjugates:
        root = field.pow_alpha(exp)
        coeffs = [field.mul(root, coeffs[0])] + [
            coeffs[i - 1] ^ field.mul(root, coeffs[i]) for i in range(1, len(coeffs))
        ] + [coeffs[-1]]
    # The conjugacy-class product must collapse to GF(2) coefficients.
    if any(c not in (0, 1) for c in coeffs):
        raise NotPrimitive("conjugacy-class product has non-binary coefficients")
    return Gf2Poly.from_coeffs(coeffs)


def gf2_row_reduce(matrix):
    """Reduced row-echelon form over GF(2).

    Parameters
    ----------
    matrix : array_like
        Non-empty binary matrix.

    Returns
    -------
    (numpy.ndarray, int, list of int)
        The RREF matrix (uint8), its rank, and the pivot column indices.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.size == 0:
        raise EmptyInput("row reduction needs a non-empty 2-D matrix")
    a = (a.astype(np.uint8) & 1).copy()
    m_rows, n = a.shape
    rank = 0
    pivots = []
    for col in range(n):
        hits = np.nonzero(a[rank:, col])[0]
        if hits.size == 0:
            continue
        pivot_row = rank + int(hits[0])
        if pivot_row != rank:
            a[[rank, pivot_row]] = a[[pivot_row, rank]]
        elim = np.nonzero(a[:, col])[0]
        elim = elim[elim != rank]
        a[elim] ^= a[rank]
        pivots.append(col)
        rank += 1
        if rank == m_rows:
            break
    return a, rank, pivots
