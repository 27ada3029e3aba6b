"""Binary linear block codes and their Tanner graphs.

Constructions: the (7,4) Hamming code, single parity checks, narrow-sense
BCH codes via the cyclic parity polynomial, seeded regular LDPC ensembles
(configuration model), and arbitrary matrices loaded from alist text.

The canonical edge order of a Tanner graph is the row-major scan of H
(check index outer, variable index inner); every message array in the
decoders and every serialized parameter block indexes edges in this order.
"""

import hashlib
from functools import cached_property

import numpy as np

from . import gf2m
from .errors import (
    ConstructionFailed,
    DegenerateCode,
    InconsistentDegrees,
    InvalidLength,
    InvalidParameter,
    LengthMismatch,
    ParseError,
    ZeroRateCode,
)
from .rng import substream

_LDPC_RETRIES = 1000


def _as_binary_matrix(matrix):
    a = np.asarray(matrix)
    if a.ndim != 2 or a.size == 0:
        raise InvalidParameter("parity-check matrix must be a non-empty 2-D array")
    if not np.isin(a, (0, 1)).all():
        raise InvalidParameter("parity-check matrix entries must be 0 or 1")
    return np.ascontiguousarray(a, dtype=np.uint8)


class ParityCheckMatrix:
    """Binary parity-check matrix H (m_rows x n), row-major.

    Overcomplete matrices (rank < m_rows) are allowed; the rank and the
    overcompleteness flag are computed on first use.
    """

    def __init__(self, matrix):
        self.matrix = _as_binary_matrix(matrix)
        self.matrix.setflags(write=False)

    @property
    def n(self):
        return self.matrix.shape[1]

    @property
    def m_rows(self):
        return self.matrix.shape[0]

    @cached_property
    def rank(self):
        return gf2m.gf2_row_reduce(self.matrix)[1]

    @property
    def is_overcomplete(self):
        return self.rank < self.m_rows

    def __eq__(self, other):
        return isinstance(other, ParityCheckMatrix) and np.array_equal(
            self.matrix, other.matrix
        )

    def __repr__(self):
        return f"ParityCheckMatrix(n={self.n}, m_rows={self.m_rows})"


class GeneratorMatrix:
    """Generator matrix G (k x n) with its information-set columns.

    ``info_columns`` lists the k columns on which G restricts to the
    identity, i.e. encode(u)[info_columns] == u.
    """

    def __init__(self, matrix, info_columns):
        self.matrix = _as_binary_matrix(matrix)
        self.matrix.setflags(write=False)
        self.info_columns = list(info_columns)

    @property
    def k(self):
        return self.matrix.shape[0]

    @property
    def n(self):
        return self.matrix.shape[1]

    def __repr__(self):
        return f"GeneratorMatrix(k={self.k}, n={self.n})"


class TannerGraph:
    """Bipartite adjacency view of a parity-check matrix.

    Edge ``e`` connects variable node ``edge_vn[e]`` to check (factor)
    node ``edge_fn[e]``; edges are sorted by (check, variable).  Check
    node ``j`` owns the contiguous edge range
    ``fn_ptr[j]:fn_ptr[j+1]``; the per-variable ranges live in
    ``vn_order`` (edge indices grouped by variable) with offsets
    ``vn_ptr``.
    """

    def __init__(self, h):
        matrix = h.matrix if isinstance(h, ParityCheckMatrix) else _as_binary_matrix(h)
        fn_idx, vn_idx = np.nonzero(matrix)
        self.n_vn = matrix.shape[1]
        self.n_fn = matrix.shape[0]
        self.edge_vn = np.ascontiguousarray(vn_idx, dtype=np.int64)
        self.edge_fn = np.ascontiguousarray(fn_idx, dtype=np.int64)
        self.n_edges = self.edge_vn.shape[0]
        fn_counts = np.bincount(self.edge_fn, minlength=self.n_fn)
        vn_counts = np.bincount(self.edge_vn, minlength=self.n_vn)
        self.fn_ptr = np.concatenate(([0], np.cumsum(fn_counts))).astype(np.int64)
        self.vn_ptr = np.concatenate(([0], np.cumsum(vn_counts))).astype(np.int64)
        self.vn_order = np.argsort(self.edge_vn, kind="stable").astype(np.int64)
        self.vn_degree = vn_counts.astype(np.int64)
        self.fn_degree = fn_counts.astype(np.int64)
        for arr in (self.edge_vn, self.edge_fn, self.fn_ptr, self.vn_ptr,
                    self.vn_order, self.vn_degree, self.fn_degree):
            arr.setflags(write=False)

    @property
    def edges(self):
        """Edge list as (vn, fn) pairs in canonical order."""
        return list(zip(self.edge_vn.tolist(), self.edge_fn.tolist()))

    @cached_property
    def vn_neighborhoods(self):
        """Per-variable-node list of incident edge indices."""
        return [self.vn_order[self.vn_ptr[i]:self.vn_ptr[i + 1]]
                for i in range(self.n_vn)]

    @cached_property
    def fn_neighborhoods(self):
        """Per-check-node list of incident edge indices."""
        return [np.arange(self.fn_ptr[j], self.fn_ptr[j + 1], dtype=np.int64)
                for j in range(self.n_fn)]

    @cached_property
    def fn_plan(self):
        """Aggregation plan for grouping edge values by check node."""
        from .kernels import SegmentPlan

        return SegmentPlan(self.fn_ptr, None, self.n_edges)

    @cached_property
    def vn_plan(self):
        """Aggregation plan for grouping edge values by variable node."""
        from .kernels import SegmentPlan

        return SegmentPlan(self.vn_ptr, self.vn_order, self.n_edges)

    def to_matrix(self):
        """Rebuild the parity-check matrix from the adjacency."""
        h = np.zeros((self.n_fn, self.n_vn), dtype=np.uint8)
        h[self.edge_fn, self.edge_vn] = 1
        return h

    def __repr__(self):
        return (f"TannerGraph(n_vn={self.n_vn}, n_fn={self.n_fn}, "
                f"n_edges={self.n_edges})")


def tanner_graph(h):
    """Bipartite graph of H with canonical (row-major) edge order."""
    return TannerGraph(h)


def hamming_7_4():
    """Parity-check matrix of the (7,4) Hamming code."""
    return ParityCheckMatrix([
        [1, 1, 1, 0, 1, 0, 0],
        [1, 1, 0, 1, 0, 1, 0],
        [1, 0, 1, 1, 0, 0, 1],
    ])


def single_parity_check(n):
    """1 x n all-ones parity check; its Tanner graph is a tree."""
    if n < 2:
        raise InvalidLength(f"single parity check needs n >= 2, got {n}")
    return ParityCheckMatrix(np.ones((1, n), dtype=np.uint8))


def bch(n, t, field=None):
    """Narrow-sense binary BCH code of length n = 2^m - 1.

    The generator polynomial g(x) is the LCM of the minimal polynomials
    of alpha^1 .. alpha^(2t); the returned H has n-k rows, row j holding
    the reversed parity polynomial h(x) = (x^n + 1)/g(x) shifted to start
    at column j.

    Parameters
    ----------
    n : int
        Block length, must equal 2^m - 1.
    t : int
        Designed error-correction capability (t >= 1).
    field : Gf2mField, optional
        Field to use; defaults to GF(2^m) with the smallest primitive
        polynomial.

    Returns
    -------
    ParityCheckMatrix
    """
    if t < 1:
        raise InvalidParameter(f"designed correction capability must be >= 1, got {t}")
    m = int(n + 1).bit_length() - 1
    if n < 3 or (1 << m) - 1 != n:
        raise InvalidLength(f"block length must be 2^m - 1, got {n}")
    if field is None:
        field = gf2m.field_new(m)
    elif field.m != m:
        raise InvalidLength(
            f"field GF(2^{field.m}) does not match block length {n}"
        )
    g = gf2m.poly_lcm([gf2m.minimal_polynomial(field, e) for e in range(1, 2 * t + 1)])
    if g.degree >= n:
        raise DegenerateCode(
            f"generator polynomial of degree {g.degree} leaves no information bits"
        )
    k = n - g.degree
    parity, remainder = gf2m.poly_divmod((1 << n) | 1, g)
    if remainder.bits != 0:
        raise ConstructionFailed("generator polynomial does not divide x^n + 1")
    h_rev = np.array(parity.coeffs()[::-1], dtype=np.uint8)  # degree k, k+1 coeffs
    h = np.zeros((n - k, n), dtype=np.uint8)
    for j in range(n - k):
        h[j, j:j + k + 1] = h_rev
    return ParityCheckMatrix(h)


def bch_generator_poly(n, t, field=None):
    """Generator polynomial of the narrow-sense BCH code (for inspection)."""
    if t < 1:
        raise InvalidParameter(f"designed correction capability must be >= 1, got {t}")
    m = int(n + 1).bit_length() - 1
    if n < 3 or (1 << m) - 1 != n:
        raise InvalidLength(f"block length must be 2^m - 1, got {n}")
    if field is None:
        field = gf2m.field_new(m)
    return gf2m.poly_lcm([gf2m.minimal_polynomial(field, e) for e in range(1, 2 * t + 1)])


def regular_ldpc(n, v, c, seed):
    """Random (v,c)-regular parity-check matrix via the configuration model.

    Variable sockets are matched to check sockets by a seeded random
    permutation; draws producing a doubled edge are rejected wholesale
    and retried (bounded), so every entry of H is 0/1 and all degrees
    are exact.

    Parameters
    ----------
    n : int
        Number of variable nodes; n*v must be divisible by c.
    v, c : int
        Column and row weights, v < c.
    seed : int
        Construction seed; identical seeds give identical matrices.

    Returns
    -------
    ParityCheckMatrix
    """
    if v < 1 or c < 1 or n < 1:
        raise InvalidParameter("n, v, c must all be positive")
    if (n * v) % c != 0:
        raise InvalidParameter(f"n*v = {n * v} is not divisible by c = {c}")
    if not v < c:
        raise InvalidParameter(f"column weight {v} must be smaller than row weight {c}")
    m_rows = (n * v) // c
    n_edges = n * v
    vn_sockets = np.repeat(np.arange(n, dtype=np.int64), v)
    fn_sockets = np.repeat(np.arange(m_rows, dtype=np.int64), c)
    rng = substream(seed, "code-construction")
    for _ in range(_LDPC_RETRIES):
        pairing = vn_sockets[rng.permutation(n_edges)]
        flat = fn_sockets * n + pairing
        if np.unique(flat).size != n_edges:
            continue
        h = np.zeros((m_rows, n), dtype=np.uint8)
        h[fn_sockets, pairing] = 1
        return ParityCheckMatrix(h)
    raise ConstructionFailed(
        f"no simple ({v},{c})-regular graph found in {_LDPC_RETRIES} draws"
    )


def generator_from_h(h):
    """Generator matrix of rank k = n - rank(H), valid for the original H.

    Row-reduces H and emits one generator row per non-pivot column; the
    generator is systematic on those columns (recorded as
    ``info_columns``), in the original column order.
    """
    rref, rank, pivots = gf2m.gf2_row_reduce(h.matrix)
    n = h.n
    k = n - rank
    if k == 0:
        raise ZeroRateCode("parity-check matrix has full column rank; k = 0")
    free_cols = sorted(set(range(n)) - set(pivots))
    g = np.zeros((k, n), dtype=np.uint8)
    for row, col in enumerate(free_cols):
        g[row, col] = 1
        g[row, pivots] = rref[:rank, col]
    return GeneratorMatrix(g, free_cols)


def encode(g, u):
    """Encode information bits: c = u.G over GF(2).

    Accepts a single length-k vector or a batch (..., k); returns uint8
    codewords of length n with matching leading shape.
    """
    u = np.asarray(u)
    if u.shape[-1:] != (g.k,):
        raise LengthMismatch(f"information word length {u.shape[-1] if u.ndim else 0} != k = {g.k}")
    prod = u.astype(np.int64) @ g.matrix.astype(np.int64)
    return (prod & 1).astype(np.uint8)


def syndrome(h, hard_bits):
    """Syndrome H.c^T over GF(2); all-zero means a valid codeword."""
    bits = np.asarray(hard_bits)
    if bits.shape[-1:] != (h.n,):
        raise LengthMismatch(f"word length {bits.shape[-1] if bits.ndim else 0} != n = {h.n}")
    prod = bits.astype(np.int64) @ h.matrix.T.astype(np.int64)
    return (prod & 1).astype(np.uint8)


def _parse_int_line(lines, idx, expect_count=None):
    if idx >= len(lines):
        raise ParseError("unexpected end of file", line=idx + 1)
    tokens = lines[idx].split()
    try:
        values = [int(tok) for tok in tokens]
    except ValueError:
        raise ParseError(f"non-integer token in {tokens!r}", line=idx + 1) from None
    if expect_count is not None and len(values) != expect_count:
        raise ParseError(
            f"expected {expect_count} integers, found {len(values)}", line=idx + 1
        )
    return values


def load_alist(text):
    """Parse alist text into a ParityCheckMatrix.

    The format is validated strictly: declared maximum degrees must be
    attained, per-line entry counts must match the declared degrees (with
    zero padding up to the maximum), and the column and row connection
    lists must describe the same matrix.
    """
    lines = text.splitlines()
    n, m_rows = _parse_int_line(lines, 0, expect_count=2)
    if n < 1 or m_rows < 1:
        raise ParseError(f"matrix dimensions must be positive, got {n} x {m_rows}", line=1)
    max_col, max_row = _parse_int_line(lines, 1, expect_count=2)
    col_degrees = _parse_int_line(lines, 2, expect_count=n)
    row_degrees = _parse_int_line(lines, 3, expect_count=m_rows)
    if any(d < 0 for d in col_degrees) or any(d < 0 for d in row_degrees):
        raise ParseError("degrees must be non-negative", line=3)
    if (col_degrees and max(col_degrees) != max_col) or (
        row_degrees and max(row_degrees) != max_row
    ):
        raise InconsistentDegrees(
            "declared maximum degree is not attained by the degree lists", line=2
        )
    if sum(col_degrees) != sum(row_degrees):
        raise InconsistentDegrees(
            f"column degrees sum to {sum(col_degrees)} but row degrees to "
            f"{sum(row_degrees)}",
            line=4,
        )
    expected_lines = 4 + n + m_rows
    if len(lines) < expected_lines:
        raise ParseError(
            f"expected {expected_lines} lines, found {len(lines)}", line=len(lines) + 1
        )
    if any(line.strip() for line in lines[expected_lines:]):
        raise ParseError("trailing non-empty lines", line=expected_lines + 1)

    def read_adjacency(start, count, degrees, pad_to, limit, what):
        nodes = []
        for i in range(count):
            values = _parse_int_line(lines, start + i, expect_count=pad_to)
            entries = values[:degrees[i]]
            padding = values[degrees[i]:]
            if any(p != 0 for p in padding):
                raise InconsistentDegrees(
                    f"{what} {i} declares degree {degrees[i]} but has extra entries",
                    line=start + i + 1,
                )
            if any(not 1 <= e <= limit for e in entries):
                raise ParseError(
                    f"{what} {i} has a position outside 1..{limit}",
                    line=start + i + 1,
                )
            if len(set(entries)) != len(entries):
                raise ParseError(f"{what} {i} lists a position twice", line=start + i + 1)
            nodes.append(entries)
        return nodes

    col_lists = read_adjacency(4, n, col_degrees, max_col, m_rows, "column")
    row_lists = read_adjacency(4 + n, m_rows, row_degrees, max_row, n, "row")
    h = np.zeros((m_rows, n), dtype=np.uint8)
    for i, checks in enumerate(col_lists):
        for j in checks:
            h[j - 1, i] = 1
    h_from_rows = np.zeros((m_rows, n), dtype=np.uint8)
    for j, variables in enumerate(row_lists):
        for i in variables:
            h_from_rows[j, i - 1] = 1
    if not np.array_equal(h, h_from_rows):
        raise InconsistentDegrees(
            "column and row connection lists describe different matrices", line=5
        )
    return ParityCheckMatrix(h)


def save_alist(h):
    """Serialize H to canonical alist text (ascending positions, 0-padded)."""
    matrix = h.matrix
    m_rows, n = matrix.shape
    col_degrees = matrix.sum(axis=0, dtype=np.int64)
    row_degrees = matrix.sum(axis=1, dtype=np.int64)
    max_col = int(col_degrees.max(initial=0))
    max_row = int(row_degrees.max(initial=0))
    out = [f"{n} {m_rows}", f"{max_col} {max_row}"]
    out.append(" ".join(str(int(d)) for d in col_degrees))
    out.append(" ".join(str(int(d)) for d in row_degrees))
    for i in range(n):
        positions = (np.nonzero(matrix[:, i])[0] + 1).tolist()
        positions += [0] * (max_col - len(positions))
        out.append(" ".join(str(p) for p in positions))
    for j in range(m_rows):
        positions = (np.nonzero(matrix[j])[0] + 1).tolist()
        positions += [0] * (max_row - len(positions))
        out.append(" ".join(str(p) for p in positions))
    return "\n".join(out) + "\n"


def code_digest(h):
    """Hex digest identifying H: SHA-256 over its alist serialization."""
    return hashlib.sha256(save_alist(h).encode("utf-8")).hexdigest()


class LinearCode:
    """A named parity-check matrix with lazily derived encoder and graph."""

    def __init__(self, name, h):
        self.name = name
        self.h = h

    @property
    def n(self):
        return self.h.n

    @cached_property
    def k(self):
        return self.h.n - self.h.rank

    @property
    def rate(self):
        return self.k / self.n

    @cached_property
    def generator(self):
        return generator_from_h(self.h)

    @cached_property
    def graph(self):
        return tanner_graph(self.h)

    @cached_property
    def digest(self):
        return code_digest(self.h)

    def __repr__(self):
        return f"LinearCode({self.name!r}, n={self.n}, k={self.k})"
