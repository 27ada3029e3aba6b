"""Array kernels with a compiled core and a pure-numpy fallback.

The hot loops of both decoders run through this module: a fixed-order
dense product, per-segment aggregations over Tanner-graph neighborhoods,
and the two belief-propagation message updates.  A Cython extension
provides the fast path; when it is not built (or ``GNNFEC_KERNELS=numpy``
is set) the numpy implementations are used instead.

Within one backend every summation order is fixed, so results are
bit-exactly reproducible; segment aggregations additionally sum their
inputs in ascending value order, making them pure functions of each
segment's value multiset.  That is what keeps decoder outputs
bit-identical under neighbor reordering and node relabeling.  Across
backends, outputs agree only to floating-point rounding.
"""

import os

import numpy as np

from ..errors import InvalidParameter, ShapeMismatch
from . import _pykernels

_choice = os.environ.get("GNNFEC_KERNELS", "auto")
if _choice in ("auto", "compiled"):
    try:
        from . import _ckernels as _impl

        BACKEND = "compiled"
    except ImportError:
        if _choice == "compiled":
            raise
        _impl = _pykernels
        BACKEND = "numpy"
elif _choice == "numpy":
    _impl = _pykernels
    BACKEND = "numpy"
else:
    raise InvalidParameter(
        f"GNNFEC_KERNELS must be auto, compiled, or numpy, got {_choice!r}"
    )

# Register budget of the compiled dense kernel; wider products fall back
# to einsum, which orders the inner sum identically for identical shapes.
_MATMUL_MAX_N = 128

# Largest magnitude allowed inside atanh: one ulp below 1.
ATANH_CLIP = 0.9999999999999998


class SegmentPlan:
    """Precomputed indexing for grouping edge values into node segments.

    Segment ``s`` owns the gathered positions ``ptr[s]:ptr[s+1]``;
    ``order`` maps gathered positions to canonical edge indices (``None``
    meaning the identity, i.e. segments are contiguous edge ranges).
    """

    def __init__(self, ptr, order, n_edges):
        self.ptr = np.ascontiguousarray(ptr, dtype=np.int64)
        self.n_segments = self.ptr.shape[0] - 1
        self.n_edges = int(n_edges)
        if order is None:
            self.order = None
            self.order_array = np.arange(self.n_edges, dtype=np.int64)
        else:
            self.order = np.ascontiguousarray(order, dtype=np.int64)
            self.order_array = self.order
        if self.ptr[-1] != self.n_edges or self.order_array.shape[0] != self.n_edges:
            raise ShapeMismatch("segment pointer table does not cover all edges")
        self.sizes = np.diff(self.ptr)
        self.max_size = int(self.sizes.max(initial=0))
        # segment id per gathered position, and per canonical edge
        self.segment_of_position = np.repeat(
            np.arange(self.n_segments, dtype=np.int64), self.sizes
        )
        self.segment_of_edge = np.empty(self.n_edges, dtype=np.int64)
        self.segment_of_edge[self.order_array] = self.segment_of_position
        with np.errstate(divide="ignore"):
            inv = 1.0 / self.sizes.astype(np.float64)
        self.inv_sizes = np.where(self.sizes > 0, inv, 0.0)
        # segments grouped by equal size, as canonical-edge index matrices
        self.buckets = []
        for size in np.unique(self.sizes[self.sizes > 0]):
            seg_ids = np.nonzero(self.sizes == size)[0].astype(np.int64)
            positions = self.ptr[seg_ids][:, None] + np.arange(size, dtype=np.int64)
            self.buckets.append((int(size), seg_ids, self.order_array[positions]))


def _as_f64(x, ndim, name):
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != ndim:
        raise ShapeMismatch(f"{name} must be {ndim}-D, got {a.ndim}-D")
    return a


def matmul_t(x, wt):
    """Fixed-order product x @ wt for 2-D operands.

    The inner (reduction) loop always runs in ascending index order, so
    the result of each output row depends only on that row of ``x`` —
    permuting rows of ``x`` permutes rows of the output bit-identically.
    """
    x = _as_f64(x, 2, "x")
    wt = _as_f64(wt, 2, "wt")
    if x.shape[1] != wt.shape[0]:
        raise ShapeMismatch(f"inner dimensions differ: {x.shape} @ {wt.shape}")
    if BACKEND == "compiled" and wt.shape[1] <= _MATMUL_MAX_N:
        return _impl.matmul_t(x, wt)
    return _pykernels.matmul_t(x, wt)


def segment_reduce_sorted(x, plan, mean=False):
    """Sum (or average) edge values within each segment, ascending order.

    Parameters
    ----------
    x : (B, E, F) array
        Per-edge values in canonical edge order.
    plan : SegmentPlan
    mean : bool
        Divide each segment sum by the segment size.

    Returns
    -------
    (B, S, F) array; empty segments yield 0.
    """
    x = _as_f64(x, 3, "x")
    if x.shape[1] != plan.n_edges:
        raise ShapeMismatch(f"expected {plan.n_edges} edges, got {x.shape[1]}")
    return _impl.segment_reduce_sorted(x, plan, bool(mean))


def segment_sum(x, plan):
    """Plain per-segment sums of edge values (fixed canonical order)."""
    x = _as_f64(x, 3, "x")
    if x.shape[1] != plan.n_edges:
        raise ShapeMismatch(f"expected {plan.n_edges} edges, got {x.shape[1]}")
    return _impl.segment_sum(x, plan)


def bp_check_messages(v2f, plan):
    """Check-to-variable updates: 2*atanh of leave-one-out tanh products.

    The product magnitude is clipped to ``ATANH_CLIP`` before atanh, so
    outputs stay finite (about +/-36.9 at the clip).
    """
    v2f = _as_f64(v2f, 2, "v2f")
    if v2f.shape[1] != plan.n_edges:
        raise ShapeMismatch(f"expected {plan.n_edges} edges, got {v2f.shape[1]}")
    return _impl.bp_check_messages(v2f, plan)


def bp_vn_messages(llr, f2v, edge_vn, plan):
    """Variable-side flooding update.

    Returns ``(v2f, marginals)`` where ``marginals = llr + sum of
    incoming check messages`` per variable and ``v2f[e] =
    marginals[vn(e)] - f2v[e]`` (the leave-one-out sum).
    """
    llr = _as_f64(llr, 2, "llr")
    f2v = _as_f64(f2v, 2, "f2v")
    edge_vn = np.ascontiguousarray(edge_vn, dtype=np.int64)
    if f2v.shape[1] != edge_vn.shape[0]:
        raise ShapeMismatch("per-edge array does not match the edge list")
    return _impl.bp_vn_messages(llr, f2v, edge_vn, plan)
