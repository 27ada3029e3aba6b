"""Pure-numpy kernel implementations (fallback backend).

Kept semantically aligned with the compiled kernels: fixed reduction
orders per shape, ascending-value segment sums, identical clipping.
"""

import numpy as np

_ATANH_CLIP = 0.9999999999999998


def matmul_t(x, wt):
    # einsum keeps a fixed inner-loop order, unlike the BLAS-backed "@",
    # which may reorder accumulation depending on blocking.
    return np.einsum("mk,kn->mn", x, wt)


def segment_reduce_sorted(x, plan, mean):
    b, _, f = x.shape
    out = np.zeros((b, plan.n_segments, f), dtype=np.float64)
    for size, seg_ids, edge_idx in plan.buckets:
        vals = np.sort(x[:, edge_idx, :], axis=2)
        total = vals.sum(axis=2)
        if mean:
            total /= size
        out[:, seg_ids, :] = total
    return out


def _segment_sums(values, plan):
    """Row-wise per-segment sums of position-ordered values.

    ``values`` has one column per gathered position; a zero sentinel
    column keeps reduceat's indices in range when trailing segments are
    empty, and empty segments are masked to zero afterwards.
    """
    padded = np.concatenate(
        [values, np.zeros((values.shape[0], 1), dtype=values.dtype)], axis=1
    )
    sums = np.add.reduceat(padded, plan.ptr[:-1], axis=1)
    return np.where(plan.sizes > 0, sums, values.dtype.type(0))


def segment_sum(x, plan):
    b, _, f = x.shape
    gathered = x if plan.order is None else x[:, plan.order, :]
    flat = gathered.transpose(0, 2, 1).reshape(b * f, -1)
    sums = _segment_sums(flat, plan)
    return np.ascontiguousarray(
        sums.reshape(b, f, plan.n_segments).transpose(0, 2, 1)
    )


def bp_check_messages(v2f, plan):
    gathered = v2f[:, plan.order_array]
    t = np.tanh(0.5 * gathered)
    abs_t = np.abs(t)
    zero = abs_t == 0.0
    log_t = np.where(zero, 0.0, np.log(np.where(zero, 1.0, abs_t)))
    neg = (t < 0.0).astype(np.int64)
    zero_i = zero.astype(np.int64)

    seg = plan.segment_of_position
    seg_log = _segment_sums(log_t, plan)
    seg_neg = _segment_sums(neg, plan)
    seg_zero = _segment_sums(zero_i, plan)

    loo_log = seg_log[:, seg] - log_t
    loo_neg = seg_neg[:, seg] - neg
    loo_zero = seg_zero[:, seg] - zero_i
    magnitude = np.exp(loo_log)
    magnitude[loo_zero > 0] = 0.0
    np.minimum(magnitude, _ATANH_CLIP, out=magnitude)
    signs = 1.0 - 2.0 * (loo_neg & 1)
    messages = 2.0 * signs * np.arctanh(magnitude)

    out = np.empty_like(v2f)
    out[:, plan.order_array] = messages
    return out


def bp_vn_messages(llr, f2v, edge_vn, plan):
    gathered = f2v if plan.order is None else f2v[:, plan.order]
    marginals = llr + _segment_sums(gathered, plan)
    v2f = marginals[:, edge_vn] - f2v
    return v2f, marginals
