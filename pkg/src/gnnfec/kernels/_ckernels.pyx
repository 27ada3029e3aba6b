# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Same contracts as _pykernels: fixed reduction orders, ascending-value
segment sums, identical atanh clipping.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atanh, tanh
from libc.stdlib cimport free, malloc

cnp.import_array()

cdef double CLIP = 0.9999999999999998


cdef inline void _isort(double *a, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double key
    for i in range(1, n):
        key = a[i]
        j = i - 1
        while j >= 0 and a[j] > key:
            a[j + 1] = a[j]
            j -= 1
        a[j + 1] = key


def matmul_t(const double[:, ::1] x, const double[:, ::1] wt):
    """x @ wt with the reduction loop in ascending index order."""
    cdef Py_ssize_t n_rows = x.shape[0], inner = x.shape[1], n_cols = wt.shape[1]
    cdef Py_ssize_t m, k, n
    cdef double xv
    cdef double acc[128]
    if n_cols > 128:
        raise ValueError("compiled matmul_t supports at most 128 output columns")
    out_arr = np.empty((n_rows, n_cols), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    with nogil:
        for m in range(n_rows):
            for n in range(n_cols):
                acc[n] = 0.0
            for k in range(inner):
                xv = x[m, k]
                for n in range(n_cols):
                    acc[n] += xv * wt[k, n]
            for n in range(n_cols):
                out[m, n] = acc[n]
    return out_arr


def segment_reduce_sorted(const double[:, :, ::1] x, plan, bint mean):
    cdef const cnp.int64_t[::1] ptr = plan.ptr
    cdef const cnp.int64_t[::1] order = plan.order_array
    cdef Py_ssize_t n_batch = x.shape[0], n_feat = x.shape[2]
    cdef Py_ssize_t n_seg = plan.n_segments
    cdef Py_ssize_t max_size = plan.max_size
    cdef Py_ssize_t b, s, i, f, d, p0, e
    cdef double total
    cdef double *buf
    out_arr = np.zeros((n_batch, n_seg, n_feat), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    if max_size == 0:
        return out_arr
    buf = <double *> malloc(n_feat * max_size * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for b in range(n_batch):
                for s in range(n_seg):
                    p0 = ptr[s]
                    d = ptr[s + 1] - p0
                    if d == 0:
                        continue
                    for i in range(d):
                        e = order[p0 + i]
                        for f in range(n_feat):
                            buf[f * max_size + i] = x[b, e, f]
                    for f in range(n_feat):
                        _isort(buf + f * max_size, d)
                        total = 0.0
                        for i in range(d):
                            total += buf[f * max_size + i]
                        if mean:
                            total /= d
                        out[b, s, f] = total
    finally:
        free(buf)
    return out_arr


def segment_sum(const double[:, :, ::1] x, plan):
    cdef const cnp.int64_t[::1] ptr = plan.ptr
    cdef const cnp.int64_t[::1] order = plan.order_array
    cdef Py_ssize_t n_batch = x.shape[0], n_feat = x.shape[2]
    cdef Py_ssize_t n_seg = plan.n_segments
    cdef Py_ssize_t b, s, f, p0, p1, pos, e
    out_arr = np.zeros((n_batch, n_seg, n_feat), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    with nogil:
        for b in range(n_batch):
            for s in range(n_seg):
                p0 = ptr[s]
                p1 = ptr[s + 1]
                for pos in range(p0, p1):
                    e = order[pos]
                    for f in range(n_feat):
                        out[b, s, f] += x[b, e, f]
    return out_arr


def bp_check_messages(const double[:, ::1] v2f, plan):
    cdef const cnp.int64_t[::1] ptr = plan.ptr
    cdef const cnp.int64_t[::1] order = plan.order_array
    cdef Py_ssize_t n_batch = v2f.shape[0], n_edges = v2f.shape[1]
    cdef Py_ssize_t n_seg = plan.n_segments
    cdef Py_ssize_t max_size = plan.max_size
    cdef Py_ssize_t b, s, i, d, p0
    cdef double prefix, loo
    cdef double *t
    cdef double *suffix
    out_arr = np.empty((n_batch, n_edges), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if max_size == 0:
        return out_arr
    t = <double *> malloc(2 * max_size * sizeof(double))
    if t == NULL:
        raise MemoryError()
    suffix = t + max_size
    try:
        with nogil:
            for b in range(n_batch):
                for s in range(n_seg):
                    p0 = ptr[s]
                    d = ptr[s + 1] - p0
                    if d == 0:
                        continue
                    for i in range(d):
                        t[i] = tanh(0.5 * v2f[b, order[p0 + i]])
                    suffix[d - 1] = 1.0
                    for i in range(d - 2, -1, -1):
                        suffix[i] = suffix[i + 1] * t[i + 1]
                    prefix = 1.0
                    for i in range(d):
                        loo = prefix * suffix[i]
                        if loo > CLIP:
                            loo = CLIP
                        elif loo < -CLIP:
                            loo = -CLIP
                        out[b, order[p0 + i]] = 2.0 * atanh(loo)
                        prefix *= t[i]
    finally:
        free(t)
    return out_arr


def bp_vn_messages(const double[:, ::1] llr, const double[:, ::1] f2v,
                   const cnp.int64_t[::1] edge_vn, plan):
    cdef const cnp.int64_t[::1] ptr = plan.ptr
    cdef const cnp.int64_t[::1] order = plan.order_array
    cdef Py_ssize_t n_batch = llr.shape[0], n_vn = llr.shape[1]
    cdef Py_ssize_t n_edges = f2v.shape[1]
    cdef Py_ssize_t b, v, e, pos
    cdef double acc
    marg_arr = np.empty((n_batch, n_vn), dtype=np.float64)
    v2f_arr = np.empty((n_batch, n_edges), dtype=np.float64)
    cdef double[:, ::1] marg = marg_arr
    cdef double[:, ::1] v2f = v2f_arr
    with nogil:
        for b in range(n_batch):
            for v in range(n_vn):
                acc = llr[b, v]
                for pos in range(ptr[v], ptr[v + 1]):
                    acc += f2v[b, order[pos]]
                marg[b, v] = acc
            for e in range(n_edges):
                v2f[b, e] = marg[b, edge_vn[e]] - f2v[b, e]
    return v2f_arr, marg_arr
