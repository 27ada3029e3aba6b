"""Sum-product belief propagation with a flooding schedule.

One iteration is: check-node update (leave-one-out tanh products over
the incoming variable messages), then variable-node update (channel LLR
plus incoming check messages, again leave-one-out per edge).  The
per-iteration output is the full marginal ``llr + sum of all incoming
check messages``.  Variable messages start as the raw channel LLRs, so
a single iteration on a tree graph already yields exact bitwise
marginals.
"""

import numpy as np

from .channel import hard_decision
from .errors import InvalidParameter, LengthMismatch
from .kernels import ATANH_CLIP, bp_check_messages, bp_vn_messages

__all__ = ["ATANH_CLIP", "bp_decode", "bp_decode_batch"]


def _check_inputs(graph, llr, n_iter):
    if n_iter < 1:
        raise InvalidParameter(f"iteration count must be >= 1, got {n_iter}")
    if llr.shape[-1] != graph.n_vn:
        raise LengthMismatch(
            f"LLR length {llr.shape[-1]} does not match n = {graph.n_vn}"
        )


def _make_syndrome_zero(graph, h):
    """Per-word validity predicate: True where all checks are satisfied."""
    if h is not None:
        matrix_t = h.matrix.T.astype(np.int64)

        def from_matrix(hard):
            return ~((hard.astype(np.int64) @ matrix_t) & 1).any(axis=1)

        return from_matrix

    def from_graph(hard):
        on_edges = hard[:, graph.edge_vn].astype(np.int64)
        padded = np.concatenate(
            [on_edges, np.zeros((hard.shape[0], 1), dtype=np.int64)], axis=1
        )
        sums = np.add.reduceat(padded, graph.fn_ptr[:-1], axis=1)
        parity = np.where(graph.fn_degree > 0, sums & 1, 0)
        return ~parity.any(axis=1)

    return from_graph


def bp_decode_batch(graph, llr, n_iter, early_stop=False, h=None):
    """Decode a batch of received words.

    Parameters
    ----------
    graph : TannerGraph
    llr : (B, n) array
        Channel LLRs, convention log p(0)/p(1).
    n_iter : int
        Maximum number of flooding iterations.
    early_stop : bool
        Freeze a word's output as soon as its hard decision satisfies
        all checks (checked after each iteration); other words continue.
    h : ParityCheckMatrix, optional
        Check matrix for the early-stop syndrome; defaults to the
        graph's own checks (equivalent).

    Returns
    -------
    (numpy.ndarray, numpy.ndarray)
        Output LLRs (B, n) and per-word iterations used (B,).
    """
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.ndim != 2:
        raise LengthMismatch("batched decode expects a 2-D LLR array")
    _check_inputs(graph, llr, n_iter)
    n_words = llr.shape[0]
    syndrome_zero = _make_syndrome_zero(graph, h) if early_stop else None
    out = llr.copy()
    iterations = np.full(n_words, n_iter, dtype=np.int64)
    done = np.zeros(n_words, dtype=bool)
    v2f = llr[:, graph.edge_vn].copy()
    for it in range(1, n_iter + 1):
        f2v = bp_check_messages(v2f, graph.fn_plan)
        v2f, marginals = bp_vn_messages(llr, f2v, graph.edge_vn, graph.vn_plan)
        out[~done] = marginals[~done]
        if early_stop:
            newly = syndrome_zero(hard_decision(marginals)) & ~done
            iterations[newly] = it
            done |= newly
            if done.all():
                break
    return out, iterations


def bp_decode(graph, llr, n_iter, early_stop=False, h=None):
    """Decode one received word, returning every iteration's marginals.

    Returns
    -------
    (list of numpy.ndarray, int)
        Output LLRs after each executed iteration (stopping early when
        requested and the hard decision satisfies all checks), and the
        number of iterations executed.
    """
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.ndim != 1:
        raise LengthMismatch("bp_decode expects a single LLR vector")
    _check_inputs(graph, llr, n_iter)
    syndrome_zero = _make_syndrome_zero(graph, h) if early_stop else None
    llr2 = llr[None, :]
    v2f = llr2[:, graph.edge_vn].copy()
    history = []
    for _ in range(n_iter):
        f2v = bp_check_messages(v2f, graph.fn_plan)
        v2f, marginals = bp_vn_messages(llr2, f2v, graph.edge_vn, graph.vn_plan)
        history.append(marginals[0].copy())
        if early_stop and syndrome_zero(hard_decision(marginals))[0]:
            break
    return history, len(history)
