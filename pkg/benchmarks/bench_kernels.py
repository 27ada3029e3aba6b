"""Timing comparison of the compiled kernels against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 7 --ldpc-n 512

The kernel section times both implementations inside one process (the
fallback module is always importable).  The decode section times full
BP and GNN decodes on the active backend, then re-runs itself in a
subprocess with ``GNNFEC_KERNELS=numpy`` so the fallback figures come
from a cleanly switched interpreter.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from gnnfec import kernels
from gnnfec.bp import bp_decode_batch
from gnnfec.channel import AwgnChannel, bpsk_modulate, demap_llr, ebno_to_sigma2
from gnnfec.codes import LinearCode, encode, regular_ldpc, tanner_graph
from gnnfec.gnn import GnnConfig, gnn_decode, gnn_init
from gnnfec.kernels import _pykernels
from gnnfec.rng import substream


def _best_of(fn, repeats):
    fn()  # warmup
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def _implementations():
    impls = []
    if kernels.BACKEND == "compiled":
        from gnnfec.kernels import _ckernels

        impls.append(("compiled", _ckernels))
    impls.append(("numpy", _pykernels))
    return impls


def _print_row(name, timings):
    cells = "".join(f"{label:>10}: {seconds * 1e3:9.3f} ms" for label, seconds in timings)
    if len(timings) == 2:
        cells += f"   (x{timings[1][1] / timings[0][1]:.1f})"
    print(f"  {name:<22}{cells}")


def bench_kernels(graph, batch, features, repeats):
    """Per-kernel timings on identical inputs for every backend."""
    rng = np.random.default_rng(12345)
    edge_feats = np.ascontiguousarray(
        rng.standard_normal((batch, graph.n_edges, features)))
    v2f = np.ascontiguousarray(rng.standard_normal((batch, graph.n_edges)))
    llr = np.ascontiguousarray(rng.standard_normal((batch, graph.n_vn)))
    dense_x = np.ascontiguousarray(
        rng.standard_normal((batch * graph.n_edges, 2 * features + 16)))
    dense_wt = np.ascontiguousarray(
        rng.standard_normal((2 * features + 16, 2 * features)))
    edge_vn = np.ascontiguousarray(graph.edge_vn, dtype=np.int64)

    print(f"kernels  ({graph.n_vn} variables, {graph.n_fn} checks, "
          f"{graph.n_edges} edges, batch {batch}, {features} features)")
    jobs = [
        ("matmul_t " + "x".join(map(str, dense_x.shape + (dense_wt.shape[1],))),
         lambda impl: impl.matmul_t(dense_x, dense_wt)),
        ("segment_reduce (fn)", lambda impl: impl.segment_reduce_sorted(
            edge_feats, graph.fn_plan, False)),
        ("segment_reduce (vn)", lambda impl: impl.segment_reduce_sorted(
            edge_feats, graph.vn_plan, False)),
        ("segment_sum", lambda impl: impl.segment_sum(edge_feats, graph.fn_plan)),
        ("bp_check_messages", lambda impl: impl.bp_check_messages(
            v2f, graph.fn_plan)),
        ("bp_vn_messages", lambda impl: impl.bp_vn_messages(
            llr, v2f, edge_vn, graph.vn_plan)),
    ]
    for name, job in jobs:
        timings = [(label, _best_of(lambda: job(impl), repeats))
                   for label, impl in _implementations()]
        _print_row(name, timings)


def bench_decodes(code, gnn_batch, bp_batch, repeats, emit_machine_readable):
    """Full decode timings on whatever backend is currently active."""
    graph = code.graph
    config = GnnConfig(f_n=20, f_m=20, hidden_units=40, n_iter_train=8)
    params = gnn_init(graph, config, substream(7, "bench-init"))
    sigma2 = ebno_to_sigma2(2.0, code.rate)
    channel = AwgnChannel(sigma2, seed=7, label="bench")

    rng = substream(7, "bench-data")
    info = rng.integers(0, 2, size=(bp_batch, code.k), dtype=np.uint8)
    llr_bp = demap_llr(channel.transmit(bpsk_modulate(
        encode(code.generator, info))), sigma2)
    llr_gnn = llr_bp[:gnn_batch]

    results = [
        ("bp_decode_20it", _best_of(
            lambda: bp_decode_batch(graph, llr_bp, n_iter=20), repeats),
         bp_batch),
        ("gnn_decode_8it", _best_of(
            lambda: gnn_decode(graph, params, config, llr_gnn, n_iter=8),
            repeats),
         gnn_batch),
    ]
    if emit_machine_readable:
        for name, seconds, _ in results:
            print(f"DECODE {name} {seconds:.6e}")
        return
    print(f"\ndecodes  ({code.name}, backend {kernels.BACKEND})")
    for name, seconds, words in results:
        print(f"  {name:<22}{seconds * 1e3:9.3f} ms "
              f"({words / seconds:,.0f} words/s)")


def _fallback_decode_timings(argv):
    """Re-run this script with the numpy backend forced, grab its timings."""
    env = dict(os.environ, GNNFEC_KERNELS="numpy")
    proc = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--decodes-only", *argv],
        capture_output=True, text=True, env=env, check=True)
    timings = {}
    for line in proc.stdout.splitlines():
        if line.startswith("DECODE "):
            _, name, seconds = line.split()
            timings[name] = float(seconds)
    return timings


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--ldpc-n", type=int, default=256)
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--features", type=int, default=20)
    parser.add_argument("--gnn-batch", type=int, default=16)
    parser.add_argument("--bp-batch", type=int, default=128)
    parser.add_argument("--decodes-only", action="store_true",
                        help="print machine-readable decode timings and exit")
    args = parser.parse_args(argv)

    code = LinearCode(f"ldpc_{args.ldpc_n}",
                      regular_ldpc(args.ldpc_n, 3, 6, seed=1))

    if args.decodes_only:
        bench_decodes(code, args.gnn_batch, args.bp_batch, args.repeats,
                      emit_machine_readable=True)
        return 0

    print(f"active backend: {kernels.BACKEND}\n")
    bench_kernels(code.graph, args.batch, args.features, args.repeats)
    bench_decodes(code, args.gnn_batch, args.bp_batch, args.repeats,
                  emit_machine_readable=False)

    if kernels.BACKEND == "compiled":
        forwarded = ["--repeats", str(args.repeats),
                     "--ldpc-n", str(args.ldpc_n),
                     "--gnn-batch", str(args.gnn_batch),
                     "--bp-batch", str(args.bp_batch)]
        fallback = _fallback_decode_timings(forwarded)
        print("\ndecodes  (numpy fallback, same inputs)")
        for name, seconds in fallback.items():
            print(f"  {name:<22}{seconds * 1e3:9.3f} ms")
    return 0


if __name__ == "__main__":
    sys.exit(main())
