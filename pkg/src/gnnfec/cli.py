"""Command-line front end: code construction, training, evaluation.

Every training or evaluation run writes exactly one JSON manifest next
to its outputs, recording the command line, the resolved configuration,
the seed, and the code digest, so a run can be reproduced from the
manifest alone.  All randomness derives from the single --seed, split
into named substreams by the modules underneath.

Exit codes: 0 success, 1 usage error, 2 data/configuration error,
3 runtime numerical failure.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, codes, evaluation, training
from .errors import GnnFecError, InvalidParameter, NonFiniteLoss
from .gnn import GnnConfig

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage failures exit 1, not 2."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def _add_code_flags(parser):
    parser.add_argument(
        "--family",
        choices=["hamming", "spc", "bch", "ldpc-regular", "alist"],
        help="code family to construct (or 'alist' to read --code)",
    )
    parser.add_argument("--code", help="alist file to load")
    parser.add_argument("--n", type=int, help="block length")
    parser.add_argument("--t", type=int, help="error-correction capability (bch)")
    parser.add_argument("--v", type=int, help="variable-node degree (ldpc-regular)")
    parser.add_argument("--c", type=int, help="check-node degree (ldpc-regular)")


def make_code(args):
    """Resolve the code flags of a parsed command into a LinearCode."""
    family = args.family
    if family is None and args.code:
        family = "alist"
    if family == "alist" or (family is None and args.code):
        if not args.code:
            raise _UsageError("--family alist requires --code FILE")
        text = Path(args.code).read_text()
        h = codes.load_alist(text)
        return codes.LinearCode(Path(args.code).stem, h)
    if family == "hamming":
        return codes.LinearCode("hamming_7_4", codes.hamming_7_4())
    if family == "spc":
        if args.n is None:
            raise _UsageError("--family spc requires --n")
        return codes.LinearCode(f"spc_{args.n}", codes.single_parity_check(args.n))
    if family == "bch":
        if args.n is None or args.t is None:
            raise _UsageError("--family bch requires --n and --t")
        h = codes.bch(args.n, args.t)
        return codes.LinearCode(f"bch_{args.n}_{h.n - h.rank}", h)
    if family == "ldpc-regular":
        if args.n is None or args.v is None or args.c is None:
            raise _UsageError("--family ldpc-regular requires --n, --v and --c")
        seed = getattr(args, "seed", 0)
        h = codes.regular_ldpc(args.n, args.v, args.c, seed=seed)
        return codes.LinearCode(f"ldpc_{args.n}_v{args.v}c{args.c}_s{seed}", h)
    raise _UsageError("a code is required: pass --family or --code")


def _degree_profile(degrees):
    values, counts = np.unique(np.asarray(degrees), return_counts=True)
    return " ".join(f"{int(v)}:{int(c)}" for v, c in zip(values, counts))


def _print_code_stats(code):
    h = code.h
    graph = code.graph
    print(f"name={code.name}")
    print(
        f"n={h.n} k={code.k} rank={h.rank} rows={h.m_rows} "
        f"edges={graph.n_edges} rate={code.rate:.6f}"
    )
    print(f"vn_degrees {_degree_profile(graph.vn_degree)}")
    print(f"fn_degrees {_degree_profile(graph.fn_degree)}")
    print(f"digest sha256:{code.digest}")


def _write_manifest(path, argv, seed, code, config, artifacts):
    payload = {
        "tool": f"gnnfec {__version__}",
        "command": list(argv),
        "seed": seed,
        "code": None if code is None else {
            "name": code.name,
            "n": code.h.n,
            "k": code.k,
            "digest": f"sha256:{code.digest}",
        },
        "config": config,
        "artifacts": artifacts,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def cmd_code(args, argv):
    if args.subcommand == "info":
        _print_code_stats(make_code(args))
        return EXIT_OK
    # build and export both emit a canonical alist
    code = make_code(args)
    out = args.out or f"{code.name}.alist"
    with open(out, "w") as fh:
        fh.write(codes.save_alist(code.h))
    _print_code_stats(code)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_train(args, argv):
    code = make_code(args)
    gnn_config = GnnConfig(
        f_n=args.fn,
        f_m=args.fm,
        f_na=args.fna,
        f_ma=args.fma,
        hidden_units=args.hidden,
        mlp_layers=args.layers,
        activation=args.activation,
        aggregation=args.aggregation,
        use_bias=args.bias,
        n_iter_train=args.iters,
        llr_clip=args.llr_clip,
    )
    train_config = training.TrainConfig(
        total_steps=args.steps,
        batch_size=args.batch,
        ebno_train_db=args.ebno_db,
        seed=args.seed,
        eval_every=args.eval_every,
        val_words=args.val_words,
    )
    ebno = args.ebno_db
    if ebno is None:
        ebno = training.default_training_ebno(code.rate)
        print(f"training SNR defaulted to {ebno} dB for rate {code.rate:.3f}")

    ckpt, metrics = training.train(code, gnn_config, train_config)
    out = args.out
    stem = os.path.splitext(out)[0]
    training.save_checkpoint(ckpt, out)
    metrics_path = args.metrics or f"{stem}_metrics.csv"
    training.write_metrics_csv(metrics, metrics_path)

    parameter_count = sum(a.size for a in ckpt.parameters.values())
    manifest_path = _write_manifest(
        f"{stem}_manifest.json", argv, args.seed, code,
        {
            "gnn": gnn_config.as_dict(),
            "train": {
                "total_steps": train_config.total_steps,
                "batch_size": train_config.batch_size,
                "ebno_train_db": ebno,
                "eval_every": train_config.eval_every,
                "val_words": train_config.val_words,
                "lr_schedule": train_config.lr_schedule,
            },
            "parameter_count": parameter_count,
        },
        {"checkpoint": out, "metrics": metrics_path},
    )
    final = metrics[-1]
    print(f"trained {parameter_count} parameters for {len(metrics)} steps")
    print(
        f"final loss {final.loss:.6f}  val_ber "
        f"{'n/a' if final.val_ber is None else f'{final.val_ber:.3e}'}  "
        f"wall {final.wall_time_s:.1f}s"
    )
    print(f"wrote {out}, {metrics_path}, {manifest_path}")
    return EXIT_OK


def _build_decoders(args, code):
    iters = args.iters
    if args.decoder == "uncoded":
        return [evaluation.UncodedDecoder()]
    if code is None:
        raise _UsageError(f"--decoder {args.decoder} requires a code")
    if args.decoder == "ml":
        return [evaluation.MlDecoder(code)]
    if args.decoder == "bp":
        return [evaluation.BpDecoder(code, n_iter=n) for n in (iters or [20])]
    if not args.checkpoint:
        raise _UsageError("--decoder gnn requires --checkpoint")
    ckpt = training.load_checkpoint(args.checkpoint)
    return [
        evaluation.GnnDecoder.from_checkpoint(
            code, ckpt, n_iter=n, allow_rebind=args.allow_rebind
        )
        for n in (iters or [None])
    ]


def cmd_eval(args, argv):
    code = None
    if args.decoder != "uncoded":
        code = make_code(args)
    decoders = _build_decoders(args, code)

    if len(decoders) == 1:
        spec = evaluation.SweepSpec(
            decoder=decoders[0],
            ebno_db=args.ebno_db,
            target_bit_errors=args.target_errors,
            max_blocks=args.max_blocks,
            seed=args.seed,
            batch_blocks=args.batch_blocks,
            workers=args.workers,
        )
        reports, csv_text = evaluation.run_sweep(spec)
    else:
        reports, csv_text = evaluation.compare_decoders(
            code, decoders, args.ebno_db,
            max_blocks=args.max_blocks, seed=args.seed,
            batch_blocks=args.batch_blocks, workers=args.workers,
        )

    with open(args.out, "w") as fh:
        fh.write(csv_text)
    stem = os.path.splitext(args.out)[0]
    manifest_path = _write_manifest(
        f"{stem}_manifest.json", argv, args.seed, code,
        {
            "decoder": args.decoder,
            "iters": args.iters,
            "ebno_db": args.ebno_db,
            "target_errors": args.target_errors,
            "max_blocks": args.max_blocks,
            "batch_blocks": args.batch_blocks,
            "workers": args.workers,
            "checkpoint": args.checkpoint,
            "allow_rebind": args.allow_rebind,
        },
        {"results": args.out},
    )

    print(f"{'decoder':<10}{'iters':>6}{'ebno_db':>9}{'ber':>14}{'bler':>14}"
          f"{'bits':>12}  stop")
    for r in reports:
        iters = "-" if r.n_iter is None else str(r.n_iter)
        print(f"{r.decoder:<10}{iters:>6}{r.ebno_db:>9.2f}{r.ber:>14.4e}"
              f"{r.bler:>14.4e}{r.bits_simulated:>12}  {r.stop_reason}")
    print(f"wrote {args.out}, {manifest_path}")
    return EXIT_OK


def build_parser():
    parser = _Parser(
        prog="gnnfec",
        description="Forward-error-correction workbench with a learned decoder",
    )
    parser.add_argument("--version", action="version", version=f"gnnfec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_code = sub.add_parser("code", help="construct and inspect codes")
    p_code.add_argument("subcommand", choices=["build", "info", "export"])
    _add_code_flags(p_code)
    p_code.add_argument("--seed", type=int, default=0, help="construction seed")
    p_code.add_argument("--out", help="alist output path (build/export)")
    p_code.set_defaults(func=cmd_code)

    p_train = sub.add_parser("train", help="train the learned decoder")
    _add_code_flags(p_train)
    p_train.add_argument("--steps", type=int, required=True, help="SGD steps")
    p_train.add_argument("--batch", type=int, default=256)
    p_train.add_argument("--ebno-db", type=float, default=None,
                         help="training SNR (default picked from the code rate)")
    p_train.add_argument("--iters", type=int, default=8, help="unrolled iterations")
    p_train.add_argument("--fn", type=int, default=20, help="node state dimension")
    p_train.add_argument("--fm", type=int, default=20, help="message dimension")
    p_train.add_argument("--fna", type=int, default=0, help="node attribute dimension")
    p_train.add_argument("--fma", type=int, default=0, help="edge attribute dimension")
    p_train.add_argument("--hidden", type=int, default=40)
    p_train.add_argument("--layers", type=int, default=2)
    p_train.add_argument("--activation", default="tanh",
                         choices=["tanh", "relu", "sigmoid", "identity"])
    p_train.add_argument("--aggregation", default="mean", choices=["mean", "sum"])
    p_train.add_argument("--bias", action=argparse.BooleanOptionalAction,
                         default=False, help="MLP bias terms (default: --no-bias)")
    p_train.add_argument("--llr-clip", type=float, default=None)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--eval-every", type=int, default=1000)
    p_train.add_argument("--val-words", type=int, default=10_000)
    p_train.add_argument("--out", default="model.ckpt")
    p_train.add_argument("--metrics", help="metrics CSV path (default <out>_metrics.csv)")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="Monte-Carlo BER/BLER sweeps")
    _add_code_flags(p_eval)
    p_eval.add_argument("--decoder", required=True,
                        choices=["bp", "gnn", "ml", "uncoded"])
    p_eval.add_argument("--iters", type=_int_list, default=None,
                        help="iteration count(s), comma-separated")
    p_eval.add_argument("--ebno-db", type=_float_list, required=True,
                        help="SNR points in dB, comma-separated (no default)")
    p_eval.add_argument("--checkpoint", help="trained model (gnn)")
    p_eval.add_argument("--allow-rebind", action="store_true",
                        help="permit a checkpoint trained on a different code")
    p_eval.add_argument("--target-errors", type=int, default=500)
    p_eval.add_argument("--max-blocks", type=int, default=100_000)
    p_eval.add_argument("--batch-blocks", type=int, default=256)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--workers", type=int, default=1)
    p_eval.add_argument("--out", default="results.csv")
    p_eval.set_defaults(func=cmd_eval)
    return parser


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("run 'gnnfec --help' for usage", file=sys.stderr)
        return EXIT_USAGE
    except NonFiniteLoss as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except GnnFecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
