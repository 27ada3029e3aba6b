"""Forward-error-correction workbench with a fully learned decoder.

Code construction (Hamming, single-parity-check, BCH, regular LDPC,
alist files), an AWGN/BPSK channel, classical sum-product decoding, a
trainable message-passing decoder with its own reverse-mode autodiff
and Adam, and a Monte-Carlo BER harness with an exact bitwise-ML oracle
for tiny codes.
"""

__version__ = "0.1.0"

from . import bp, channel, codes, errors, evaluation, gf2m, gnn, kernels, nn, rng, training
from .bp import bp_decode, bp_decode_batch
from .channel import AwgnChannel, bpsk_modulate, demap_llr, ebno_to_sigma2, hard_decision
from .codes import (
    LinearCode,
    ParityCheckMatrix,
    TannerGraph,
    bch,
    encode,
    generator_from_h,
    hamming_7_4,
    load_alist,
    regular_ldpc,
    save_alist,
    single_parity_check,
    syndrome,
    tanner_graph,
)
from .evaluation import (
    BerReport,
    BpDecoder,
    GnnDecoder,
    MlDecoder,
    SweepSpec,
    UncodedDecoder,
    compare_decoders,
    ml_bitwise_decode,
    run_sweep,
)
from .gnn import GnnConfig, GnnParameters, gnn_decode, gnn_init, rebind_graph
from .training import (
    Checkpoint,
    TrainConfig,
    bce_multiloss,
    load_checkpoint,
    restore_parameters,
    save_checkpoint,
    train,
)
