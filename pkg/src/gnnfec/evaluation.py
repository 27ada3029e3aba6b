"""Monte-Carlo BER/BLER measurement and the exact bitwise-ML oracle.

A sweep simulates one SNR point at a time: random codewords are drawn
in fixed-size batches, modulated, passed through AWGN, demapped, and
decoded until the point has collected its target number of bit errors
or hit its block cap.  Every batch gets its own named random substream
and its own counter-based noise stream, so the measured curve is
reproducible bit for bit under a fixed seed and batch size, with any
number of workers.

Comparisons between decoders reuse one seed, which pairs the noise:
each decoder sees the identical channel realizations, and a digest of
the consumed LLRs is reported so the pairing can be checked from the
output alone.
"""

import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from math import erfc, sqrt

import numpy as np

from .bp import bp_decode_batch
from .channel import (
    AwgnChannel,
    bpsk_modulate,
    demap_llr,
    ebno_to_sigma2,
    hard_decision,
)
from .codes import encode
from .errors import InvalidParameter, LengthMismatch, TooLarge
from .gnn import gnn_decode
from .rng import substream
from .training import load_checkpoint, restore_parameters

RESULTS_HEADER = (
    "code,decoder,n_iter,ebno_db,bits,bit_errors,blocks,block_errors,"
    "ber,bler,seed,stop_reason"
)

#: Enumeration budget: bitwise ML sums over all 2^k codewords.
ML_MAX_K = 20


def uncoded_ber_theory(ebno_db):
    """Gaussian tail BER of uncoded BPSK, Q(sqrt(2 * Eb/N0))."""
    return 0.5 * erfc(sqrt(10.0 ** (ebno_db / 10.0)))


def _enumerate_codebook(code):
    if code.k > ML_MAX_K:
        raise TooLarge(
            f"bitwise ML enumerates 2^k codewords; k = {code.k} exceeds "
            f"the budget of {ML_MAX_K}"
        )
    info = (np.arange(2 ** code.k, dtype=np.int64)[:, None]
            >> np.arange(code.k, dtype=np.int64)) & 1
    return encode(code.generator, info.astype(np.uint8))


def _ml_llrs(codebook, llr):
    """Exact bitwise posterior LLRs for a batch, log-sum-exp over codewords.

    The per-codeword channel log-likelihood is (up to a constant shared
    by all codewords) -sum_i c_i * llr_i; subset sums over {c_i = 0} and
    {c_i = 1} are taken after shifting by the per-word maximum, which
    cancels in the difference of logs.
    """
    book = codebook.astype(np.float64)
    scores = -(llr @ book.T)
    scores -= scores.max(axis=1, keepdims=True)
    weights = np.exp(scores)
    mass_one = weights @ book
    mass_zero = weights.sum(axis=1, keepdims=True) - mass_one
    with np.errstate(divide="ignore"):
        return np.log(mass_zero) - np.log(mass_one)


def ml_bitwise_decode(code, llr_ch, chunk_words=None):
    """Optimal bitwise maximum-likelihood LLRs by codebook enumeration.

    Accepts one word (n,) or a batch (B, n); hard decisions of the
    result are bitwise-optimal but need not form a codeword.  Raises
    TooLarge beyond the 2^k enumeration budget.
    """
    codebook = _enumerate_codebook(code)
    llr = np.asarray(llr_ch, dtype=np.float64)
    single = llr.ndim == 1
    if single:
        llr = llr[None, :]
    if llr.ndim != 2 or llr.shape[1] != code.n:
        raise LengthMismatch(
            f"LLR length {llr.shape[-1]} does not match n = {code.n}"
        )
    if chunk_words is None:
        chunk_words = max(1, 4_000_000 // codebook.shape[0])
    out = np.empty_like(llr)
    for start in range(0, llr.shape[0], chunk_words):
        out[start:start + chunk_words] = _ml_llrs(
            codebook, llr[start:start + chunk_words]
        )
    return out[0] if single else out


class _CodedSource:
    """Shared random-codeword sampling for decoders bound to a code."""

    def __init__(self, code):
        self.code = code
        self.code_name = code.name
        self.rate = code.rate
        self.block_length = code.n

    def sample_bits(self, rng, count):
        info = rng.integers(0, 2, size=(count, self.code.k), dtype=np.uint8)
        return encode(self.code.generator, info)


class BpDecoder(_CodedSource):
    """Classical sum-product decoding, syndrome-gated early stop."""

    name = "bp"

    def __init__(self, code, n_iter=20, early_stop=True):
        super().__init__(code)
        self.n_iter = n_iter
        self.early_stop = early_stop

    def decode(self, llr):
        marginals, _ = bp_decode_batch(
            self.code.graph, llr, self.n_iter,
            early_stop=self.early_stop, h=self.code.h,
        )
        return hard_decision(marginals)


class GnnDecoder(_CodedSource):
    """Learned message-passing decoding at a chosen iteration count."""

    name = "gnn"

    def __init__(self, code, params, config, n_iter=None):
        super().__init__(code)
        self.params = params
        self.config = config
        self.n_iter = n_iter if n_iter is not None else config.n_iter_train

    @classmethod
    def from_checkpoint(cls, code, checkpoint, n_iter=None, allow_rebind=False):
        """Build from a Checkpoint object or a checkpoint file path.

        Raises DigestMismatch when the stored code digest is not this
        code's and rebinding was not requested.
        """
        if isinstance(checkpoint, (str, bytes, os.PathLike)):
            checkpoint = load_checkpoint(checkpoint)
        params = restore_parameters(checkpoint, code, allow_rebind=allow_rebind)
        return cls(code, params, checkpoint.config, n_iter=n_iter)

    def decode(self, llr):
        out = gnn_decode(
            self.code.graph, self.params, self.config, llr, n_iter=self.n_iter
        )[-1]
        return hard_decision(out.data)


class MlDecoder(_CodedSource):
    """Brute-force bitwise ML; the per-bit optimum for tiny codes."""

    name = "ml"
    n_iter = None

    def __init__(self, code):
        super().__init__(code)
        self.codebook = _enumerate_codebook(code)
        self.chunk_words = max(1, 4_000_000 // self.codebook.shape[0])

    def decode(self, llr):
        out = np.empty_like(llr)
        for start in range(0, llr.shape[0], self.chunk_words):
            out[start:start + self.chunk_words] = _ml_llrs(
                self.codebook, llr[start:start + self.chunk_words]
            )
        return hard_decision(out)


class UncodedDecoder:
    """Rate-1 baseline: raw BPSK bits, per-bit hard decisions."""

    name = "uncoded"
    n_iter = None
    code_name = "uncoded"
    rate = 1.0

    def __init__(self, block_length=512):
        if block_length < 1:
            raise InvalidParameter("block_length must be >= 1")
        self.block_length = block_length

    def sample_bits(self, rng, count):
        return rng.integers(0, 2, size=(count, self.block_length), dtype=np.uint8)

    def decode(self, llr):
        return hard_decision(llr)


@dataclass
class SweepSpec:
    """One decoder, a list of SNR points, and the stopping policy.

    ``target_bit_errors=None`` disables the error target so every point
    runs its full block budget — that is what paired comparisons use,
    since identical batch sequences keep the noise digests equal.
    """

    decoder: object
    ebno_db: list
    target_bit_errors: int | None = 500
    max_blocks: int = 100_000
    seed: int = 0
    batch_blocks: int = 256
    workers: int = 1

    def __post_init__(self):
        if not self.ebno_db:
            raise InvalidParameter("ebno_db list is empty")
        if self.target_bit_errors is not None and self.target_bit_errors < 1:
            raise InvalidParameter("target_bit_errors must be positive or None")
        if self.max_blocks < 1 or self.batch_blocks < 1:
            raise InvalidParameter("block counts must be >= 1")
        if self.workers < 1:
            raise InvalidParameter("workers must be >= 1")


@dataclass
class BerReport:
    """Measured error rates of one (decoder, SNR) point."""

    code: str
    decoder: str
    n_iter: int | None
    ebno_db: float
    bits_simulated: int
    bit_errors: int
    blocks_simulated: int
    block_errors: int
    ber: float
    bler: float
    seed: int
    stop_reason: str
    wall_time_s: float
    noise_digest: str


def _run_point(spec, point_index, ebno_db):
    handle = spec.decoder
    start = time.perf_counter()
    sigma2 = ebno_to_sigma2(ebno_db, handle.rate)
    channel = AwgnChannel(sigma2, spec.seed, label=f"sweep-channel/{point_index}")
    target = np.inf if spec.target_bit_errors is None else spec.target_bit_errors
    digest = hashlib.sha256()

    bit_errors = block_errors = blocks = 0
    batch_index = 0
    while blocks < spec.max_blocks and bit_errors < target:
        count = min(spec.batch_blocks, spec.max_blocks - blocks)
        rng = substream(spec.seed, "sweep-data", point_index, batch_index)
        bits = handle.sample_bits(rng, count)
        y = channel.transmit(bpsk_modulate(bits), stream=batch_index)
        llr = demap_llr(y, sigma2)
        digest.update(llr.tobytes())
        wrong = handle.decode(llr) != bits
        bit_errors += int(wrong.sum())
        block_errors += int(wrong.any(axis=1).sum())
        blocks += count
        batch_index += 1

    bits_total = blocks * handle.block_length
    return BerReport(
        code=handle.code_name,
        decoder=handle.name,
        n_iter=handle.n_iter,
        ebno_db=float(ebno_db),
        bits_simulated=bits_total,
        bit_errors=bit_errors,
        blocks_simulated=blocks,
        block_errors=block_errors,
        ber=bit_errors / bits_total,
        bler=block_errors / blocks,
        seed=spec.seed,
        stop_reason="target_errors" if bit_errors >= target else "max_blocks",
        wall_time_s=time.perf_counter() - start,
        noise_digest=digest.hexdigest()[:16],
    )


def run_sweep(spec):
    """Measure every SNR point of a spec; returns (reports, CSV text)."""
    points = list(enumerate(spec.ebno_db))
    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            reports = list(pool.map(lambda pe: _run_point(spec, *pe), points))
    else:
        reports = [_run_point(spec, i, e) for i, e in points]
    return reports, results_csv(reports)


def compare_decoders(code, decoders, ebno_db, max_blocks=10_000, seed=0,
                     batch_blocks=256, workers=1):
    """Paired sweep of several decoders on one code.

    All decoders share the seed and run the full block budget (no error
    target), so every decoder sees identical channel realizations —
    verifiable from the noise_digest column of the merged CSV.
    """
    reports = []
    for decoder in decoders:
        spec = SweepSpec(
            decoder=decoder,
            ebno_db=list(ebno_db),
            target_bit_errors=None,
            max_blocks=max_blocks,
            seed=seed,
            batch_blocks=batch_blocks,
            workers=workers,
        )
        point_reports, _ = run_sweep(spec)
        reports.extend(point_reports)
    return reports, results_csv(reports, with_digest=True)


def _format_row(report, with_digest):
    n_iter = "" if report.n_iter is None else str(report.n_iter)
    row = (
        f"{report.code},{report.decoder},{n_iter},{report.ebno_db:.9e},"
        f"{report.bits_simulated},{report.bit_errors},"
        f"{report.blocks_simulated},{report.block_errors},"
        f"{report.ber:.9e},{report.bler:.9e},{report.seed},{report.stop_reason}"
    )
    if with_digest:
        row += f",{report.noise_digest}"
    return row


def results_csv(reports, with_digest=False):
    header = RESULTS_HEADER + (",noise_digest" if with_digest else "")
    lines = [header] + [_format_row(r, with_digest) for r in reports]
    return "\n".join(lines) + "\n"
