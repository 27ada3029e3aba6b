"""Exhaustive bitwise decoding and Monte-Carlo error-rate sweeps."""

import numpy as np
import pytest
from scipy import stats

from gnnfec.codes import LinearCode, ParityCheckMatrix, hamming_7_4, single_parity_check
from gnnfec.errors import DigestMismatch, InvalidParameter, LengthMismatch, TooLarge
from gnnfec.evaluation import (
    RESULTS_HEADER,
    BerReport,
    BpDecoder,
    GnnDecoder,
    MlDecoder,
    SweepSpec,
    UncodedDecoder,
    compare_decoders,
    ml_bitwise_decode,
    results_csv,
    run_sweep,
    uncoded_ber_theory,
)
from gnnfec.gnn import GnnConfig
from gnnfec.training import TrainConfig, save_checkpoint, train


def _repetition_3():
    return LinearCode("rep_3", ParityCheckMatrix([[1, 1, 0], [0, 1, 1]]))


def _hamming():
    return LinearCode("hamming_7_4", hamming_7_4())


def test_uncoded_theory_matches_gaussian_tail():
    # oracle: the tail probability Q(sqrt(2*Eb/N0)) via scipy's normal sf
    for ebno_db in (0.0, 2.0, 4.0):
        q = stats.norm.sf(np.sqrt(2.0 * 10 ** (ebno_db / 10)))
        assert uncoded_ber_theory(ebno_db) == pytest.approx(q, rel=1e-12)
    assert uncoded_ber_theory(0.0) == pytest.approx(0.0786, abs=5e-5)


def test_two_codeword_marginals_frozen_from_brute_force():
    # codebook {000, 111}: for llr l the exact bitwise marginal of every
    # bit is log exp(0) - log exp(-(l0+l1+l2)) = sum(l)
    code = _repetition_3()
    llr = np.array([0.5, -0.2, 0.1])
    out = ml_bitwise_decode(code, llr)
    assert out == pytest.approx([0.4, 0.4, 0.4], rel=1e-12)
    batch = ml_bitwise_decode(code, np.tile(llr, (4, 1)))
    assert batch.shape == (4, 3)
    assert np.array_equal(batch[0], out)


def test_exhaustive_decoder_recovers_noiseless_words():
    code = _hamming()
    rng = np.random.default_rng(0)
    info = rng.integers(0, 2, size=(32, 4), dtype=np.uint8)
    words = (info.astype(np.int64) @ code.generator.matrix.astype(np.int64)) & 1
    llr = (1.0 - 2.0 * words) * 20.0
    out = ml_bitwise_decode(code, llr)
    assert np.array_equal((out < 0).astype(np.uint8), words)


def test_chunked_enumeration_matches_unchunked():
    # chunking only batches the words; per-word results agree up to the
    # last-ulp wobble of differently blocked dense products
    code = _hamming()
    rng = np.random.default_rng(1)
    llr = rng.standard_normal((10, 7)) * 2
    base = ml_bitwise_decode(code, llr)
    chunked = ml_bitwise_decode(code, llr, chunk_words=3)
    assert np.allclose(base, chunked, rtol=1e-12, atol=1e-14)


def test_exhaustive_decoder_validation():
    code = _hamming()
    with pytest.raises(LengthMismatch):
        ml_bitwise_decode(code, np.zeros(6))
    big = LinearCode("spc_26", single_parity_check(26))
    with pytest.raises(TooLarge):
        ml_bitwise_decode(big, np.zeros(26))


def test_results_header_and_row_format():
    assert RESULTS_HEADER == (
        "code,decoder,n_iter,ebno_db,bits,bit_errors,blocks,block_errors,"
        "ber,bler,seed,stop_reason"
    )
    report = BerReport(
        code="hamming_7_4", decoder="bp", n_iter=20, ebno_db=4.0,
        bits_simulated=700, bit_errors=3, blocks_simulated=100,
        block_errors=2, ber=3 / 700, bler=0.02, seed=5,
        stop_reason="max_blocks", wall_time_s=0.1, noise_digest="ab12",
    )
    text = results_csv([report])
    lines = text.splitlines()
    assert lines[0] == RESULTS_HEADER
    assert lines[1] == (
        "hamming_7_4,bp,20,4.000000000e+00,700,3,100,2,"
        "4.285714286e-03,2.000000000e-02,5,max_blocks"
    )
    with_digest = results_csv([report], with_digest=True)
    assert with_digest.splitlines()[0] == RESULTS_HEADER + ",noise_digest"
    assert with_digest.splitlines()[1].endswith(",ab12")


def test_sweep_stop_reasons_and_counting():
    decoder = UncodedDecoder(block_length=64)
    quiet = SweepSpec(decoder=decoder, ebno_db=[20.0], target_bit_errors=500,
                      max_blocks=50, batch_blocks=16, seed=1)
    (report,) = run_sweep(quiet)[0]
    assert report.stop_reason == "max_blocks"
    assert report.blocks_simulated == 50
    assert report.bits_simulated == 50 * 64
    assert report.ber == report.bit_errors / report.bits_simulated
    assert report.bler == report.block_errors / report.blocks_simulated

    noisy = SweepSpec(decoder=decoder, ebno_db=[0.0], target_bit_errors=50,
                      max_blocks=10_000, batch_blocks=8, seed=1)
    (report,) = run_sweep(noisy)[0]
    assert report.stop_reason == "target_errors"
    assert report.bit_errors >= 50
    assert report.blocks_simulated < 10_000


def test_uncoded_measurement_matches_theory():
    decoder = UncodedDecoder(block_length=512)
    spec = SweepSpec(decoder=decoder, ebno_db=[2.0], target_bit_errors=None,
                     max_blocks=200, batch_blocks=64, seed=3)
    (report,) = run_sweep(spec)[0]
    p = uncoded_ber_theory(2.0)
    sigma = np.sqrt(p * (1 - p) / report.bits_simulated)
    assert abs(report.ber - p) < 3 * sigma


def test_sweep_is_deterministic_and_worker_invariant():
    decoder = BpDecoder(_hamming(), n_iter=5)
    kwargs = dict(decoder=decoder, ebno_db=[2.0, 4.0], target_bit_errors=None,
                  max_blocks=300, batch_blocks=64, seed=9)
    first = run_sweep(SweepSpec(**kwargs))[0]
    second = run_sweep(SweepSpec(**kwargs))[0]
    parallel = run_sweep(SweepSpec(workers=2, **kwargs))[0]
    for a, b, c in zip(first, second, parallel):
        for other in (b, c):
            assert a.ber == other.ber
            assert a.bler == other.bler
            assert a.noise_digest == other.noise_digest


def test_paired_comparison_shares_noise_and_favors_exhaustive():
    code = _hamming()
    reports, csv_text = compare_decoders(
        code, [BpDecoder(code, n_iter=20), MlDecoder(code)],
        ebno_db=[4.0], max_blocks=2000, seed=42,
    )
    bp, ml = reports
    assert bp.noise_digest == ml.noise_digest
    assert bp.stop_reason == ml.stop_reason == "max_blocks"
    # per-bit exhaustive decoding minimizes BER; with 14k paired bits at
    # this fixed seed the ordering is reproducible
    assert ml.ber <= bp.ber
    header = csv_text.splitlines()[0]
    assert header == RESULTS_HEADER + ",noise_digest"


def test_learned_decoder_handle_round_trip(tmp_path):
    code = _hamming()
    config = GnnConfig(f_n=4, f_m=4, hidden_units=6, n_iter_train=2)
    ckpt, _ = train(code, config, TrainConfig(
        total_steps=5, batch_size=8, seed=3, val_words=0))
    path = tmp_path / "tiny.ckpt"
    save_checkpoint(ckpt, path)

    handle = GnnDecoder.from_checkpoint(code, path, n_iter=1)
    assert handle.name == "gnn"
    assert handle.n_iter == 1
    spec = SweepSpec(decoder=handle, ebno_db=[4.0], target_bit_errors=None,
                     max_blocks=64, batch_blocks=32, seed=2)
    (report,) = run_sweep(spec)[0]
    assert report.decoder == "gnn"
    assert report.n_iter == 1
    assert 0 <= report.ber <= 1

    other = LinearCode("spc_7", single_parity_check(7))
    with pytest.raises(DigestMismatch):
        GnnDecoder.from_checkpoint(other, path)
    with pytest.warns(UserWarning, match="rebinding"):
        rebound = GnnDecoder.from_checkpoint(other, path, allow_rebind=True)
    assert rebound.code_name == "spc_7"


def test_sweep_spec_validation():
    decoder = UncodedDecoder()
    with pytest.raises(InvalidParameter):
        SweepSpec(decoder=decoder, ebno_db=[])
    with pytest.raises(InvalidParameter):
        SweepSpec(decoder=decoder, ebno_db=[1.0], target_bit_errors=0)
    with pytest.raises(InvalidParameter):
        SweepSpec(decoder=decoder, ebno_db=[1.0], max_blocks=0)
    with pytest.raises(InvalidParameter):
        SweepSpec(decoder=decoder, ebno_db=[1.0], workers=0)
    with pytest.raises(InvalidParameter):
        UncodedDecoder(block_length=0)
