"""BPSK mapping, AWGN transmission, and LLR demapping."""

import numpy as np
import pytest

from gnnfec.channel import (
    AwgnChannel,
    bpsk_modulate,
    demap_llr,
    ebno_to_sigma2,
    hard_decision,
    transmit,
)
from gnnfec.errors import InvalidRate, InvalidSigma


def test_bpsk_mapping():
    bits = np.array([0, 1, 0, 1, 1], dtype=np.uint8)
    x = bpsk_modulate(bits)
    assert np.array_equal(x, [1.0, -1.0, 1.0, -1.0, -1.0])
    assert x.dtype == np.float64


def test_demap_scaling():
    y = np.array([0.5, -2.0, 0.0])
    assert np.array_equal(demap_llr(y, 1.0), [1.0, -4.0, 0.0])
    assert np.array_equal(demap_llr(y, 0.5), [2.0, -8.0, 0.0])
    with pytest.raises(InvalidSigma):
        demap_llr(y, 0.0)
    with pytest.raises(InvalidSigma):
        demap_llr(y, -1.0)


def test_ebno_to_sigma2_values():
    assert ebno_to_sigma2(0.0, 0.5) == pytest.approx(1.0)
    assert ebno_to_sigma2(0.0, 1.0) == pytest.approx(0.5)
    assert ebno_to_sigma2(10.0, 0.5) == pytest.approx(0.1)
    # higher SNR or higher rate -> smaller noise
    assert ebno_to_sigma2(4.0, 0.5) < ebno_to_sigma2(2.0, 0.5)
    with pytest.raises(InvalidRate):
        ebno_to_sigma2(0.0, 0.0)
    with pytest.raises(InvalidRate):
        ebno_to_sigma2(0.0, 1.5)


def test_hard_decision_sign_convention():
    llr = np.array([3.0, -0.5, 0.0, -0.0, 1e-300])
    # positive favors bit 0; exact zero resolves to 0
    assert np.array_equal(hard_decision(llr), [0, 1, 0, 0, 0])
    assert hard_decision(llr).dtype == np.uint8


def test_transmit_deterministic_per_stream():
    x = np.ones((4, 8))
    ch = AwgnChannel(0.5, seed=3)
    y0 = ch.transmit(x, stream=0)
    y1 = ch.transmit(x, stream=1)
    assert not np.array_equal(y0, y1)
    assert np.array_equal(ch.transmit(x, stream=0), y0)
    # a fresh channel object with the same seed reproduces the streams
    again = AwgnChannel(0.5, seed=3)
    assert np.array_equal(again.transmit(x, stream=0), y0)


def test_transmit_stream_independent_of_history():
    x = np.ones(32)
    a = AwgnChannel(1.0, seed=9)
    b = AwgnChannel(1.0, seed=9)
    _ = a.transmit(x, stream=0)
    assert np.array_equal(a.transmit(x, stream=5), b.transmit(x, stream=5))


def test_transmit_noise_statistics():
    x = np.zeros(200_000)
    ch = AwgnChannel(0.8, seed=1)
    noise = ch.transmit(x)
    assert abs(noise.mean()) < 0.01
    assert noise.var() == pytest.approx(0.8, rel=0.02)


def test_noiseless_channel_passthrough():
    x = np.linspace(-1, 1, 10)
    ch = AwgnChannel(0.0, seed=0)
    assert np.array_equal(ch.transmit(x), x)


def test_channel_labels_give_distinct_noise():
    x = np.zeros(16)
    a = AwgnChannel(1.0, seed=4, label="train-channel")
    b = AwgnChannel(1.0, seed=4, label="validation-channel")
    assert not np.array_equal(a.transmit(x), b.transmit(x))


def test_module_level_transmit_wrapper():
    x = np.ones(8)
    ch = AwgnChannel(0.25, seed=2)
    assert np.array_equal(transmit(x, ch, stream=1), ch.transmit(x, stream=1))


def test_channel_rejects_negative_variance():
    with pytest.raises(InvalidSigma):
        AwgnChannel(-0.1, seed=0)
