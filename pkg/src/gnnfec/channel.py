"""BPSK modulation, AWGN corruption, and LLR demapping.

Log-likelihood ratios follow the project-wide convention
``llr = log p(c=0)/p(c=1)``: positive values favor bit 0, and hard
decisions resolve ties (llr = 0) to 0.
"""

import numpy as np

from .errors import InvalidRate, InvalidSigma
from .rng import counter_stream, stream_key


def bpsk_modulate(c):
    """Map bits to symbols x = -2c + 1 (0 -> +1, 1 -> -1)."""
    c = np.asarray(c)
    return -2.0 * c + 1.0


def demap_llr(y, sigma2):
    """Channel LLRs of received symbols: llr = 2y / sigma2."""
    if not sigma2 > 0:
        raise InvalidSigma(f"noise variance must be positive, got {sigma2}")
    return 2.0 * np.asarray(y, dtype=np.float64) / sigma2


def ebno_to_sigma2(ebno_db, rate):
    """Noise variance for an Eb/N0 point (BPSK, 1 bit per symbol).

    sigma2 = 1 / (2 * rate * 10^(ebno_db/10)).
    """
    if not 0 < rate <= 1:
        raise InvalidRate(f"code rate must be in (0, 1], got {rate}")
    return 1.0 / (2.0 * rate * 10.0 ** (ebno_db / 10.0))


def hard_decision(llr):
    """Bits from LLRs: 0 where llr >= 0 (ties to 0), else 1."""
    return (np.asarray(llr) < 0).astype(np.uint8)


class AwgnChannel:
    """Additive white Gaussian noise with counter-based noise streams.

    The noise for stream index ``i`` is a pure function of
    (seed, label, i), so per-batch generation is reproducible no matter
    how batches are distributed over workers.  ``sigma2 = 0`` is the
    noiseless test mode.
    """

    def __init__(self, sigma2, seed, label="channel"):
        if sigma2 < 0:
            raise InvalidSigma(f"noise variance must be non-negative, got {sigma2}")
        self.sigma2 = float(sigma2)
        self.seed = int(seed)
        self.label = label
        self._key = stream_key(seed, label)

    def transmit(self, x, stream=0):
        """Return y = x + n for noise stream index ``stream``.

        Parameters
        ----------
        x : array_like
            Modulated symbols, any shape.
        stream : int
            Index of the noise substream (batch counter).

        Returns
        -------
        numpy.ndarray of float64, same shape as x.
        """
        x = np.asarray(x, dtype=np.float64)
        if self.sigma2 == 0.0:
            return x.copy()
        rng = counter_stream(self._key, stream)
        return x + rng.normal(0.0, np.sqrt(self.sigma2), size=x.shape)


def transmit(x, ch, stream=0):
    """Functional form of :meth:`AwgnChannel.transmit`."""
    return ch.transmit(x, stream=stream)
