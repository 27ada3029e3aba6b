"""Seed management.

Every run derives all of its randomness from one integer seed.  Named
substreams keep the independent consumers (code construction, parameter
init, training data, channel noise, validation) from ever sharing a
stream, and counter-based channel streams make per-batch noise
reproducible no matter how batches are scheduled across workers.
"""

import hashlib

import numpy as np


def _label_entropy(label):
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed, label, *indices):
    """Return a Generator for the named substream of ``seed``.

    Parameters
    ----------
    seed : int
        Run-level seed.
    label : str
        Name of the consumer, e.g. ``"init"`` or ``"train-data"``.
    *indices : int
        Optional integer coordinates (batch number, sweep point, ...)
        giving distinct streams within one label.

    Returns
    -------
    numpy.random.Generator
    """
    ss = np.random.SeedSequence([int(seed), _label_entropy(label), *map(int, indices)])
    return np.random.Generator(np.random.PCG64(ss))


def stream_key(seed, label):
    """128-bit key for a counter-based noise stream family."""
    material = f"{int(seed)}/{label}".encode("utf-8")
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:16], "little")


def counter_stream(key, index=0):
    """Generator for member ``index`` of the keyed stream family.

    Distinct (key, index) pairs give statistically independent streams,
    so batch ``index`` always sees the same noise regardless of which
    worker draws it or in which order.
    """
    return np.random.Generator(np.random.Philox(key=(int(key) + int(index)) % (1 << 128)))
