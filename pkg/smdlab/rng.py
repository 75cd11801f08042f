"""Seeded random streams.

Every consumer of randomness receives its own ``numpy.random.Generator``
built on the counter-based Philox bit generator. A stream is identified by
the pair (seed, stream id), so results never depend on which worker runs a
job or in which order jobs finish.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Stream ids of the different consumers of randomness."""

    RUN = 0
    CERTIFY = 1
    CONSTANTS = 2
    FLOW_STARTS = 3


def make_rng(seed: int, stream: int = Stream.RUN) -> np.random.Generator:
    """Return the generator of the given stream for a seed."""
    sequence = np.random.SeedSequence([int(seed), int(stream)])
    return np.random.Generator(np.random.Philox(sequence))
