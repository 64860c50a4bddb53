"""Reproducible random streams.

Every stochastic routine takes a ``numpy.random.Generator``. Streams are
built on the counter-based Philox bit generator: ``substream(seed, k)``
jumps the base stream by ``k`` blocks of 2**128 draws, giving
statistically independent, exactly reproducible substreams for parallel
chains and repeated experiments. Normal variates come from the
generator's ``standard_normal`` (numpy's ziggurat transform), which is
bit-stable for a pinned numpy version.
"""

from __future__ import annotations

import numpy as np


def substream(seed: int, index: int = 0) -> np.random.Generator:
    """Return generator ``index`` of the Philox stream family for ``seed``."""
    if index < 0:
        raise ValueError("substream index must be >= 0")
    bitgen = np.random.Philox(key=np.uint64(seed))
    if index:
        bitgen = bitgen.jumped(index)
    return np.random.Generator(bitgen)
