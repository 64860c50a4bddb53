import numpy as np
import pytest

from precond_langevin import SpdMatrix


def random_spd(rng: np.random.Generator, d: int, jitter: float = 0.5) -> SpdMatrix:
    a = rng.standard_normal((d, d))
    return SpdMatrix(a @ a.T + (jitter + rng.random()) * np.eye(d))


class ZeroNoise:
    """Stand-in generator returning zero normal variates."""

    def standard_normal(self, size=None):
        return np.zeros(size) if size is not None else 0.0


class CountingRng:
    """Wraps a generator and counts scalar normal variates consumed."""

    def __init__(self, rng):
        self._rng = rng
        self.count = 0

    def standard_normal(self, size=None):
        out = self._rng.standard_normal(size)
        self.count += int(np.size(out))
        return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)
