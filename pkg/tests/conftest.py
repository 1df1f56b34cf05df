import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def random_finite_array(rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform random bit patterns, rejecting NaN and infinities."""
    out = np.empty(size)
    filled = 0
    while filled < size:
        bits = rng.integers(0, 2**64, size=size - filled, dtype=np.uint64)
        vals = bits.view(np.float64)
        vals = vals[np.isfinite(vals)]
        out[filled : filled + vals.size] = vals
        filled += vals.size
    return out


def random_finite(rng: np.random.Generator) -> float:
    return float(random_finite_array(rng, 1)[0])


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0xC0FFEE)
