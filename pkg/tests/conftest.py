import numpy as np
import pytest

from lilis.geometry import Rect
from lilis.storage import Gaussian, Skewed, SyntheticSpec, Uniform, gen_synthetic

UNIT = Rect(0.0, 0.0, 1.0, 1.0)


def make_points(kind: str, n: int, seed: int = 0, domain: Rect = UNIT):
    """Synthetic dataset shorthand used across the suite."""
    dist = {
        "uniform": Uniform(),
        "gaussian": Gaussian(clusters=4, sigma=0.05),
        "zipf": Skewed(zipf_s=1.2),
    }[kind]
    return gen_synthetic(SyntheticSpec(dist, n, domain=domain, seed=seed))


def clustered_with_duplicates(n: int, seed: int = 0):
    """Gaussian clusters with coordinates rounded to 2 decimals.

    Rounding manufactures heavy duplicate-key runs, which is what stresses
    the outward scans around the learned corridor.
    """
    data = make_points("gaussian", n, seed=seed)
    xs = np.round(data.xs, 2)
    ys = np.round(data.ys, 2)
    return xs, ys, data.payloads


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)
