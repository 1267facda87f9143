import numpy as np
import pytest

from polylab.environment import Environment, WeightDistribution, generate
from polylab.lattice import Box


def env_from_weights(weights, dist=None):
    """Environment from an explicit ``(d, *shape)`` weight array (outgoing edges masked)."""
    w = np.array(weights, dtype=float)
    d = w.shape[0]
    for j in range(d):
        idx = [j] + [slice(None)] * d
        idx[j + 1] = -1
        w[tuple(idx)] = np.nan
    box = Box(tuple(s - 1 for s in w.shape[1:]))
    return Environment(box, dist or WeightDistribution.constant(0.0), 0, w)


@pytest.fixture
def make_env():
    def make(kind="exponential", corner=(4, 4), seed=0, **params):
        dists = {
            "exponential": lambda: WeightDistribution.exponential(params.get("rate", 1.0)),
            "uniform": lambda: WeightDistribution.uniform(0.0, 1.0),
            "bernoulli": lambda: WeightDistribution.bernoulli(0.5),
            "constant": lambda: WeightDistribution.constant(params.get("c", 1.0)),
        }
        return generate(dists[kind](), Box(corner), seed)
    return make
