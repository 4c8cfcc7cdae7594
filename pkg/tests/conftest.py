import numpy as np
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_stochastic(rng, n, density=0.5):
    """Random row-stochastic matrix with self-loops and a ring backbone (so irreducible)."""
    mask = rng.random((n, n)) < density
    mask[np.arange(n), np.arange(n)] = True
    mask[np.arange(n), (np.arange(n) + 1) % n] = True
    w = np.where(mask, rng.random((n, n)) + 0.05, 0.0)
    return w / w.sum(axis=1, keepdims=True)


def random_spd(rng, d, scale=1.0):
    a = rng.standard_normal((d, d))
    return scale * (a @ a.T + d * np.eye(d))
