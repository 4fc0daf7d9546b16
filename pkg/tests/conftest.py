import math

import numpy as np
import pytest

from lfplab.oracle import GaussianMixture, GaussianState, coherent_state, mixture_field
from lfplab.phasespace import build_grid


def generic_grid(n=128, L=3.0):
    """Square-proportioned grid (dx ~ dxi): the balanced choice for random fields."""
    return build_grid(n, L, 2.0 * L * L / (math.pi * n))


@pytest.fixture(scope="session")
def grid256():
    return build_grid(256, 4.0, 2**-4)


@pytest.fixture(scope="session")
def coherent256(grid256):
    mix = GaussianMixture([coherent_state((0.5, 0.25), grid256.h)])
    return mixture_field(mix, grid256)


def random_localized_mixture(grid, rng, n_comp=3, spread=0.55):
    """A physically sensible random field: mixture of near-coherent bumps."""
    ws = rng.random(n_comp)
    ws /= ws.sum()
    comps = []
    for w in ws:
        ctr = rng.uniform(-spread, spread, 2)
        scale = rng.uniform(1.0, 2.0)
        cov = (grid.h / 2.0) * scale * np.eye(2)
        comps.append(GaussianState(w, ctr, cov))
    return mixture_field(GaussianMixture(comps), grid)


def l1(field):
    return field.l1_norm()


def linf_rel(a, b):
    scale = max(np.max(np.abs(b)), 1e-300)
    return float(np.max(np.abs(a - b)) / scale)
