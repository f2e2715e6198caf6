"""Shared fixtures and helpers for the test suite.

Dynamical tests need irrational length data: rational lengths make breakpoint
orbits collide and the Keane guard fires (correctly).  The golden rotation and
Dirichlet draws from fixed substreams are used throughout.
"""

import math

import numpy as np
import pytest

from ietlab.experiments import substream
from ietlab.iet import Iet, PiecewiseFunction, make_iet, mean_value

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@pytest.fixture
def golden_iet() -> Iet:
    return make_iet([1.0 - GOLDEN, GOLDEN], [2, 1])


@pytest.fixture
def d4_balanced() -> Iet:
    """The d=4 reversal used by the heavier trend tests: a fixed Dirichlet
    draw with all lengths >= 0.12, so renormalization converges at desk
    scale."""
    rng = substream(9, 900)
    while True:
        lam = rng.dirichlet(np.ones(4))
        if lam.min() >= 0.12:
            return make_iet(lam, [4, 3, 2, 1])


def random_irreducible_perm(rng, d):
    """Uniform permutation conditioned on irreducibility (no proper prefix
    mapped onto itself)."""
    while True:
        p = rng.permutation(d) + 1
        if all(p[:k].max() > k for k in range(1, d)):
            return [int(v) for v in p]


def random_iet(rng, d, min_length=0.0) -> Iet:
    while True:
        lam = rng.dirichlet(np.ones(d))
        if lam.min() >= min_length:
            return make_iet(lam, random_irreducible_perm(rng, d))


def random_affine(rng, d) -> PiecewiseFunction:
    return PiecewiseFunction(rng.normal(size=d), rng.normal(size=d))


def zero_meaned(f: PiecewiseFunction, T: Iet) -> PiecewiseFunction:
    return PiecewiseFunction(f.slope, f.intercept - mean_value(f, T))
