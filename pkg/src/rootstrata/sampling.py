"""Seeded random configurations for verification suites and tests."""

from __future__ import annotations

import numpy as np

from .polycore import RootConfiguration

MIN_GAP = 0.02


def random_strict(rng: np.random.Generator, n: int) -> RootConfiguration:
    """Strictly hyperbolic configuration with n distinct roots in [0, 1]."""
    while True:
        roots = np.sort(rng.uniform(0.0, 1.0, n))
        if n == 1 or np.min(np.diff(roots)) > MIN_GAP:
            return RootConfiguration(tuple(roots), (1,) * n)


def random_config(rng: np.random.Generator, n: int) -> RootConfiguration:
    """Hyperbolic configuration of degree n with a random multiplicity split."""
    q = int(rng.integers(1, n + 1))
    # Random composition of n into q positive parts.
    cuts = np.sort(rng.choice(np.arange(1, n), size=q - 1, replace=False)) if q > 1 else []
    parts = np.diff(np.concatenate(([0], cuts, [n])))
    while True:
        roots = np.sort(rng.uniform(0.0, 1.0, q))
        if q == 1 or np.min(np.diff(roots)) > MIN_GAP:
            return RootConfiguration(tuple(roots), tuple(int(p) for p in parts))
