"""Single entry point for reproducibility.

`set_global_seed` resets the generator that feeds parameter initialization,
data shuffling, and dropout masks. Calling it with the same seed before the
same sequence of operations reproduces every draw bit for bit.
"""
from __future__ import annotations

import numpy as np

_rng = np.random.default_rng(0)
_seed = 0


def set_global_seed(seed: int) -> None:
    global _rng, _seed
    _seed = int(seed)
    _rng = np.random.default_rng(_seed)


def get_rng() -> np.random.Generator:
    return _rng


def current_seed() -> int:
    return _seed


def derived_rng(*components: int) -> np.random.Generator:
    """Deterministic child generator, e.g. per (seed, epoch) shuffles."""
    return np.random.default_rng([int(c) & 0xFFFFFFFF for c in components])
