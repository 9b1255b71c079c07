"""Splittable per-path seeding.

Path k of a batch draws from ``PCG64(derive_seed(root, k))``, so each path's
stream depends only on (root seed, path index).  This keeps batched and
parallel runs bit-identical regardless of chunking or thread count.
"""

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def derive_seed(root: int, k: int) -> int:
    """64-bit splitmix-style mix of a root seed and a path index."""
    z = (int(root) + _GOLDEN * (int(k) + 1)) & _MASK64
    z ^= z >> 30
    z = (z * _MIX1) & _MASK64
    z ^= z >> 27
    z = (z * _MIX2) & _MASK64
    z ^= z >> 31
    return z


def path_generator(root: int, k: int) -> np.random.Generator:
    """Generator for path ``k`` under root seed ``root``."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, k)))
