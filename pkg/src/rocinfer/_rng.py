"""Seeded random streams.

Every random draw in the package comes from a generator derived from a user
seed plus a tuple of integer keys (replicate index, chunk index, ...), so the
result of replicate ``b`` never depends on how many other replicates ran or in
which order.
"""

import secrets

import numpy as np


def stream(seed, *keys):
    """Return an independent generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def auto_seed():
    return secrets.randbits(63)
