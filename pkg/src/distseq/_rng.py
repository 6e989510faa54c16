"""Counter-based random streams.

Every stream is keyed by ``(seed, replication, machine)``.  The key is hashed
by :class:`numpy.random.SeedSequence` into the state of a PCG64 generator, and
normals are drawn with numpy's ziggurat sampler.  A machine's noise therefore
never depends on which other machines were generated, or in what order.
"""
from __future__ import annotations

import numpy as np

# spawn-key namespaces, so simulation and Monte Carlo draws never share a stream
DATA = 0
POSTERIOR_DRAWS = 1


def stream(seed: int, *key: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """A child 64-bit seed, e.g. one per replication."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
