"""Counter-keyed random streams.

Every path owns independent streams identified by (seed, path_index, series).
The stream is a Philox generator whose 256-bit counter starts at
``[0, path_index, series, 0]`` with ``key = [seed, 0]``: distinct
(path_index, series) pairs can never overlap because a single stream would
have to emit 2**64 blocks before carrying into the second counter word.
This makes batch simulation reproducible under any chunking or parallel
schedule: path i drawn inside a batch is bit-identical to path i drawn alone.
"""

from __future__ import annotations

import numpy as np

# series indices
SIGNAL = 0
NOISE = 1
PRIOR = 2

_MAX_SEED = 2**64 - 1


def validate_seed(seed: int) -> int:
    if not isinstance(seed, (int, np.integer)):
        raise ValueError(f"seed must be an integer, got {type(seed).__name__}")
    if not 0 <= int(seed) <= _MAX_SEED:
        raise ValueError(f"seed must fit in an unsigned 64-bit integer, got {seed}")
    return int(seed)


def stream(seed: int, path_index: int, series: int) -> np.random.Generator:
    """Generator for one (seed, path_index, series) stream."""
    if path_index < 0:
        raise ValueError(f"path_index must be nonnegative, got {path_index}")
    counter = np.array([0, path_index, series, 0], dtype=np.uint64)
    key = np.array([validate_seed(seed), 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def normal_block(seed: int, series: int, path_indices: range, n: int) -> np.ndarray:
    """Matrix of standard normals, row r from stream (seed, path_indices[r], series)."""
    out = np.empty((len(path_indices), n))
    for r, p in enumerate(path_indices):
        out[r] = stream(seed, p, series).standard_normal(n)
    return out
