"""Counter-based seed splitting.

A root seed plus a tuple of integer keys (cell, trial index, stream...) maps to
an independent generator. The mapping does not depend on how many other keys
were drawn or in which order, so sweeps replay bit-for-bit under any worker
count.
"""

import numpy as np

# Stream keys used inside one trial.
STREAM_FILTER = 0
STREAM_MASK = 1
STREAM_SIGNAL = 2
STREAM_SUPPORT = 3


def derive_sequence(root_seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=tuple(int(k) for k in keys))


def derive_seed(root_seed: int, *keys: int) -> int:
    """Return a 64-bit integer seed for ``keys`` under ``root_seed``."""
    state = derive_sequence(root_seed, *keys).generate_state(1, dtype=np.uint64)
    return int(state[0])


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_sequence(seed, *keys))


def block_sizes(trials: int, block: int) -> list[int]:
    """Split ``trials`` into fixed-size blocks; the last block takes the remainder."""
    full, rest = divmod(trials, block)
    return [block] * full + ([rest] if rest else [])
