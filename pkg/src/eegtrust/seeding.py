"""Counter-based seed expansion.

Every random stream is derived from one root seed plus a key path such as
``(subject_index, fold_index, "shuffle")``, so any subset of the work can be
reproduced in isolation.  String keys are folded to integers with CRC32.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("seed keys must be non-negative")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def seed_sequence(root_seed, *keys):
    return np.random.SeedSequence([_key_to_int(root_seed), *(_key_to_int(k) for k in keys)])


def derive_rng(root_seed, *keys):
    return np.random.default_rng(seed_sequence(root_seed, *keys))


def derive_seed(root_seed, *keys):
    """A 32-bit integer seed for APIs that want a plain int."""
    return int(seed_sequence(root_seed, *keys).generate_state(1)[0])
