"""Deterministic seed derivation from (run seed, key...) tuples."""
import zlib
from typing import Union

import numpy as np

Key = Union[int, str]


def _entropy(keys) -> list:
    # SeedSequence only takes non-negative ints
    out = []
    for key in keys:
        if isinstance(key, str):
            out.append(zlib.crc32(key.encode("utf-8")))
        else:
            out.append(int(key) & 0xFFFFFFFFFFFFFFFF)
    return out


def derive_seed(*keys: Key) -> int:
    """32-bit seed for libraries that take an int random_state"""
    return int(np.random.SeedSequence(_entropy(keys)).generate_state(1)[0])


def query_rng(*keys: Key) -> np.random.Generator:
    """Independent generator for a key tuple, e.g. (run_seed, query_index)"""
    return np.random.default_rng(np.random.SeedSequence(_entropy(keys)))
