"""
Seed derivation helpers
"""

import hashlib
from typing import Union

import numpy as np


SEED_BITS = 63


def derive_seed(master_seed: int, tag: str, index: int = 0) -> int:
    """Derive an independent seed from (master seed, tag, index)"""
    digest = hashlib.blake2b(f"{master_seed}:{tag}:{index}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & ((1 << SEED_BITS) - 1)


def make_rng(seed: Union[int, np.random.Generator]) -> np.random.Generator:
    """Return a PCG64 generator for a seed, passing generators through"""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def rng_seed(rng: np.random.Generator) -> int:
    """Draw a 31-bit seed for estimators that take an int random_state"""
    return int(rng.integers(0, 2**31 - 1))
