"""Named sub-seeds derived from one root seed."""
import zlib

import numpy as np


def subseed(root: int, name: str) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(root) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])


def rng_for(root: int, name: str) -> np.random.Generator:
    """Independent generator for stream ``name`` under ``root``."""
    return np.random.default_rng(subseed(root, name))
