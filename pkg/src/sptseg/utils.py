"""Small shared helpers (seeded RNG substreams, hashing)."""

import hashlib
import zlib

import numpy as np


def substream(seed, *names):
    """Deterministic, named RNG substream derived from a single root seed.

    Every component draws from its own stream so that adding or removing one
    component never shifts the randomness seen by the others.
    """
    entropy = (int(seed),) + tuple(zlib.crc32(n.encode("utf-8")) for n in names)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def tensor_table_hash(named):
    """SHA-256 over (name, bytes) pairs in sorted name order."""
    h = hashlib.sha256()
    for name in sorted(named):
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(named[name].data).tobytes())
    return h.hexdigest()
