"""Deterministic random streams keyed by ``(seed, label)``."""

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def stream(seed: int, *labels) -> np.random.Generator:
    """Independent generator for ``seed`` and any number of labels.

    Labels may be strings or non-negative integers (e.g. a replication index);
    equal arguments always give bit-identical streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(x) for x in labels))
    return np.random.Generator(np.random.PCG64(ss))
