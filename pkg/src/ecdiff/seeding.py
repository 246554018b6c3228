"""Named random substreams derived from one global seed.

Every component that needs randomness gets its own stream keyed by a stable
name ("data", "train-implicit", ...), so reruns of any single stage are
reproducible without replaying the stages before it.
"""

import zlib

import numpy as np


def substream_seed(global_seed: int, name: str) -> int:
    """Stable derived integer seed for the named stream."""
    seq = np.random.SeedSequence(global_seed, spawn_key=(zlib.crc32(name.encode("utf-8")),))
    return int(seq.generate_state(1)[0])


def substream(global_seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(substream_seed(global_seed, name))
