"""Counter-based random streams.

Every consumer of randomness asks for its own stream keyed by ``(seed, *stream_ids)``.
Streams are Philox generators, so two streams never share state and a given key
produces the same draws on every platform numpy supports.
"""
import numpy as np

# stream ids
DATA = 0
INIT = 1
TRAIN = 2
EVAL = 3
NDB = 4
BOUNDS = 5
EMBED = 6
PROP = 7


def rng_stream(seed, *stream_ids):
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(s) for s in stream_ids))
    return np.random.Generator(np.random.Philox(ss))
