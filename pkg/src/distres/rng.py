"""Seed derivation for Monte Carlo episodes.

Every episode owns its random streams; nothing is drawn from a global
generator. Seeds are derived with the SplitMix64 finalizer:

    episode_seed = splitmix64(base_seed XOR episode_index)
    stream_seed  = splitmix64(episode_seed XOR STREAM_TAG)

and each stream is a ``numpy.random.Generator`` over PCG64 seeded with the
derived 64-bit value. Because the derivation depends only on
``(base_seed, index)``, results do not depend on how episodes are scheduled
across workers.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

# fixed substream tags (ASCII "FAIL", "REPR", "FLOD", "PICK")
TAG_FAILURES = 0x4641494C
TAG_REPAIR = 0x52455052
TAG_FLOOD = 0x464C4F44
TAG_POLICY = 0x5049434B


def splitmix64(x):
    """SplitMix64 step: add the golden gamma, then avalanche."""
    z = (int(x) + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def episode_seed(base_seed, index):
    return splitmix64((int(base_seed) & MASK64) ^ int(index))


def stream(seed, tag):
    """Independent generator for one purpose inside one episode."""
    return np.random.Generator(np.random.PCG64(splitmix64((int(seed) & MASK64) ^ tag)))


def episode_streams(seed):
    return {
        "failures": stream(seed, TAG_FAILURES),
        "repair": stream(seed, TAG_REPAIR),
        "flood": stream(seed, TAG_FLOOD),
        "policy": stream(seed, TAG_POLICY),
    }
