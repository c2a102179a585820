"""Deterministic randomness.

Two layers:

* A stateless counter-based generator (splitmix64 over a mixed key) used by
  the simulator. Every draw is a pure function of (seed, tick, stream, call),
  so parallel rollouts replay identically regardless of scheduling.
* Named substreams for the pipeline stages (world / corpus / training / eval),
  derived from the single global seed via SHA-256, yielding independent
  ``numpy.random.Generator`` objects. No ambient RNG anywhere.
"""

import hashlib

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def _mix(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def counter_u64(seed: int, tick: int, stream: int, call: int = 0) -> int:
    """64-bit hash of the (seed, tick, stream, call) counter tuple."""
    z = seed & _MASK
    for part in (tick, stream, call):
        z = _mix((z + _GAMMA) ^ (part & _MASK))
    return _mix(z + _GAMMA)


def counter_uniform(seed: int, tick: int, stream: int, call: int = 0) -> float:
    """Uniform float in [0, 1) from the counter tuple (53-bit resolution)."""
    return (counter_u64(seed, tick, stream, call) >> 11) * (1.0 / (1 << 53))


def counter_randint(seed: int, tick: int, stream: int, call: int, n: int) -> int:
    """Uniform integer in [0, n) from the counter tuple."""
    if n <= 0:
        raise ValueError("n must be positive")
    return counter_u64(seed, tick, stream, call) % n


def substream_seed(global_seed: int, name: str) -> int:
    """64-bit seed for the named substream, stable across runs and platforms."""
    h = hashlib.sha256(f"{global_seed & _MASK}:{name}".encode()).digest()
    return int.from_bytes(h[:8], "little")


def substream(global_seed: int, name: str) -> np.random.Generator:
    """Independent Philox generator for the named pipeline stage."""
    return np.random.Generator(np.random.Philox(key=substream_seed(global_seed, name)))
