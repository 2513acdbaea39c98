"""Deterministic seed derivation for replicated work.

Replicate r of a seeded job uses ``mix_seed(seed, r)`` so results are
reproducible and independent of execution order or worker count.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


def mix_seed(seed: int, counter: int) -> int:
    """Derive a child seed from (seed, counter) with a splitmix64 finalizer."""
    z = (int(seed) + 0x9E3779B97F4A7C15 * (int(counter) + 1)) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK
