"""Portable deterministic RNG for the sampling decoders.

SplitMix64: the state advances by the 64-bit golden-ratio constant and is
mixed through two xor-shift-multiply rounds (constants 0xBF58476D1CE4E5B9 and
0x94D049BB133111EB).  Pure integer arithmetic, so streams are identical on
every platform; float draws take the top 53 bits.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class SplitMix64:
    __slots__ = ("_state",)

    def __init__(self, seed: int) -> None:
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float64 in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53


def derive_seed(*parts: int | str) -> int:
    """Fold ints and strings into one 64-bit seed (order-sensitive).

    FNV-1a over the byte rendering of each part, with a separator byte so
    adjacent parts cannot run together.  Used to give every (seed, prompt,
    sample, strategy) combination its own independent stream.
    """
    h = _FNV_OFFSET
    for part in parts:
        if isinstance(part, bool) or not isinstance(part, (int, str)):
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        data = part.encode("utf-8") if isinstance(part, str) else (part & _MASK).to_bytes(8, "little")
        for b in data:
            h = ((h ^ b) * _FNV_PRIME) & _MASK
        h = ((h ^ 0x1F) * _FNV_PRIME) & _MASK
    return h
