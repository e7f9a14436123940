"""Deterministic random streams built on a splitmix64 core.

Scene sampling and dataset generation must be reproducible bit-for-bit from a
64-bit seed, independent of platform and library versions, so this module
avoids numpy's generators entirely.  The stream is the classic splitmix64
sequence; uniforms take the top 53 bits of each output word and Gaussians are
produced by the Box-Muller transform (pairs generated together, the spare
cached).  Changing any of this changes dataset bytes, so treat the draw
discipline as a file-format contract.
"""

from __future__ import annotations

import math

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """splitmix64 finalizer: a bijective 64-bit hash with good avalanche."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """Per-sample seed for sample `index` of a stream keyed by `master_seed`.

    Defined as mix64(master_seed + GOLDEN * (index + 1)); the +1 keeps
    index 0 from collapsing onto the master seed itself.
    """
    if index < 0:
        raise ValueError(f"sample index must be >= 0, got {index}")
    return mix64((master_seed + _GOLDEN * (index + 1)) & _MASK64)


class SplitMix64:
    """Sequential splitmix64 stream with uniform and Gaussian draws."""

    __slots__ = ("_state", "_spare_normal")

    def __init__(self, seed: int):
        self._state = seed & _MASK64
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        self._state = (self._state + _GOLDEN) & _MASK64
        return mix64(self._state)

    def uniform(self) -> float:
        """Uniform in [0, 1) from the top 53 bits of one output word."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform_in(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.uniform()

    def normal(self) -> float:
        """Standard normal via Box-Muller; generates pairs, caches the spare.

        u1 is mapped to (0, 1] so log(u1) is always finite.
        """
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53
        u2 = (self.next_u64() >> 11) * 2.0**-53
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)

    def complex_normal(self, variance: float) -> complex:
        """Circularly symmetric complex Gaussian with E|z|^2 = variance."""
        s = math.sqrt(variance / 2.0)
        re = self.normal()
        im = self.normal()
        return complex(s * re, s * im)
