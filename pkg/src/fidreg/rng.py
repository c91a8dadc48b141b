"""Deterministic scene RNG with a pinned, portable algorithm.

Synthetic scenes must reproduce bit-exactly across platforms and across ports
to other languages, so the generator is part of the public contract rather
than an implementation detail. Everything below is fixed:

Raw stream (splitmix64, counter form). Output ``i`` (1-based) is
``mix(seed + i * 0x9E3779B97F4A7C15)`` in 64-bit wrapping arithmetic, where
``mix`` is the splitmix64 finalizer::

    z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
    z ^= z >> 27;  z *= 0x94D049BB133111EB
    z ^= z >> 31

Derived draws, each consuming raw outputs in order:

* ``uniform``: one raw ``r``; value ``(r >> 11) * 2**-53`` in ``[0, 1)``.
* ``normal``: two raws; ``u1 = ((r1 >> 11) + 1) * 2**-53`` in ``(0, 1]``,
  ``u2 = (r2 >> 11) * 2**-53``; value ``sqrt(-2 ln u1) * cos(2 pi u2)``
  (Box-Muller, cosine branch only — the sine mate is discarded).
* ``integer(n)``: one uniform ``u``; value ``min(floor(u * n), n - 1)``.
* ``shuffle``: Fisher-Yates, ``for i = len-1 .. 1: j = integer(i + 1); swap``.

The seed-0 raw stream starts ``0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, ...``
(the published splitmix64 reference vector); tests pin it.
"""

from __future__ import annotations

import numpy as np

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0**-53


class SplitMix64:
    """Counter-based 64-bit generator (see module docstring for the contract)."""

    __slots__ = ("seed", "_count")

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._count = 0

    def raw(self, n: int) -> np.ndarray:
        """Next ``n`` raw 64-bit outputs as a uint64 array."""
        if n < 0:
            raise ValueError("n must be non-negative")
        start = self._count + 1
        self._count += n
        with np.errstate(over="ignore"):
            idx = np.arange(start, start + n, dtype=np.uint64)
            z = (np.uint64(self.seed) + idx * _GAMMA) & _MASK
            z ^= z >> np.uint64(30)
            z *= _MIX1
            z ^= z >> np.uint64(27)
            z *= _MIX2
            z ^= z >> np.uint64(31)
        return z

    def uniforms(self, n: int) -> np.ndarray:
        """``n`` doubles uniform in [0, 1)."""
        return (self.raw(n) >> np.uint64(11)).astype(np.float64) * _U53

    def normals(self, n: int) -> np.ndarray:
        """``n`` standard normal doubles (Box-Muller, cosine branch)."""
        r = self.raw(2 * n).reshape(n, 2) >> np.uint64(11)
        u1 = (r[:, 0].astype(np.float64) + 1.0) * _U53
        u2 = r[:, 1].astype(np.float64) * _U53
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def integer(self, bound: int) -> int:
        """Uniform integer in [0, bound)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        u = float(self.uniforms(1)[0])
        return min(int(u * bound), bound - 1)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.integer(i + 1)
            items[i], items[j] = items[j], items[i]

    def rotation(self) -> np.ndarray:
        """Uniformly random proper rotation matrix (quaternion of 4 normals)."""
        while True:
            q = self.normals(4)
            norm = float(np.linalg.norm(q))
            if norm > 1e-12:
                return rotation_from_quaternion(q / norm)


def rotation_from_quaternion(q: np.ndarray) -> np.ndarray:
    """3x3 rotation matrix from a unit quaternion (w, x, y, z)."""
    w, x, y, z = (float(c) for c in q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )
