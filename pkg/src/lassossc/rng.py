"""Deterministic, counter-based random number generation.

Every randomized routine in the package draws from a :class:`Stream`, which is
a pure function of a 64-bit seed and a draw counter.  Child streams are derived
by hashing ``(seed, stream_id)``, so parallel workers reproduce the exact same
numbers no matter how work is scheduled.  The generator is SplitMix64 in
counter mode (Weyl increment + avalanche finalizer) with Box-Muller for
normals; the whole construction is documented here so it can be re-created
bit-for-bit outside this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1
_WEYL = 0x9E3779B97F4A7C15
_MULT_A = 0xBF58476D1CE4E5B9
_MULT_B = 0x94D049BB133111EB
_STR_TAG = 0xA5A5A5A55A5A5A5A

PathPart = int | str


def mix64(z: int) -> int:
    """SplitMix64 avalanche finalizer on a 64-bit integer."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MULT_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MULT_B) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(seed: int, path: tuple[PathPart, ...]) -> int:
    """Hash a parent seed and a derivation path into a child seed.

    Path components may be integers (column index, grid-cell index, restart
    number, ...) or short strings naming the purpose of the stream.
    """
    h = mix64(seed & _MASK64)
    for part in path:
        if isinstance(part, str):
            h = mix64(h ^ _STR_TAG)
            for byte in part.encode("utf-8"):
                h = mix64((h + _WEYL) ^ byte)
        elif isinstance(part, (int, np.integer)):
            h = mix64((h + _WEYL) ^ (int(part) & _MASK64))
        else:
            raise TypeError(f"stream id parts must be int or str, got {type(part)!r}")
    return h


@dataclass(frozen=True)
class RngSpec:
    """Value identifying one reproducible random stream.

    Identical ``(master_seed, stream_id)`` pairs reproduce identical draws,
    bit for bit, independent of platform or execution order.
    """

    master_seed: int
    stream_id: tuple[PathPart, ...] = field(default_factory=tuple)

    def child(self, *path: PathPart) -> "RngSpec":
        return RngSpec(self.master_seed, self.stream_id + tuple(path))

    @property
    def seed(self) -> int:
        return derive_seed(self.master_seed & _MASK64, self.stream_id)


class Stream:
    """Sequential view over the counter-based generator for one RngSpec.

    The k-th 64-bit word of the stream is ``mix64(seed + (k+1) * WEYL)``;
    the object only tracks how many words have been consumed.
    """

    def __init__(self, spec: RngSpec | int):
        if isinstance(spec, RngSpec):
            self._seed = spec.seed
        else:
            self._seed = int(spec) & _MASK64
        self._counter = 0

    def spawn(self, *path: PathPart) -> "Stream":
        """Child stream independent of this stream's consumption state."""
        return Stream(derive_seed(self._seed, tuple(path)))

    def _words(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        z = self._seed + idx * np.uint64(_WEYL)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MULT_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MULT_B)
        return z ^ (z >> np.uint64(31))

    def uniforms(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1), from the top 53 bits of each word."""
        return (self._words(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        """n standard normals via Box-Muller; consumes 2*ceil(n/2) words."""
        m = (n + 1) // 2
        # u1 in (0, 1] so the log is finite
        u1 = ((self._words(m) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = self.uniforms(m)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:n]

    def normal_matrix(self, rows: int, cols: int) -> np.ndarray:
        return self.normals(rows * cols).reshape(rows, cols)

    def unit_vector(self, dim: int) -> np.ndarray:
        """One point uniform on the (dim-1)-sphere."""
        g = self.normals(dim)
        return g / np.linalg.norm(g)

    def unit_vectors(self, dim: int, count: int) -> np.ndarray:
        """dim x count matrix of independent uniform sphere points."""
        g = self.normal_matrix(dim, count)
        return g / np.linalg.norm(g, axis=0, keepdims=True)

    def integers(self, n: int, bound: int) -> np.ndarray:
        """n integers uniform on [0, bound); floor-of-uniform construction."""
        return np.minimum((self.uniforms(n) * bound).astype(np.int64), bound - 1)

    def choice_weighted(self, weights: np.ndarray) -> int:
        """Index drawn proportionally to the nonnegative weights."""
        total = float(np.sum(weights))
        if total <= 0.0:
            return int(self.integers(1, len(weights))[0])
        u = float(self.uniforms(1)[0]) * total
        return int(min(np.searchsorted(np.cumsum(weights), u, side="right"), len(weights) - 1))
