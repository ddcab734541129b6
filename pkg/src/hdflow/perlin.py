"""Deterministic gradient-lattice Perlin noise and multi-octave turbulence.

Lattice gradients are unit vectors at angles derived from a 64-bit integer
hash of (lattice coords, seed), so every field is a pure function of its
arguments and reproducible across platforms.  The lattice wraps periodically,
which makes the noise (and everything synthesized from it) seamless on the
periodic grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# golden-ratio increment; also used to split octave seeds
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


_MASK64 = (1 << 64) - 1


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """Finalizer of the splitmix64 generator; uniform avalanche over uint64."""
    # 0-d inputs go through as 1-element arrays: numpy only wraps silently
    # (no overflow warning) for proper arrays
    x = np.atleast_1d(np.asarray(x, dtype=np.uint64)) + _GOLDEN
    x ^= x >> np.uint64(30)
    x *= _MIX1
    x ^= x >> np.uint64(27)
    x *= _MIX2
    x ^= x >> np.uint64(31)
    return x


def split_seed(base_seed: int, index: int) -> int:
    """Derive an independent child seed; children of distinct indices decorrelate."""
    return int(_splitmix64((base_seed ^ (index * int(_GOLDEN))) & _MASK64)[0])


def octave_seed(base_seed: int, n: int) -> int:
    """Per-octave seed rule: base_seed XOR (n * golden-ratio constant)."""
    return (base_seed ^ (n * int(_GOLDEN))) & _MASK64


@dataclass(frozen=True)
class PerlinSpec:
    """Parameters for a multi-octave turbulence field."""

    n_min: int
    n_max: int
    base_seed: int
    height: int
    width: int

    def __post_init__(self):
        if not (1 <= self.n_min <= self.n_max <= 8):
            raise ValueError(f"octave range must satisfy 1 <= n_min <= n_max <= 8, "
                             f"got [{self.n_min}, {self.n_max}]")
        if 2 ** self.n_max > min(self.width, self.height):
            raise ValueError(f"lattice 2^{self.n_max} exceeds grid "
                             f"{self.width}x{self.height}")

    @property
    def octaves(self) -> range:
        return range(self.n_min, self.n_max + 1)


def _lattice_angles(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    key = (iy.astype(np.uint64) << np.uint64(32)) | ix.astype(np.uint64)
    h = _splitmix64(key ^ np.uint64(seed))
    return h.astype(np.float64) * (2.0 * np.pi / 2.0 ** 64)


def _fade(t: np.ndarray) -> np.ndarray:
    # quintic smoothstep: zero first and second derivative at the cell faces
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def perlin_eval(xx: np.ndarray, yy: np.ndarray, cells: int, seed: int) -> np.ndarray:
    """Evaluate the periodic lattice noise at arbitrary lattice-unit coordinates.

    The underlying function has period ``cells`` in both directions.
    """
    ix0 = np.floor(xx).astype(np.int64)
    iy0 = np.floor(yy).astype(np.int64)
    fx = xx - np.floor(xx)
    fy = yy - np.floor(yy)
    wrap = cells - 1  # cells is a power of two

    # the lattice is tiny compared to the grid: tabulate node gradients once
    # and gather, instead of hashing every sample point four times
    node_x, node_y = np.meshgrid(np.arange(cells, dtype=np.uint64),
                                 np.arange(cells, dtype=np.uint64))
    ang = _lattice_angles(node_x, node_y, seed)
    gx, gy = np.cos(ang), np.sin(ang)

    u, v = _fade(fx), _fade(fy)
    dots = {}
    for cx in (0, 1):
        for cy in (0, 1):
            jx = (ix0 + cx) & wrap
            jy = (iy0 + cy) & wrap
            dots[cx, cy] = gx[jy, jx] * (fx - cx) + gy[jy, jx] * (fy - cy)
    top = dots[0, 0] + u * (dots[1, 0] - dots[0, 0])
    bot = dots[0, 1] + u * (dots[1, 1] - dots[0, 1])
    return top + v * (bot - top)


def perlin_layer(n: int, seed: int, height: int, width: int,
                 spacing: float | None = None):
    """Classic periodic Perlin noise on a 2^n x 2^n gradient lattice.

    Values vanish at lattice nodes and are bounded by sqrt(2)/2 < 1.
    """
    from .fields import ScalarField

    cells = 2 ** n
    if cells > min(width, height):
        raise ValueError(f"lattice 2^{n} finer than grid {width}x{height}")

    x = np.arange(width) * (cells / width)
    y = np.arange(height) * (cells / height)
    xx, yy = np.meshgrid(x, y)
    return ScalarField(perlin_eval(xx, yy, cells, seed), spacing)


def turbulence(spec: PerlinSpec, spacing: float | None = None):
    """Octave sum of Perlin layers with amplitude halving per octave."""
    from .fields import ScalarField

    total = np.zeros((spec.height, spec.width))
    for n in spec.octaves:
        layer = perlin_layer(n, octave_seed(spec.base_seed, n),
                             spec.height, spec.width)
        total += layer.data / 2.0 ** n
    return ScalarField(total, spacing)
