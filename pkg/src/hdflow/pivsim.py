"""Synthetic particle-image sequences for benchmarking flow reconstruction.

Tracer particles are seeded uniformly, rendered as Gaussian splats with
periodic wrap, and advected through a prescribed flow by sampling the flow at
each particle position.  Re-rendering after each advection step produces an
image sequence whose ground-truth motion is known exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import ScalarField, VectorField

BRIGHTNESS_MEAN = 1.0
BRIGHTNESS_STD = float(np.sqrt(0.2))
SIGMA_RANGE = (0.5, 1.0)
# splat support in units of sigma; exp(-0.5 * 6^2) ~ 1.5e-8 per tail
_SPLAT_EXTENT = 6.0


@dataclass
class ParticleCloud:
    """Tracer ensemble: positions in grid units, per-particle brightness
    and Gaussian radius sigma in pixels."""

    x: np.ndarray
    y: np.ndarray
    brightness: np.ndarray
    sigma: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        n = len(self.x)
        for name in ("y", "brightness", "sigma"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length does not match positions")
        if not (np.all(np.isfinite(self.brightness))
                and np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError("particle attributes must be finite")

    @property
    def count(self) -> int:
        return len(self.x)


def seed_particles(count: int = 10000, height: int = 64, width: int = 64,
                   seed: int = 0) -> ParticleCloud:
    """Uniform positions; brightness normal(1, var 0.2) clamped at zero;
    per-particle sigma uniform in [0.5, 1.0] pixels."""
    if count <= 0:
        raise ValueError(f"count must be positive, got {count}")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, width, size=count)
    y = rng.uniform(0.0, height, size=count)
    brightness = np.maximum(rng.normal(BRIGHTNESS_MEAN, BRIGHTNESS_STD,
                                       size=count), 0.0)
    sigma = rng.uniform(*SIGMA_RANGE, size=count)
    return ParticleCloud(x, y, brightness, sigma, height, width)


def render(cloud: ParticleCloud) -> ScalarField:
    """Sum of periodic isotropic Gaussian splats, unclipped intensities."""
    h, w = cloud.height, cloud.width
    image = np.zeros((h, w))
    for px, py, b, s in zip(cloud.x, cloud.y, cloud.brightness, cloud.sigma):
        if b == 0.0:
            continue
        r = int(np.ceil(_SPLAT_EXTENT * s))
        j0 = int(np.floor(px))
        i0 = int(np.floor(py))
        jj = np.arange(j0 - r, j0 + r + 1)
        ii = np.arange(i0 - r, i0 + r + 1)
        gx = np.exp(-0.5 * ((jj - px) / s) ** 2)
        gy = np.exp(-0.5 * ((ii - py) / s) ** 2)
        patch = b * np.outer(gy, gx)
        np.add.at(image, (np.ix_(ii % h, jj % w)), patch)
    return ScalarField(image)


def _sample_flow(v: VectorField, x: np.ndarray, y: np.ndarray
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear flow lookup at particle positions, periodic wrap."""
    h, w = v.shape
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    fx = x - x0
    fy = y - y0
    x0 %= w
    y0 %= h
    x1 = (x0 + 1) % w
    y1 = (y0 + 1) % h

    def lerp(a):
        return ((1 - fx) * (1 - fy) * a[y0, x0] + fx * (1 - fy) * a[y0, x1]
                + (1 - fx) * fy * a[y1, x0] + fx * fy * a[y1, x1])

    return lerp(v.u), lerp(v.w)


def advect_cloud(cloud: ParticleCloud, v: VectorField) -> ParticleCloud:
    """Move each particle by the flow at its position (one frame step)."""
    if v.shape != (cloud.height, cloud.width):
        raise ValueError(f"flow shape {v.shape} does not match cloud grid "
                         f"{(cloud.height, cloud.width)}")
    du, dw = _sample_flow(v, cloud.x, cloud.y)
    return ParticleCloud((cloud.x + du) % cloud.width,
                         (cloud.y + dw) % cloud.height,
                         cloud.brightness, cloud.sigma,
                         cloud.height, cloud.width)


def advect_sequence(cloud: ParticleCloud, flows, frames: int
                    ) -> list[ScalarField]:
    """Render `frames` images, advecting the cloud between frames.

    flows may be a single VectorField (reused every step, the default for the
    time-independent synthesis flows) or a list of per-step fields.
    """
    if frames < 1:
        raise ValueError(f"frames must be >= 1, got {frames}")
    if isinstance(flows, VectorField):
        flows = [flows] * (frames - 1)
    if len(flows) < frames - 1:
        raise ValueError(f"need {frames - 1} flow steps, got {len(flows)}")
    images = [render(cloud)]
    for k in range(frames - 1):
        cloud = advect_cloud(cloud, flows[k])
        images.append(render(cloud))
    return images
