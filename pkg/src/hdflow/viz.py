"""PNG export of fields: flow color wheel, signed colormap, grayscale.

Flow rendering follows the optical-flow convention: hue encodes direction,
saturation encodes magnitude normalized per image.  The normalization
constant is returned so images remain comparable when stated side by side.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .fields import ScalarField, VectorField


def _hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Vectorized HSV to RGB, all components in [0, 1]."""
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    rgb = np.zeros(h.shape + (3,))
    for idx, (r, g, b) in enumerate([(v, t, p), (q, v, p), (p, v, t),
                                     (p, q, v), (t, p, v), (v, p, q)]):
        mask = i == idx
        rgb[mask, 0] = r[mask]
        rgb[mask, 1] = g[mask]
        rgb[mask, 2] = b[mask]
    return rgb


def flow_to_rgb(v: VectorField, max_magnitude: float | None = None
                ) -> tuple[np.ndarray, float]:
    """Direction-as-hue rendering; returns (H,W,3) uint8 and the
    normalization constant (max magnitude unless supplied)."""
    mag = np.hypot(v.u, v.w)
    if max_magnitude is None:
        max_magnitude = float(np.max(mag))
    norm = max_magnitude if max_magnitude > 0 else 1.0
    hue = (np.arctan2(-v.w, -v.u) / np.pi + 1.0) / 2.0
    sat = np.clip(mag / norm, 0.0, 1.0)
    rgb = _hsv_to_rgb(hue, sat, np.ones_like(sat))
    return (rgb * 255.0 + 0.5).astype(np.uint8), float(max_magnitude)


def scalar_to_signed_rgb(field: ScalarField, limit: float | None = None
                         ) -> tuple[np.ndarray, float]:
    """Blue-white-red map for signed quantities, symmetric about zero."""
    data = field.data
    if limit is None:
        limit = float(np.max(np.abs(data)))
    norm = limit if limit > 0 else 1.0
    t = np.clip(data / norm, -1.0, 1.0)
    rgb = np.ones(data.shape + (3,))
    pos = t > 0
    rgb[..., 1] -= np.abs(t)
    rgb[..., 2] -= np.where(pos, t, 0.0)
    rgb[..., 0] -= np.where(pos, 0.0, -t)
    return (rgb * 255.0 + 0.5).astype(np.uint8), float(limit)


def scalar_to_gray(field: ScalarField, vmin: float | None = None,
                   vmax: float | None = None) -> np.ndarray:
    """Linear grayscale with per-image range unless bounds are given."""
    data = field.data
    lo = float(np.min(data)) if vmin is None else vmin
    hi = float(np.max(data)) if vmax is None else vmax
    span = hi - lo if hi > lo else 1.0
    t = np.clip((data - lo) / span, 0.0, 1.0)
    return (t * 255.0 + 0.5).astype(np.uint8)


def save_png(path, array: np.ndarray) -> None:
    """Write a (H,W) gray or (H,W,3) RGB uint8 array as PNG."""
    Image.fromarray(array).save(path)


def export_flow_png(path, v: VectorField) -> float:
    rgb, norm = flow_to_rgb(v)
    save_png(path, rgb)
    return norm


def export_signed_png(path, field: ScalarField) -> float:
    rgb, limit = scalar_to_signed_rgb(field)
    save_png(path, rgb)
    return limit


def export_gray_png(path, field: ScalarField) -> None:
    save_png(path, scalar_to_gray(field))
