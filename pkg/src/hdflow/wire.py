"""Coordinate-based motion MLP with complex Gabor wavelet activations.

The network represents a time-varying flow v(x, y, t) as a continuous
function of normalized coordinates in [-1, 1]^3.  Hidden layers carry a
complex signal stored as a real pair; each layer applies a complex-weighted
affine map followed by the Gabor activation exp(j w0 z) exp(-|s0 z|^2).
The frequency parameter w0 follows a coarse-to-fine schedule: a linear ramp
from 1.0 to 1.5 over the early epochs, after which it becomes trainable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ad import Tape, Var, ops

COORD_TOLERANCE = 1e-6


class CoordinateError(ValueError):
    """Raised when input coordinates fall outside the normalized cube."""


@dataclass(frozen=True)
class WireConfig:
    layers: int = 6          # total affine layers; layers - 2 are hidden
    hidden: int = 64
    in_dim: int = 3
    out_dim: int = 2
    omega_start: float = 1.0
    omega_end: float = 1.5
    ramp_end: int = 30000
    s0: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.layers < 2:
            raise ValueError("at least an input and an output layer are required")
        if self.omega_end < self.omega_start:
            raise ValueError("the frequency schedule must be nondecreasing")
        if self.ramp_end < 0:
            raise ValueError("ramp_end must be nonnegative")


@dataclass
class MotionMLP:
    """Layer parameters plus the activation scalars omega and s0.

    Complex weights are stored as real pairs: layer m has W{m}.re, W{m}.im,
    b{m}.re, b{m}.im.  The first layer maps real coordinates; the last maps
    to the real output and uses only the real parts of the complex signal's
    linear image, matching a complex-to-real readout.
    """

    config: WireConfig
    params: dict[str, np.ndarray]

    def __post_init__(self):
        expected = wire_parameter_shapes(self.config)
        if set(self.params) != set(expected):
            raise ValueError("parameter names do not match the configuration")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ValueError(f"parameter {name} has shape "
                                 f"{self.params[name].shape}, expected {shape}")


def wire_parameter_shapes(config: WireConfig) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    dims = ([config.in_dim] + [config.hidden] * (config.layers - 1)
            + [config.out_dim])
    for m in range(config.layers):
        din, dout = dims[m], dims[m + 1]
        shapes[f"W{m}.re"] = (din, dout)
        shapes[f"W{m}.im"] = (din, dout)
        shapes[f"b{m}.re"] = (dout,)
        shapes[f"b{m}.im"] = (dout,)
    shapes["omega"] = ()
    shapes["s0"] = ()
    return shapes


def init_wire(config: WireConfig) -> MotionMLP:
    """SIREN-style uniform init scaled by 1/(omega * fan_in) on hidden layers."""
    rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in wire_parameter_shapes(config).items():
        if name == "omega":
            params[name] = np.asarray(config.omega_start, dtype=np.float64)
        elif name == "s0":
            params[name] = np.asarray(config.s0, dtype=np.float64)
        elif name.startswith("b"):
            params[name] = np.zeros(shape)
        else:
            fan_in = shape[0]
            first = name.startswith("W0")
            bound = 1.0 / fan_in if first else \
                np.sqrt(6.0 / fan_in) / max(config.omega_end, 1.0)
            params[name] = rng.uniform(-bound, bound, size=shape)
    return MotionMLP(config, params)


def omega_schedule(epoch: int, config: WireConfig) -> float | str:
    """The coarse-to-fine frequency: a linear ramp, then 'learnable'."""
    if epoch < 0:
        raise ValueError(f"epoch must be nonnegative, got {epoch}")
    if config.ramp_end == 0 or epoch >= config.ramp_end:
        return "learnable"
    t = epoch / config.ramp_end
    return config.omega_start + t * (config.omega_end - config.omega_start)


def _check_coords(coords: np.ndarray, in_dim: int) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != in_dim:
        raise CoordinateError(
            f"coords must have shape (batch, {in_dim}), got {coords.shape}")
    if np.max(np.abs(coords), initial=0.0) > 1.0 + COORD_TOLERANCE:
        worst = float(np.max(np.abs(coords)))
        raise CoordinateError(
            f"coordinates must be normalized to [-1, 1], max abs {worst}")
    return coords


def wire_apply(pv: dict[str, Var], coords: Var, config: WireConfig,
               omega: float | None = None) -> Var:
    """Differentiable forward pass on an existing tape.

    omega overrides the stored parameter during the ramp phase; None uses the
    (trainable) parameter Var.
    """
    om: Var | float = pv["omega"] if omega is None else float(omega)
    s0 = pv["s0"]
    re, im = coords, None
    for m in range(config.layers):
        zr = ops.add(ops.matmul(re, pv[f"W{m}.re"]), pv[f"b{m}.re"])
        zi = ops.add(ops.matmul(re, pv[f"W{m}.im"]), pv[f"b{m}.im"])
        if im is not None:
            zr = ops.sub(zr, ops.matmul(im, pv[f"W{m}.im"]))
            zi = ops.add(zi, ops.matmul(im, pv[f"W{m}.re"]))
        if m == config.layers - 1:
            return zr
        re, im = ops.gabor_activation(zr, zi, om, s0)
    raise AssertionError("unreachable")


def wire_forward(mlp: MotionMLP, coords, omega: float | None = None
                 ) -> np.ndarray:
    """Evaluate the represented flow at a batch of (x, y, t) coordinates."""
    coords = _check_coords(coords, mlp.config.in_dim)
    tape = Tape()
    pv = {name: tape.var(p) for name, p in mlp.params.items()}
    out = wire_apply(pv, tape.var(coords), mlp.config, omega)
    tape.release()
    return out.values


def frame_coords(height: int, width: int, t_index: int, n_frames: int
                 ) -> np.ndarray:
    """Normalized (x, y, t) coordinates for every pixel of one frame."""
    xs = 2.0 * np.arange(width) / width - 1.0
    ys = 2.0 * np.arange(height) / height - 1.0
    t = -1.0 if n_frames <= 1 else 2.0 * t_index / (n_frames - 1) - 1.0
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, t)], axis=1)
