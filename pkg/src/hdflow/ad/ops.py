"""Differentiable operations registered on a Tape.

Every function takes Vars (or lifts constants), computes the forward value
with numpy, and records a closure implementing the exact vector-Jacobian
product.  Linear field operators (stencils, spectral projections) use their
adjoints: the central difference is skew-adjoint and the Helmholtz projectors
are self-adjoint on the periodic grid.
"""

from __future__ import annotations

import numpy as np

from ..fields import ScalarField, VectorField
from ..fields import ddx as _ddx_raw
from ..fields import ddy as _ddy_raw
from ..poisson import _solve_spectral
from .engine import ShapeError, Tape, Var


def _tape_of(*args) -> Tape:
    for a in args:
        if isinstance(a, Var):
            return a.tape
    raise TypeError("at least one argument must be a Var")


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# -- elementwise and structural ops ------------------------------------------

def add(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    out = a.values + b.values
    return tape.record(out, (a, b), lambda g: (_unbroadcast(g, a.shape),
                                               _unbroadcast(g, b.shape)))


def sub(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    out = a.values - b.values
    return tape.record(out, (a, b), lambda g: (_unbroadcast(g, a.shape),
                                               _unbroadcast(-g, b.shape)))


def scale(a: Var, c: float) -> Var:
    c = float(c)
    return a.tape.record(a.values * c, (a,), lambda g: (g * c,))


def mul(a, b) -> Var:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    out = a.values * b.values
    return tape.record(out, (a, b),
                       lambda g: (_unbroadcast(g * b.values, a.shape),
                                  _unbroadcast(g * a.values, b.shape)))


def matmul(a: Var, b: Var) -> Var:
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeError(f"matmul expects 2D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.values @ b.values
    return tape.record(out, (a, b), lambda g: (g @ b.values.T, a.values.T @ g))


def exp(a: Var) -> Var:
    out = np.exp(a.values)
    return a.tape.record(out, (a,), lambda g: (g * out,))


def sin(a: Var) -> Var:
    return a.tape.record(np.sin(a.values), (a,), lambda g: (g * np.cos(a.values),))


def cos(a: Var) -> Var:
    return a.tape.record(np.cos(a.values), (a,), lambda g: (-g * np.sin(a.values),))


def tanh(a: Var) -> Var:
    out = np.tanh(a.values)
    return a.tape.record(out, (a,), lambda g: (g * (1.0 - out ** 2),))


_GELU_C = float(np.sqrt(2.0 / np.pi))
_GELU_A = 0.044715


def gelu(a: Var) -> Var:
    """Smooth gated activation (tanh form)."""
    x = a.values
    inner = _GELU_C * (x + _GELU_A * x ** 3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def backward(g):
        dinner = _GELU_C * (1.0 + 3.0 * _GELU_A * x ** 2)
        dydx = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t ** 2) * dinner
        return (g * dydx,)

    return a.tape.record(out, (a,), backward)


def reduce_sum(a: Var) -> Var:
    out = np.asarray(a.values.sum())
    return a.tape.record(out, (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))


def reduce_mean(a: Var) -> Var:
    n = a.values.size
    out = np.asarray(a.values.mean())
    return a.tape.record(out, (a,),
                         lambda g: (np.broadcast_to(g / n, a.shape).copy(),))


def mse(a: Var, b) -> Var:
    """Mean squared difference, reduced to a scalar."""
    tape = _tape_of(a, b)
    a, b = tape.lift(a), tape.lift(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse shape mismatch: {a.shape} vs {b.shape}")
    diff = a.values - b.values
    n = diff.size
    out = np.asarray(np.mean(diff ** 2))
    return tape.record(out, (a, b),
                       lambda g: (g * 2.0 * diff / n, -g * 2.0 * diff / n))


def reshape(a: Var, shape: tuple[int, ...]) -> Var:
    out = a.values.reshape(shape)
    return a.tape.record(out, (a,), lambda g: (g.reshape(a.shape),))


def column(a: Var, j: int) -> Var:
    """Extract column j of a 2D array."""
    if a.values.ndim != 2:
        raise ShapeError(f"column expects a 2D input, got {a.shape}")
    out = a.values[:, j].copy()

    def backward(g):
        ga = np.zeros_like(a.values)
        ga[:, j] = g
        return (ga,)

    return a.tape.record(out, (a,), backward)


def index0(a: Var, i: int) -> Var:
    """Select slice i along the leading axis."""
    out = a.values[i].copy()

    def backward(g):
        ga = np.zeros_like(a.values)
        ga[i] = g
        return (ga,)

    return a.tape.record(out, (a,), backward)


def concat(parts: list[Var], axis: int = 1) -> Var:
    tape = _tape_of(*parts)
    parts = [tape.lift(p) for p in parts]
    out = np.concatenate([p.values for p in parts], axis=axis)
    sizes = [p.values.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.ascontiguousarray(piece)
                     for piece in np.split(g, splits, axis=axis))

    return tape.record(out, tuple(parts), backward)


# -- convolution and resampling ----------------------------------------------

def conv2d(x: Var, w: Var, b: Var | None = None, stride: int = 1,
           padding: str = "periodic") -> Var:
    """Same-size 2D convolution: x (N,C,H,W), w (O,C,kh,kw), odd kernels.

    padding 'periodic' wraps around the domain (the default everywhere in this
    package); 'zero' pads with zeros.  stride subsamples the output grid.
    """
    tape = _tape_of(x, w)
    x, w = tape.lift(x), tape.lift(w)
    if x.values.ndim != 4 or w.values.ndim != 4:
        raise ShapeError(f"conv2d expects 4D tensors, got {x.shape} and {w.shape}")
    n, c, h, width = x.shape
    o, cw, kh, kw = w.shape
    if c != cw:
        raise ShapeError(f"conv2d channel mismatch: input {x.shape}, kernel {w.shape}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"conv2d requires odd kernels, got {kh}x{kw}")
    if h % stride or width % stride:
        raise ShapeError(f"spatial size {h}x{width} not divisible by stride {stride}")
    if padding not in ("periodic", "zero"):
        raise ValueError(f"unknown padding {padding!r}")

    ph, pw = kh // 2, kw // 2
    mode = {"periodic": "wrap", "zero": "constant"}[padding]
    xp = np.pad(x.values, ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode=mode)
    ho, wo = h // stride, width // stride

    # im2col: one contiguous copy, then a single GEMM (BLAS-bound)
    kernel = w.values.reshape(o, c * kh * kw)
    windows = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    windows = windows[:, :, ::stride, ::stride]
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)) \
        .reshape(n * ho * wo, c * kh * kw)
    out = (cols @ kernel.T).reshape(n, ho, wo, o).transpose(0, 3, 1, 2)
    out = np.ascontiguousarray(out)
    if b is not None:
        b = tape.lift(b)
        out = out + b.values.reshape(1, o, 1, 1)

    def backward(g):
        g_flat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)) \
            .reshape(n * ho * wo, o)
        gw = (g_flat.T @ cols).reshape(w.shape)
        gcols = (g_flat @ kernel).reshape(n, ho, wo, c, kh, kw) \
            .transpose(0, 3, 1, 2, 4, 5)
        gxp = np.zeros_like(xp)
        for a in range(kh):
            for bb in range(kw):
                gxp[:, :, a:a + stride * (ho - 1) + 1:stride,
                    bb:bb + stride * (wo - 1) + 1:stride] += gcols[..., a, bb]
        if padding == "periodic":
            core = gxp[:, :, ph:ph + h, :].copy()
            if ph:
                core[:, :, :ph, :] += gxp[:, :, h + ph:, :]
                core[:, :, h - ph:, :] += gxp[:, :, :ph, :]
            gx = core[:, :, :, pw:pw + width].copy()
            if pw:
                gx[:, :, :, :pw] += core[:, :, :, width + pw:]
                gx[:, :, :, width - pw:] += core[:, :, :, :pw]
        else:
            gx = gxp[:, :, ph:ph + h, pw:pw + width]
        grads = [gx, gw]
        if b is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    inputs = (x, w) if b is None else (x, w, b)
    return tape.record(out, inputs, backward)


def upsample2x(x: Var) -> Var:
    """Nearest-neighbor 2x upsampling of (N,C,H,W)."""
    if x.values.ndim != 4:
        raise ShapeError(f"upsample2x expects 4D input, got {x.shape}")
    n, c, h, w = x.shape
    out = x.values.repeat(2, axis=2).repeat(2, axis=3)

    def backward(g):
        return (g.reshape(n, c, h, 2, w, 2).sum(axis=(3, 5)),)

    return x.tape.record(out, (x,), backward)


def bilinear_sample(img: Var, x, y) -> Var:
    """Sample img (H,W) at pixel coordinates (x, y) with periodic wrap.

    Differentiable in the image and in both coordinate arrays.
    """
    tape = _tape_of(img, x, y)
    img = tape.lift(img)
    x, y = tape.lift(x), tape.lift(y)
    if img.values.ndim != 2:
        raise ShapeError(f"bilinear_sample expects a 2D image, got {img.shape}")
    if x.shape != y.shape:
        raise ShapeError(f"coordinate shapes differ: {x.shape} vs {y.shape}")
    h, w = img.shape
    x0 = np.floor(x.values)
    y0 = np.floor(y.values)
    fx = x.values - x0
    fy = y.values - y0
    x0i = x0.astype(np.int64) % w
    x1i = (x0i + 1) % w
    y0i = y0.astype(np.int64) % h
    y1i = (y0i + 1) % h
    i00 = img.values[y0i, x0i]
    i01 = img.values[y0i, x1i]
    i10 = img.values[y1i, x0i]
    i11 = img.values[y1i, x1i]
    out = ((1 - fx) * (1 - fy) * i00 + fx * (1 - fy) * i01
           + (1 - fx) * fy * i10 + fx * fy * i11)

    def backward(g):
        gimg = np.zeros_like(img.values)
        np.add.at(gimg, (y0i, x0i), g * (1 - fx) * (1 - fy))
        np.add.at(gimg, (y0i, x1i), g * fx * (1 - fy))
        np.add.at(gimg, (y1i, x0i), g * (1 - fx) * fy)
        np.add.at(gimg, (y1i, x1i), g * fx * fy)
        gx = g * ((1 - fy) * (i01 - i00) + fy * (i11 - i10))
        gy = g * ((1 - fx) * (i10 - i00) + fx * (i11 - i01))
        return gimg, gx, gy

    return tape.record(out, (img, x, y), backward)


# -- differentiable grid stencils --------------------------------------------

def ddx(a: Var, spacing: float) -> Var:
    """Central x-difference; skew-adjoint, so the backward pass is -ddx."""
    out = _ddx_raw(a.values, spacing)
    return a.tape.record(out, (a,), lambda g: (-_ddx_raw(g, spacing),))


def ddy(a: Var, spacing: float) -> Var:
    out = _ddy_raw(a.values, spacing)
    return a.tape.record(out, (a,), lambda g: (-_ddy_raw(g, spacing),))


def spatial_gradient(phi: Var, spacing: float) -> tuple[Var, Var]:
    return ddx(phi, spacing), ddy(phi, spacing)


def spatial_divergence(u: Var, w: Var, spacing: float) -> Var:
    return add(ddx(u, spacing), ddy(w, spacing))


def spatial_curl(u: Var, w: Var, spacing: float) -> Var:
    return sub(ddx(w, spacing), ddy(u, spacing))


def tv(u: Var, w: Var) -> Var:
    """Total variation: mean L1 norm of forward-difference flow gradients."""
    tape = _tape_of(u, w)
    if u.shape != w.shape:
        raise ShapeError(f"flow component shapes differ: {u.shape} vs {w.shape}")
    n = u.values.size

    def fdiff(a, axis):
        return np.roll(a, -1, axis=axis) - a

    diffs = [fdiff(u.values, -1), fdiff(u.values, -2),
             fdiff(w.values, -1), fdiff(w.values, -2)]
    out = np.asarray(sum(np.abs(d).sum() for d in diffs) / n)

    def backward(g):
        def fdiff_adjoint(s, axis):
            return np.roll(s, 1, axis=axis) - s

        gu = fdiff_adjoint(np.sign(diffs[0]), -1) + fdiff_adjoint(np.sign(diffs[1]), -2)
        gw = fdiff_adjoint(np.sign(diffs[2]), -1) + fdiff_adjoint(np.sign(diffs[3]), -2)
        return (g * gu / n, g * gw / n)

    return tape.record(out, (u, w), backward)


# -- differentiable Helmholtz projections ------------------------------------

def _project(u: np.ndarray, w: np.ndarray, spacing: float, part: str):
    v = VectorField(u, w, spacing)
    phi = _solve_spectral(ScalarField(
        _ddx_raw(u, spacing) + _ddy_raw(w, spacing), spacing))
    gu = _ddx_raw(phi.data, spacing)
    gw = _ddy_raw(phi.data, spacing)
    if part == "irr":
        return gu, gw, phi.data
    return u - gu, w - gw, phi.data


def _projection_op(u: Var, w: Var, spacing: float, part: str) -> tuple[Var, Var]:
    tape = _tape_of(u, w)
    u, w = tape.lift(u), tape.lift(w)
    if u.shape != w.shape:
        raise ShapeError(f"flow component shapes differ: {u.shape} vs {w.shape}")
    pu, pw, _ = _project(u.values, w.values, spacing, part)

    # both projectors are symmetric: the vector-Jacobian product is the
    # projector itself, applied componentwise to the adjoint pair
    def backward_u(g):
        qu, qw, _ = _project(g, np.zeros_like(g), spacing, part)
        return qu, qw

    def backward_w(g):
        qu, qw, _ = _project(np.zeros_like(g), g, spacing, part)
        return qu, qw

    out_u = tape.record(pu, (u, w), backward_u)
    out_w = tape.record(pw, (u, w), backward_w)
    return out_u, out_w


def project_solenoidal(u: Var, w: Var, spacing: float) -> tuple[Var, Var]:
    """Exact divergence-free projection (differentiable, self-adjoint)."""
    return _projection_op(u, w, spacing, "sol")


def project_irrotational(u: Var, w: Var, spacing: float) -> tuple[Var, Var]:
    """Exact curl-free projection (differentiable, self-adjoint)."""
    return _projection_op(u, w, spacing, "irr")


def poisson_potential(u: Var, w: Var, spacing: float) -> Var:
    """The scalar potential of the irrotational part, zero-mean gauge."""
    tape = _tape_of(u, w)
    u, w = tape.lift(u), tape.lift(w)
    _, _, phi = _project(u.values, w.values, spacing, "irr")

    def backward(g):
        # adjoint of v -> inv(L) div v is g -> -grad(inv(L) g)
        sol = _solve_spectral(ScalarField(g, spacing)).data
        return (-_ddx_raw(sol, spacing), -_ddy_raw(sol, spacing))

    return tape.record(phi, (u, w), backward)


# -- Gabor wavelet activation -------------------------------------------------

def gabor_activation(re: Var, im: Var | None, omega, s0) -> tuple[Var, Var]:
    """Complex Gabor wavelet on the (re, im) pair representation.

    For input z = re + j im the output is exp(j omega z) exp(-|s0 z|^2),
    returned as its real pair.  omega and s0 may be floats or trainable
    scalar Vars.  At z = 0 the output is (1, 0).
    """
    tape = _tape_of(re)
    omega = omega if isinstance(omega, Var) else tape.lift(float(omega))
    s0 = s0 if isinstance(s0, Var) else tape.lift(float(s0))
    phase = mul(omega, re)
    if im is None:
        mag2 = mul(re, re)
        decay = mul(mul(s0, s0), mag2)
    else:
        mag2 = add(mul(re, re), mul(im, im))
        decay = add(mul(omega, im), mul(mul(s0, s0), mag2))
    amp = exp(scale(decay, -1.0))
    return mul(amp, cos(phase)), mul(amp, sin(phase))
