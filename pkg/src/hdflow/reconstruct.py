"""Flow reconstruction from image sequences with physics projections.

A canonical template image and a coordinate MLP representing the flow are
optimized jointly: each frame must match the template warped by that frame's
flow, with TV regularization on the flow.  A pluggable projection stage
restricts the flow to its divergence-free (mode 'sol') or curl-free (mode
'irr') component, either exactly through the spectral solver, softly through
a penalty term, or through the trained convolutional decomposer.

All flows are in grid units (pixels per frame) and all stencils inside this
module use unit spacing.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .ad import Adam, Tape, Var, ops
from .fields import ScalarField, VectorField, ddx, ddy
from .hdnet import HDNetModel, _apply_net
from .wire import (MotionMLP, WireConfig, frame_coords, init_wire,
                   omega_schedule, wire_apply)

MODES = ("sol", "irr")
PROJECTIONS = ("none", "soft", "oracle", "network")


class ReconstructionError(RuntimeError):
    """Raised when the optimization fails (bad setup, non-finite loss)."""


@dataclass
class ReconProblem:
    frames: list[ScalarField]
    mode: str = "sol"
    projection: str = "none"
    network: HDNetModel | None = None
    lambda2: float = 1e-3          # TV weight
    lambda_soft: float = 1e-1      # divergence/curl penalty (soft projection)
    epochs: int = 1500
    projection_epoch: int = 1000   # coarse epochs before the projection stage
    ramp_end: int = 1000           # frequency ramp length
    lr: float = 1e-3
    seed: int = 0
    wire: WireConfig | None = None
    patience: int = 200

    def __post_init__(self):
        if len(self.frames) < 2:
            raise ReconstructionError("at least two frames are required")
        shape = self.frames[0].shape
        for f in self.frames:
            if f.shape != shape:
                raise ReconstructionError("frames must share one resolution")
        if self.mode not in MODES:
            raise ReconstructionError(f"unknown mode {self.mode!r}")
        if self.projection not in PROJECTIONS:
            raise ReconstructionError(f"unknown projection {self.projection!r}")
        if self.projection == "network" and self.network is None:
            raise ReconstructionError(
                "projection 'network' requires a loaded decomposer checkpoint")
        if self.wire is None:
            self.wire = WireConfig(ramp_end=self.ramp_end, seed=self.seed)


@dataclass
class ReconResult:
    flows: list[VectorField]
    template: ScalarField
    phis: list[ScalarField] | None
    loss_trace: list[float]
    warnings: list[str] = dc_field(default_factory=list)


def _pixel_grid(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    gx, gy = np.meshgrid(np.arange(float(width)), np.arange(float(height)))
    return gx, gy


def warp_var(p0: Var, u: Var, w: Var) -> Var:
    """Differentiable template warp: out(r) = p0(r + v(r)), periodic."""
    h, width = p0.shape
    gx, gy = _pixel_grid(h, width)
    xs = ops.add(u, p0.tape.var(gx))
    ys = ops.add(w, p0.tape.var(gy))
    return ops.bilinear_sample(p0, xs, ys)


def warp(p0: ScalarField, v: VectorField) -> ScalarField:
    """Numpy convenience wrapper around the differentiable warp."""
    if p0.shape != v.shape:
        raise ReconstructionError(
            f"template shape {p0.shape} does not match flow shape {v.shape}")
    tape = Tape()
    out = warp_var(tape.var(p0.data), tape.var(v.u), tape.var(v.w))
    tape.release()
    return ScalarField(out.values, p0.spacing)


def _network_project(model: HDNetModel, u: Var, w: Var, mode: str
                     ) -> tuple[Var, Var]:
    """Differentiable decomposition of one (H,W) flow by the trained CNN.

    The per-sample RMS normalizer is treated as a constant of the current
    iterate (no gradient through the scale).
    """
    tape = u.tape
    h, width = u.shape
    scale = float(np.sqrt(np.mean(u.values ** 2 + w.values ** 2)))
    if scale == 0.0:
        scale = 1.0
    un = ops.scale(u, 1.0 / scale)
    wn = ops.scale(w, 1.0 / scale)
    div = ops.spatial_divergence(un, wn, 1.0)
    x = ops.concat([ops.reshape(v, (1, 1, h, width)) for v in (un, wn, div)],
                   axis=1)
    pv = {name: tape.var(p) for name, p in model.params.items()}
    phi = ops.reshape(_apply_net(pv, x, model.config.depth), (h, width))
    irr_u = ops.scale(ops.ddx(phi, 1.0), scale)
    irr_w = ops.scale(ops.ddy(phi, 1.0), scale)
    if mode == "irr":
        return irr_u, irr_w
    return ops.sub(u, irr_u), ops.sub(w, irr_w)


def _project_flow(problem: ReconProblem, u: Var, w: Var) -> tuple[Var, Var]:
    if problem.projection == "oracle":
        if problem.mode == "sol":
            return ops.project_solenoidal(u, w, 1.0)
        return ops.project_irrotational(u, w, 1.0)
    if problem.projection == "network":
        return _network_project(problem.network, u, w, problem.mode)
    return u, w


def pipeline_loss(problem: ReconProblem, p0: Var, pv: dict[str, Var],
                  epoch: int) -> Var:
    """Joint data + regularization loss at one epoch.

    Sum over frames of the mean squared warp error, plus lambda2 * TV of each
    (projected) flow; the soft variant adds lambda_soft times the mean
    squared divergence (mode 'sol') or curl (mode 'irr') instead of
    projecting.  Before projection_epoch the raw flow feeds the warp.
    """
    tape = p0.tape
    h, width = problem.frames[0].shape
    n = len(problem.frames)
    omega = omega_schedule(epoch, problem.wire)
    coords = np.concatenate(
        [frame_coords(h, width, t, n) for t in range(n)])
    flow = wire_apply(pv, tape.var(coords), problem.wire,
                      None if omega == "learnable" else omega)
    u_all = ops.reshape(ops.column(flow, 0), (n, h, width))
    w_all = ops.reshape(ops.column(flow, 1), (n, h, width))
    project_now = (problem.projection in ("oracle", "network")
                   and epoch >= problem.projection_epoch)
    loss = None
    for t in range(n):
        u = ops.index0(u_all, t)
        w = ops.index0(w_all, t)
        if project_now:
            u, w = _project_flow(problem, u, w)
        term = ops.mse(warp_var(p0, u, w), problem.frames[t].data)
        term = ops.add(term, ops.scale(ops.tv(u, w), problem.lambda2))
        if problem.projection == "soft" and epoch >= problem.projection_epoch:
            if problem.mode == "sol":
                c = ops.spatial_divergence(u, w, 1.0)
            else:
                c = ops.spatial_curl(u, w, 1.0)
            term = ops.add(term, ops.scale(ops.mse(c, np.zeros((h, width))),
                                           problem.lambda_soft))
        loss = term if loss is None else ops.add(loss, term)
    return loss


def _final_flows(problem: ReconProblem, mlp: MotionMLP, params
                 ) -> tuple[list[VectorField], list[ScalarField] | None]:
    from .poisson import solve_poisson
    from .fields import divergence

    h, width = problem.frames[0].shape
    n = len(problem.frames)
    tape = Tape()
    pv = {name: tape.var(p) for name, p in params.items()}
    flows = []
    phis = [] if problem.projection in ("oracle", "network") else None
    for t in range(n):
        coords = frame_coords(h, width, t, n)
        out = wire_apply(pv, tape.var(coords), problem.wire, None)
        u = tape.var(out.values[:, 0].reshape(h, width))
        w = tape.var(out.values[:, 1].reshape(h, width))
        pu, pw = _project_flow(problem, u, w)
        flows.append(VectorField(pu.values, pw.values, spacing=1.0))
        if phis is not None:
            raw = VectorField(u.values, w.values, spacing=1.0)
            phi = solve_poisson(divergence(raw))
            phis.append(phi)
    tape.release()
    return flows, phis


def reconstruct(problem: ReconProblem) -> ReconResult:
    """Jointly optimize the template and the motion representation."""
    h, width = problem.frames[0].shape
    mlp = init_wire(problem.wire)
    params: dict[str, np.ndarray] = dict(mlp.params)
    params["p0"] = problem.frames[0].data.copy()
    opt = Adam(params, lr=problem.lr)
    trace: list[float] = []
    warnings: list[str] = []
    omega_released = False
    for epoch in range(problem.epochs):
        if not omega_released and \
                omega_schedule(epoch, problem.wire) == "learnable":
            params["omega"] = np.asarray(problem.wire.omega_end)
            omega_released = True
        tape = Tape()
        pv = {name: tape.var(p) for name, p in params.items()
              if name != "p0"}
        p0 = tape.var(params["p0"])
        loss = pipeline_loss(problem, p0, pv, epoch)
        value = float(loss.values)
        if not np.isfinite(value):
            raise ReconstructionError(f"non-finite loss at epoch {epoch}")
        tape.backward(loss)
        grads = {name: pv[name].grad_or_zero() for name in pv}
        grads["p0"] = p0.grad_or_zero()
        if not omega_released:
            grads.pop("omega", None)
        opt.step(grads)
        trace.append(value)
        if problem.patience and len(trace) > 2 * problem.patience:
            recent = min(trace[-problem.patience:])
            earlier = min(trace[:-problem.patience])
            if recent >= earlier:
                warnings.append(
                    f"loss plateau: no improvement over the last "
                    f"{problem.patience} epochs (epoch {epoch})")
    mlp = MotionMLP(problem.wire, {n: params[n] for n in mlp.params})
    flows, phis = _final_flows(problem, mlp, mlp.params)
    template = ScalarField(params["p0"], problem.frames[0].spacing)
    return ReconResult(flows, template, phis, trace, warnings)


def horn_schunck(frame_a: ScalarField, frame_b: ScalarField, alpha: float = 1.0,
                 iters: int = 200, callback=None) -> VectorField:
    """Classical two-frame optical flow with quadratic smoothness.

    Jacobi iteration on the linearized brightness-constancy optimality
    system, periodic boundaries; callback(residual_norm) per iteration.
    The returned flow uses the template-warp convention of this module,
    frame_b(r) = frame_a(r + v(r)), the negation of the classical
    displacement sign.
    """
    if frame_a.shape != frame_b.shape:
        raise ReconstructionError("frames must have the same shape")
    a, b = frame_a.data, frame_b.data
    ix = 0.5 * (ddx(a, 1.0) + ddx(b, 1.0))
    iy = 0.5 * (ddy(a, 1.0) + ddy(b, 1.0))
    it = b - a
    u = np.zeros_like(a)
    w = np.zeros_like(a)
    denom = alpha ** 2 + ix ** 2 + iy ** 2

    def navg(f):
        return 0.25 * (np.roll(f, 1, 0) + np.roll(f, -1, 0)
                       + np.roll(f, 1, 1) + np.roll(f, -1, 1))

    for _ in range(iters):
        ubar, wbar = navg(u), navg(w)
        shared = (ix * ubar + iy * wbar + it) / denom
        u = ubar - ix * shared
        w = wbar - iy * shared
        if callback is not None:
            ru = alpha ** 2 * (navg(u) - u) - ix * (ix * u + iy * w + it)
            rw = alpha ** 2 * (navg(w) - w) - iy * (ix * u + iy * w + it)
            callback(float(np.sqrt(np.sum(ru ** 2) + np.sum(rw ** 2))))
    return VectorField(-u, -w, spacing=1.0)
