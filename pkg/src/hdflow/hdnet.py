"""Neural Helmholtz decomposer: a UNet-style CNN predicting the potential.

The network maps (u, w, div v*) to the scalar potential phi_hat; the curl-free
part is then gradient(phi_hat) and the divergence-free part the exact
remainder v* - gradient(phi_hat).  Because the curl-free part is a stencil
gradient of a scalar, curl(v_irr_hat) vanishes to round-off for any
parameters, trained or not.

Inputs are normalized per sample by the RMS speed of v* and the prediction is
scaled back, so the decomposer is equivariant under rescaling of the flow (the
underlying map is linear).  The divergence input channel uses unit grid
spacing to keep its magnitude comparable to the velocity channels.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ad import Adam, Tape, Var, ops
from .fields import FieldError, ScalarField, VectorField, ddx, ddy, gradient
from .io import read_hckp, write_hckp
from .synthesis import SamplePair, load_sample

_CONFIG_PREFIX = "_config."


class TrainingError(RuntimeError):
    """Raised when optimization fails (non-finite loss, bad dataset)."""


@dataclass(frozen=True)
class HDNetConfig:
    resolution: int = 64
    depth: int = 4
    base_channels: int = 32
    lambda1: float = 1.0
    lr: float = 1e-3
    epochs: int = 200
    batch_size: int = 16
    seed: int = 0
    augment: bool = True
    cosine_lr: bool = False
    lambda_div: float = 0.0  # explicit divergence penalty on the estimate

    def __post_init__(self):
        if self.resolution % (1 << self.depth):
            raise ValueError(
                f"resolution {self.resolution} not divisible by 2^{self.depth}")
        if self.base_channels < 1 or self.depth < 1:
            raise ValueError("depth and base_channels must be positive")


def paper_config(resolution: int = 128) -> HDNetConfig:
    """The low-learning-rate long-run regime; not a desk-scale target."""
    return HDNetConfig(resolution=resolution, lr=1e-6, epochs=30000)


def _channels(config: HDNetConfig) -> list[int]:
    return [config.base_channels << d for d in range(config.depth)]


def parameter_shapes(config: HDNetConfig) -> dict[str, tuple[int, ...]]:
    ch = _channels(config)
    shapes: dict[str, tuple[int, ...]] = {}
    for d in range(config.depth):
        cin = 3 if d == 0 else ch[d - 1]
        shapes[f"enc{d}.weight"] = (ch[d], cin, 3, 3)
        shapes[f"enc{d}.bias"] = (ch[d],)
    shapes["mid.weight"] = (ch[-1], ch[-1], 3, 3)
    shapes["mid.bias"] = (ch[-1],)
    for d in range(config.depth - 1, 0, -1):
        shapes[f"dec{d}.weight"] = (ch[d - 1], ch[d] + ch[d - 1], 3, 3)
        shapes[f"dec{d}.bias"] = (ch[d - 1],)
    head = max(config.base_channels // 2, 4)
    shapes["head.weight"] = (head, ch[0] + 3, 3, 3)
    shapes["head.bias"] = (head,)
    shapes["out.weight"] = (1, head, 3, 3)
    shapes["out.bias"] = (1,)
    return shapes


@dataclass
class HDNetModel:
    config: HDNetConfig
    params: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        expected = parameter_shapes(self.config)
        if set(self.params) != set(expected):
            raise ValueError("parameter names do not match the configuration")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise ValueError(
                    f"parameter {name} has shape {self.params[name].shape}, "
                    f"expected {shape}")


def init_hdnet(config: HDNetConfig) -> HDNetModel:
    """He-initialized weights; the output layer is zeroed so the untrained
    network predicts phi_hat = 0 (identity decomposition)."""
    rng = np.random.default_rng(config.seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".bias") or name.startswith("out."):
            params[name] = np.zeros(shape)
        else:
            fan_in = shape[1] * shape[2] * shape[3]
            params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    return HDNetModel(config, params)


def save_hdnet(path, model: HDNetModel) -> None:
    blocks = dict(model.params)
    for key, value in asdict(model.config).items():
        blocks[_CONFIG_PREFIX + key] = np.asarray(float(value))
    write_hckp(path, blocks)


def load_hdnet(path) -> HDNetModel:
    blocks = read_hckp(path)
    fields_ = {}
    params = {}
    for name, value in blocks.items():
        if name.startswith(_CONFIG_PREFIX):
            fields_[name[len(_CONFIG_PREFIX):]] = float(value)
        else:
            params[name] = value
    config = HDNetConfig(
        resolution=int(fields_["resolution"]), depth=int(fields_["depth"]),
        base_channels=int(fields_["base_channels"]),
        lambda1=fields_["lambda1"], lr=fields_["lr"],
        epochs=int(fields_["epochs"]), batch_size=int(fields_["batch_size"]),
        seed=int(fields_["seed"]),
        augment=bool(fields_.get("augment", True)),
        cosine_lr=bool(fields_.get("cosine_lr", False)),
        lambda_div=float(fields_.get("lambda_div", 0.0)))
    return HDNetModel(config, params)


def _apply_net(pv: dict[str, Var], x: Var, depth: int) -> Var:
    """UNet forward pass: x (N,3,H,W) to phi (N,1,H,W)."""
    skips = []
    h = x
    for d in range(depth):
        h = ops.gelu(ops.conv2d(h, pv[f"enc{d}.weight"], pv[f"enc{d}.bias"],
                                stride=2))
        skips.append(h)
    h = ops.gelu(ops.conv2d(h, pv["mid.weight"], pv["mid.bias"]))
    for d in range(depth - 1, 0, -1):
        h = ops.upsample2x(h)
        h = ops.concat([h, skips[d - 1]], axis=1)
        h = ops.gelu(ops.conv2d(h, pv[f"dec{d}.weight"], pv[f"dec{d}.bias"]))
    h = ops.upsample2x(h)
    h = ops.concat([h, x], axis=1)
    h = ops.gelu(ops.conv2d(h, pv["head.weight"], pv["head.bias"]))
    return ops.conv2d(h, pv["out.weight"], pv["out.bias"])


def _pack_inputs(fields: list[VectorField]) -> tuple[np.ndarray, np.ndarray]:
    """Stack (u, w, unit-spacing divergence) channels, RMS-normalized."""
    xs, scales = [], []
    for v in fields:
        scale = float(np.sqrt(np.mean(v.u ** 2 + v.w ** 2)))
        if scale == 0.0:
            scale = 1.0
        div = ddx(v.u, 1.0) + ddy(v.w, 1.0)
        xs.append(np.stack([v.u, v.w, div]) / scale)
        scales.append(scale)
    return np.stack(xs), np.asarray(scales)


def hdnet_forward(model: HDNetModel, v_star: VectorField
                  ) -> tuple[ScalarField, VectorField, VectorField]:
    """Decompose one flow field; v_irr_hat + v_sol_hat = v* exactly."""
    res = model.config.resolution
    if v_star.shape != (res, res):
        raise FieldError(
            f"input shape {v_star.shape} does not match model resolution {res}")
    x, scales = _pack_inputs([v_star])
    tape = Tape()
    pv = {name: tape.var(p) for name, p in model.params.items()}
    phi = _apply_net(pv, tape.var(x), model.config.depth)
    tape.release()
    # the network predicts the potential in grid units (unit spacing);
    # multiplying by the field spacing makes gradient(phi_hat) with the
    # field's own spacing reproduce the grid-unit stencil exactly
    phi_hat = ScalarField(phi.values[0, 0] * scales[0] * v_star.spacing,
                          v_star.spacing)
    v_irr_hat = gradient(phi_hat)
    v_sol_hat = v_star - v_irr_hat
    return phi_hat, v_irr_hat, v_sol_hat


def hdnet_loss(pred: tuple[Var, Var, Var], sample: SamplePair,
               lambda1: float = 1.0) -> Var:
    """Supervised loss against the known decomposition.

    pred is (phi_hat, v_sol_hat_u, v_sol_hat_w) as Vars on one tape.  The
    solenoidal target is chi * v_sol_gt (the actual solenoidal content of v*)
    and the potential target is phi_gt in the zero-mean gauge.
    """
    phi_hat, su, sw = pred
    phi0 = sample.phi_gt.data - np.mean(sample.phi_gt.data)
    chi = sample.chi
    return ops.add(
        ops.add(ops.mse(su, chi * sample.v_sol_gt.u),
                ops.mse(sw, chi * sample.v_sol_gt.w)),
        ops.scale(ops.mse(phi_hat, phi0), lambda1))


def _batch_loss(pv: dict[str, Var], tape: Tape, config: HDNetConfig,
                x: np.ndarray, scales: np.ndarray, phi0: np.ndarray,
                sol_u: np.ndarray, sol_w: np.ndarray, spacing: float) -> Var:
    """Training loss on one packed batch, in per-sample normalized units."""
    s = scales[:, None, None, None]
    phi = _apply_net(pv, tape.var(x), config.depth)
    # potential target in grid units: ddx(phi0 / spacing, 1) = v_irr
    irr_u = ops.ddx(phi, 1.0)
    irr_w = ops.ddy(phi, 1.0)
    su = ops.sub(tape.var(x[:, 0:1]), irr_u)
    sw = ops.sub(tape.var(x[:, 1:2]), irr_w)
    loss = ops.add(
        ops.add(ops.mse(su, sol_u / s), ops.mse(sw, sol_w / s)),
        ops.scale(ops.mse(phi, phi0 / (s * spacing)), config.lambda1))
    if config.lambda_div:
        dv = ops.spatial_divergence(su, sw, 1.0)
        loss = ops.add(loss, ops.scale(
            ops.mse(dv, np.zeros(dv.shape, dtype=dv.values.dtype)),
            config.lambda_div))
    return loss


def _load_training_arrays(dataset_dir, entries, resolution):
    """Preload the dataset as packed numpy arrays (inputs, scales, targets)."""
    fields, phi0s, sols_u, sols_w = [], [], [], []
    spacing = None
    for entry in entries:
        pair = load_sample(dataset_dir, entry)
        if pair.v_star.shape != (resolution, resolution):
            raise TrainingError(
                f"dataset sample shape {pair.v_star.shape} does not match "
                f"configured resolution {resolution}")
        spacing = pair.v_star.spacing
        fields.append(pair.v_star)
        phi0s.append((pair.phi_gt.data - np.mean(pair.phi_gt.data))[None])
        sols_u.append((pair.chi * pair.v_sol_gt.u)[None])
        sols_w.append((pair.chi * pair.v_sol_gt.w)[None])
    x, scales = _pack_inputs(fields)
    return (x, scales, np.stack(phi0s), np.stack(sols_u), np.stack(sols_w),
            spacing)


def hdnet_train(config: HDNetConfig, manifest: dict, dataset_dir,
                out_dir=None, eval_fraction: float = 0.1,
                eval_every: int = 10, checkpoint_every: int = 50,
                log_path=None) -> tuple[HDNetModel, list[dict]]:
    """Adam training with a held-out split and JSON-lines logging.

    Returns the trained model and the in-memory log (one record per epoch:
    epoch, train_loss, eval_div_mse).  Deterministic for a fixed config.
    """
    entries = manifest["samples"]
    if not entries:
        raise TrainingError("dataset manifest contains no samples")
    n_eval = int(len(entries) * eval_fraction)
    train_entries = entries[:len(entries) - n_eval]
    eval_entries = entries[len(entries) - n_eval:]
    if not train_entries:
        raise TrainingError("evaluation split leaves no training samples")

    data = _load_training_arrays(dataset_dir, train_entries, config.resolution)
    x, scales, phi0, sol_u, sol_w, spacing = data

    model = init_hdnet(config)
    opt = Adam(model.params, lr=config.lr)
    rng = np.random.default_rng(config.seed + 1)
    n = len(train_entries)
    batch = min(config.batch_size, n)
    log: list[dict] = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if log_path is None:
            log_path = out / "training_log.jsonl"
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None

    try:
        for epoch in range(config.epochs):
            if config.cosine_lr:
                opt.lr = config.lr * 0.5 * (
                    1.0 + np.cos(np.pi * epoch / max(config.epochs, 1)))
            order = rng.permutation(n)
            epoch_loss = 0.0
            nb = 0
            for start in range(0, n - batch + 1, batch):
                idx = order[start:start + batch]
                xb, pb, ub, wb = x[idx], phi0[idx], sol_u[idx], sol_w[idx]
                if config.augment:
                    # periodic shifts commute with every operator in the
                    # loss, so rolled samples are exact new training pairs
                    res = config.resolution
                    for k in range(len(idx)):
                        shift = (int(rng.integers(res)),
                                 int(rng.integers(res)))
                        for arr in (xb, pb, ub, wb):
                            arr[k] = np.roll(arr[k], shift, axis=(-2, -1))
                # float32 tape for throughput; master weights stay float64
                tape = Tape(dtype=np.float32)
                pv = {name: tape.var(p) for name, p in model.params.items()}
                loss = _batch_loss(pv, tape, config, xb, scales[idx],
                                   pb, ub, wb, spacing)
                value = float(loss.values)
                if not np.isfinite(value):
                    raise TrainingError(
                        f"non-finite loss at epoch {epoch}: {value}")
                tape.backward(loss)
                opt.step({name: pv[name].grad_or_zero() for name in pv})
                epoch_loss += value
                nb += 1
            record = {"epoch": epoch, "train_loss": epoch_loss / max(nb, 1),
                      "eval_div_mse": None}
            if eval_entries and (epoch % eval_every == 0
                                 or epoch == config.epochs - 1):
                rows = hdnet_eval(model, dataset_dir, eval_entries)
                record["eval_div_mse"] = float(
                    np.mean([r["mean"] for r in rows if r["count"]]))
            log.append(record)
            if log_fh:
                log_fh.write(json.dumps(record) + "\n")
                log_fh.flush()
            if out is not None and checkpoint_every and \
                    (epoch + 1) % checkpoint_every == 0:
                save_hdnet(out / f"checkpoint_{epoch + 1:05d}.hckp", model)
        if out is not None:
            save_hdnet(out / "model.hckp", model)
    finally:
        if log_fh:
            log_fh.close()
    return model, log


def hdnet_eval(model: HDNetModel, dataset_dir, entries,
               groups: list[tuple[int, float | None]] | None = None,
               chi_tol: float = np.inf, normalized: bool = False
               ) -> list[dict]:
    """Per-group mean and std of the divergence MSE of v_sol_hat.

    Groups are (octave count, chi) pairs; chi None matches any blend weight.
    With normalized=True each input is scaled to unit RMS speed and the
    divergence is measured with unit grid spacing, making the numbers
    comparable across datasets.  Empty groups are reported with count 0.
    """
    if groups is None:
        octs = sorted({int(e["octaves_phi"]) for e in entries})
        groups = [(n, None) for n in octs]
    per_sample: list[tuple[int, float, float]] = []
    for entry in entries:
        pair = load_sample(dataset_dir, entry)
        v_star = pair.v_star
        if normalized:
            rms = float(np.sqrt(np.mean(v_star.u ** 2 + v_star.w ** 2)))
            v_star = VectorField(v_star.u / rms, v_star.w / rms, spacing=1.0)
        _, _, v_sol_hat = hdnet_forward(model, v_star)
        div = ddx(v_sol_hat.u, v_star.spacing) + ddy(v_sol_hat.w, v_star.spacing)
        per_sample.append((int(entry["octaves_phi"]), float(entry["chi"]),
                           float(np.mean(div ** 2))))
    rows = []
    for n, chi in groups:
        vals = [m for (oct_, c, m) in per_sample
                if oct_ == n and (chi is None or abs(c - chi) <= chi_tol)]
        rows.append({
            "n": n,
            "chi": chi,
            "count": len(vals),
            "mean": float(np.mean(vals)) if vals else float("nan"),
            "std": float(np.std(vals)) if vals else float("nan"),
        })
    return rows


def format_eval_table(rows: list[dict]) -> str:
    """Render the per-group report as an aligned text table."""
    lines = [f"{'n':>4} {'chi':>12} {'count':>6} {'div MSE mean':>14} {'std':>14}"]
    for r in rows:
        chi = "any" if r["chi"] is None else f"{r['chi']:.3e}"
        lines.append(f"{r['n']:>4} {chi:>12} {r['count']:>6} "
                     f"{r['mean']:>14.6e} {r['std']:>14.6e}")
    return "\n".join(lines)
