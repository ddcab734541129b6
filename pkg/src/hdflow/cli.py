"""Command-line surface for synthesis, decomposition, training, simulation,
reconstruction, evaluation and figure export.

Exit codes are stable: 0 success, 1 usage error, 2 I/O error, 3 file-format
violation, 4 numeric failure.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import metrics
from .fields import (FieldError, ScalarField, VectorField, divergence,
                     gradient)
from .hdnet import (HDNetConfig, TrainingError, hdnet_eval, hdnet_forward,
                    hdnet_train, load_hdnet, format_eval_table)
from .io import FormatError, read_hfld, write_hfld
from .pivsim import advect_sequence, seed_particles
from .poisson import PoissonError, helmholtz_decompose, pcg_poisson
from .reconstruct import (ReconProblem, ReconstructionError, reconstruct)
from .synthesis import generate_dataset, load_manifest
from .viz import export_flow_png, export_gray_png, export_signed_png
from .wire import CoordinateError, WireConfig

EXIT_USAGE = 1
EXIT_IO = 2
EXIT_FORMAT = 3
EXIT_NUMERIC = 4


def parse_config_file(path) -> dict[str, str]:
    """UTF-8 key=value lines; blank lines and # comments are ignored."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key=value, "
                                  f"got {line!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def _coerce(values: dict[str, str], spec: dict[str, type]) -> dict:
    out = {}
    for key, value in values.items():
        if key not in spec:
            raise click.UsageError(f"unknown config key {key!r}")
        try:
            out[key] = spec[key](value)
        except ValueError as exc:
            raise FormatError(f"config key {key!r}: {exc}") from exc
    return out


@click.group()
def cli():
    """Physics-constrained 2D flow toolkit."""


@cli.command()
@click.option("--count", type=int, required=True, help="Number of samples.")
@click.option("--size", type=int, default=128, show_default=True,
              help="Grid resolution (square).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--octaves", default="1,2,3,4,5", show_default=True,
              help="Comma-separated octave counts to draw from.")
@click.option("--chi-mean", type=float, default=2e-4, show_default=True)
@click.option("--chi-std", type=float, default=5e-5, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
def synth(count, size, seed, octaves, chi_mean, chi_std, workers, out_dir):
    """Generate a flow dataset with exactly known decompositions."""
    octave_set = tuple(int(x) for x in octaves.split(",") if x)
    if count < 0:
        raise click.UsageError("--count must be >= 0")
    manifest = generate_dataset(count, size, size, seed, out_dir,
                                chi_mean=chi_mean, chi_std=chi_std,
                                octave_set=octave_set, workers=workers)
    click.echo(f"wrote {manifest['count']} samples to {out_dir}")


@cli.command()
@click.option("--in", "in_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--solver", type=click.Choice(["spectral", "pcg", "network"]),
              default="spectral", show_default=True)
@click.option("--checkpoint", type=click.Path(dir_okay=False),
              help="Trained decomposer (solver 'network').")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
def decompose(in_path, solver, checkpoint, out_dir):
    """Split a vector field into curl-free and divergence-free parts."""
    v = read_hfld(in_path)
    if not isinstance(v, VectorField):
        raise FormatError(f"{in_path}: expected a 2-channel vector field")
    v.validate()
    if solver == "spectral":
        phi, v_irr, v_sol = helmholtz_decompose(v)
    elif solver == "pcg":
        phi = pcg_poisson(divergence(v))
        v_irr = gradient(phi)
        v_sol = v - v_irr
    else:
        if checkpoint is None:
            raise click.UsageError("--solver network requires --checkpoint")
        model = load_hdnet(checkpoint)
        phi, v_irr, v_sol = hdnet_forward(model, v)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_hfld(out / "phi.hfld", phi)
    write_hfld(out / "virr.hfld", v_irr)
    write_hfld(out / "vsol.hfld", v_sol)
    scale = float(np.sqrt(np.mean(v.u ** 2 + v.w ** 2)))
    report = {
        "solver": solver,
        "div_mse_vsol": metrics.div_mse(v_sol),
        "curl_mse_virr": metrics.curl_mse(v_irr),
        "div_max_vsol": float(np.max(np.abs(divergence(v_sol).data))),
        "rms_speed": scale,
    }
    with open(out / "residual_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
    click.echo(f"div MSE of v_sol: {report['div_mse_vsol']:.3e}")


_HDNET_KEYS = {"resolution": int, "depth": int, "base_channels": int,
               "lambda1": float, "lr": float, "epochs": int,
               "batch_size": int, "seed": int,
               "augment": lambda s: s.lower() in ("1", "true", "yes"),
               "cosine_lr": lambda s: s.lower() in ("1", "true", "yes"),
               "lambda_div": float}


@cli.command("train-hdnet")
@click.option("--dataset", "dataset_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--config", "config_path",
              type=click.Path(dir_okay=False),
              help="key=value overrides for the training configuration.")
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
def train_hdnet(dataset_dir, config_path, out_dir):
    """Train the neural decomposer; writes checkpoints and a JSON-lines log."""
    overrides = {}
    if config_path:
        overrides = _coerce(parse_config_file(config_path), _HDNET_KEYS)
    manifest = load_manifest(dataset_dir)
    if manifest["height"] != manifest["width"]:
        raise FormatError("training requires square samples")
    overrides.setdefault("resolution", manifest["width"])
    config = HDNetConfig(**overrides)
    model, log = hdnet_train(config, manifest, dataset_dir, out_dir=out_dir)
    rows = hdnet_eval(model, dataset_dir, manifest["samples"])
    click.echo(format_eval_table(rows))
    click.echo(f"final train loss: {log[-1]['train_loss']:.3e}")


@cli.command("piv-sim")
@click.option("--flow", "flow_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--frames", type=int, default=8, show_default=True)
@click.option("--particles", type=int, default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
def piv_sim(flow_path, frames, particles, seed, out_dir):
    """Render a particle-image sequence advected by a flow (grid units)."""
    v = read_hfld(flow_path, spacing=1.0)
    if not isinstance(v, VectorField):
        raise FormatError(f"{flow_path}: expected a 2-channel vector field")
    v.validate()
    cloud = seed_particles(particles, v.height, v.width, seed)
    images = advect_sequence(cloud, v, frames)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, img in enumerate(images):
        write_hfld(out / f"frame_{k:03d}.hfld", img)
    write_hfld(out / "flow_gt.hfld", v)
    meta = {"frames": frames, "particles": particles, "seed": seed,
            "source_flow": str(flow_path)}
    with open(out / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
    click.echo(f"wrote {frames} frames to {out_dir}")


_RECON_KEYS = {"lambda2": float, "lambda_soft": float, "epochs": int,
               "projection_epoch": int, "ramp_end": int, "lr": float,
               "seed": int, "patience": int, "layers": int, "hidden": int,
               "omega_start": float, "omega_end": float, "s0": float}


@cli.command("reconstruct")
@click.option("--frames", "frames_dir", required=True,
              type=click.Path(file_okay=False),
              help="Directory of frame_*.hfld images.")
@click.option("--mode", type=click.Choice(["sol", "irr"]), default="sol",
              show_default=True)
@click.option("--projection",
              type=click.Choice(["none", "soft", "oracle", "network"]),
              default="none", show_default=True)
@click.option("--checkpoint", type=click.Path(dir_okay=False),
              help="Trained decomposer (projection 'network').")
@click.option("--config", "config_path",
              type=click.Path(dir_okay=False))
@click.option("--out", "out_dir", required=True,
              type=click.Path(file_okay=False))
def reconstruct_cmd(frames_dir, mode, projection, checkpoint, config_path,
                    out_dir):
    """Recover per-frame flows and the template from an image sequence."""
    paths = sorted(Path(frames_dir).glob("frame_*.hfld"))
    if len(paths) < 2:
        raise FormatError(f"{frames_dir}: found {len(paths)} frame_*.hfld "
                          f"files, need at least 2")
    frames = []
    for p in paths:
        img = read_hfld(p, spacing=1.0)
        if not isinstance(img, ScalarField):
            raise FormatError(f"{p}: frames must be scalar images")
        frames.append(img.validate())
    overrides = {}
    if config_path:
        overrides = _coerce(parse_config_file(config_path), _RECON_KEYS)
    wire_kwargs = {k: overrides.pop(k) for k in
                   ("layers", "hidden", "omega_start", "omega_end", "s0")
                   if k in overrides}
    network = load_hdnet(checkpoint) if checkpoint else None
    if projection == "network" and network is None:
        raise click.UsageError("--projection network requires --checkpoint")
    problem = ReconProblem(frames=frames, mode=mode, projection=projection,
                           network=network, **overrides)
    if wire_kwargs:
        problem.wire = WireConfig(ramp_end=problem.ramp_end,
                                  seed=problem.seed, **wire_kwargs)
    result = reconstruct(problem)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, v in enumerate(result.flows):
        write_hfld(out / f"flow_{k:03d}.hfld", v)
    if result.phis is not None:
        for k, phi in enumerate(result.phis):
            write_hfld(out / f"phi_{k:03d}.hfld", phi)
    write_hfld(out / "template.hfld", result.template)
    with open(out / "loss_trace.csv", "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for e, val in enumerate(result.loss_trace):
            fh.write(f"{e},{val:.9e}\n")
    for warning in result.warnings:
        click.echo(f"warning: {warning}", err=True)
    click.echo(f"final loss: {result.loss_trace[-1]:.3e}")


_METRIC_NAMES = ("aae", "divmse", "curlmse", "rel_l2")


@cli.command("eval")
@click.option("--est", "est_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--gt", "gt_dir", required=True,
              type=click.Path(file_okay=False))
@click.option("--metrics", "which", default="aae,divmse,curlmse,rel_l2",
              show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False),
              help="CSV destination (default stdout).")
def eval_cmd(est_dir, gt_dir, which, out_path):
    """Compare estimated fields against ground truth, file name by file name."""
    names = [w.strip() for w in which.split(",") if w.strip()]
    for name in names:
        if name not in _METRIC_NAMES:
            raise click.UsageError(f"unknown metric {name!r}; choose from "
                                   f"{', '.join(_METRIC_NAMES)}")
    est_files = sorted(p.name for p in Path(est_dir).glob("*.hfld"))
    if not est_files:
        raise FormatError(f"{est_dir}: no .hfld files")
    rows = []
    for fname in est_files:
        gt_path = Path(gt_dir) / fname
        if not gt_path.exists():
            raise FileNotFoundError(f"missing ground truth for {fname}")
        est = read_hfld(Path(est_dir) / fname, spacing=1.0)
        gt = read_hfld(gt_path, spacing=1.0)
        if type(est) is not type(gt):
            raise FormatError(f"{fname}: channel count differs from ground truth")
        row = [fname]
        for name in names:
            if name == "rel_l2":
                row.append(metrics.rel_l2(est, gt))
            elif isinstance(est, VectorField):
                fn = {"aae": lambda: metrics.aae(est, gt),
                      "divmse": lambda: metrics.div_mse(est),
                      "curlmse": lambda: metrics.curl_mse(est)}[name]
                row.append(fn())
            else:
                row.append(float("nan"))
        rows.append(row)
    lines = ["name," + ",".join(names)]
    for row in rows:
        lines.append(row[0] + "," + ",".join(f"{v:.9e}" for v in row[1:]))
    text = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@cli.command("export-png")
@click.option("--in", "in_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--style", type=click.Choice(["flow-wheel", "signed", "gray"]),
              required=True)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False))
def export_png(in_path, style, out_path):
    """Render a field file as a PNG image."""
    field = read_hfld(in_path)
    if style == "flow-wheel":
        if not isinstance(field, VectorField):
            raise FormatError(f"{in_path}: flow-wheel needs a vector field")
        norm = export_flow_png(out_path, field.validate())
        click.echo(f"magnitude normalization: {norm:.6e}")
    elif style == "signed":
        if not isinstance(field, ScalarField):
            raise FormatError(f"{in_path}: signed style needs a scalar field")
        limit = export_signed_png(out_path, field.validate())
        click.echo(f"symmetric limit: {limit:.6e}")
    else:
        if not isinstance(field, ScalarField):
            raise FormatError(f"{in_path}: gray style needs a scalar field")
        export_gray_png(out_path, field.validate())


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        return EXIT_USAGE
    except FormatError as exc:
        click.echo(f"format error: {exc}", err=True)
        return EXIT_FORMAT
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO
    except (FieldError, PoissonError, TrainingError, ReconstructionError,
            CoordinateError, FloatingPointError) as exc:
        click.echo(f"numeric error: {exc}", err=True)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
