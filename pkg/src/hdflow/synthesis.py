"""Helmholtz synthesis: building flows with a known, exact decomposition.

A scalar potential phi and a stream function Psi are drawn as independent
Perlin turbulence fields; gradient(phi) gives the curl-free part, curl2d(Psi)
the divergence-free part, and the two are blended with a weight chi.  The
resulting triples (v*, v_sol, phi) are training data for the neural
decomposer and ground truth for every oracle test.

phi is stored with the stencil's null modes removed (mean excepted): those
modes carry no velocity information, and dropping them makes phi exactly
recoverable from v* by the spectral oracle.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import ScalarField, VectorField, curl2d, gradient
from .io import read_hfld, write_hfld
from .perlin import PerlinSpec, split_seed, turbulence
from .poisson import project_to_range

MANIFEST_NAME = "manifest.json"
DEFAULT_CHI_MEAN = 2e-4
DEFAULT_CHI_STD = 5e-5
DEFAULT_OCTAVE_SET = (1, 2, 3, 4, 5)


@dataclass
class SamplePair:
    """One training triple with its generating parameters."""

    v_star: VectorField
    v_sol_gt: VectorField
    v_irr_gt: VectorField
    phi_gt: ScalarField
    chi: float
    seed: int
    octaves_phi: int
    octaves_psi: int


def synthesize_sample(seed: int, height: int, width: int,
                      octaves_phi: int = 5, octaves_psi: int = 5,
                      chi: float = DEFAULT_CHI_MEAN) -> SamplePair:
    """Generate one flow sample with an exactly known decomposition."""
    if chi < 0:
        raise ValueError(f"chi must be non-negative, got {chi}")
    seed_phi = split_seed(seed, 1)
    seed_psi = split_seed(seed, 2)
    phi = turbulence(PerlinSpec(1, octaves_phi, seed_phi, height, width))
    mean = float(np.mean(phi.data))
    phi = project_to_range(phi)
    phi = ScalarField(phi.data + mean, phi.spacing)
    psi = turbulence(PerlinSpec(1, octaves_psi, seed_psi, height, width))
    v_irr = gradient(phi)
    v_sol = curl2d(psi)
    v_star = v_irr + chi * v_sol
    return SamplePair(v_star, v_sol, v_irr, phi, float(chi), seed,
                      octaves_phi, octaves_psi)


def sample_chi(rng: np.random.Generator,
               mean: float = DEFAULT_CHI_MEAN,
               std: float = DEFAULT_CHI_STD) -> float:
    """Draw the component-blend weight; non-positive draws are rejected."""
    while True:
        value = rng.normal(mean, std)
        if value > 0:
            return float(value)


def _sample_params(index: int, base_seed: int, chi_mean: float, chi_std: float,
                   octave_set: tuple[int, ...]) -> tuple[int, float, int, int]:
    seed = split_seed(base_seed, index)
    rng = np.random.default_rng(seed)
    chi = sample_chi(rng, chi_mean, chi_std)
    octaves_phi = int(rng.choice(octave_set))
    octaves_psi = int(rng.choice(octave_set))
    return seed, chi, octaves_phi, octaves_psi


def _write_sample(args) -> dict:
    index, seed, chi, octaves_phi, octaves_psi, height, width, out_dir = args
    pair = synthesize_sample(seed, height, width, octaves_phi, octaves_psi, chi)
    stem = f"sample_{index:06d}"
    out = Path(out_dir)
    try:
        write_hfld(out / f"{stem}.vstar.hfld", pair.v_star)
        write_hfld(out / f"{stem}.vsol.hfld", pair.v_sol_gt)
        write_hfld(out / f"{stem}.phi.hfld", pair.phi_gt)
    except OSError as exc:
        raise OSError(f"failed writing sample {index}: {exc}") from exc
    return {
        "index": index,
        "seed": seed,
        "chi": chi,
        "octaves_phi": octaves_phi,
        "octaves_psi": octaves_psi,
        "files": [f"{stem}.vstar.hfld", f"{stem}.vsol.hfld", f"{stem}.phi.hfld"],
    }


def generate_dataset(count: int, height: int, width: int, base_seed: int,
                     out_dir, chi_mean: float = DEFAULT_CHI_MEAN,
                     chi_std: float = DEFAULT_CHI_STD,
                     octave_set: tuple[int, ...] = DEFAULT_OCTAVE_SET,
                     workers: int = 1) -> dict:
    """Write `count` samples plus a manifest; bit-reproducible per base_seed."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = []
    for index in range(count):
        seed, chi, op, os_ = _sample_params(index, base_seed, chi_mean, chi_std,
                                            octave_set)
        jobs.append((index, seed, chi, op, os_, height, width, str(out)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_write_sample, jobs, chunksize=16))
    else:
        entries = [_write_sample(job) for job in jobs]
    manifest = {
        "version": 1,
        "count": count,
        "height": height,
        "width": width,
        "chi_mean": chi_mean,
        "chi_std": chi_std,
        "octave_set": list(octave_set),
        "base_seed": base_seed,
        "samples": entries,
    }
    with open(out / MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1)
    return manifest


def load_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / MANIFEST_NAME
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    for entry in manifest["samples"]:
        for name in entry["files"]:
            if not (Path(dataset_dir) / name).exists():
                raise FileNotFoundError(f"manifest lists missing file {name}")
    return manifest


def load_sample(dataset_dir, entry: dict) -> SamplePair:
    """Reload one sample from disk (float32 precision)."""
    base = Path(dataset_dir)
    v_star = read_hfld(base / entry["files"][0])
    v_sol = read_hfld(base / entry["files"][1])
    phi = read_hfld(base / entry["files"][2])
    chi = float(entry["chi"])
    v_irr = v_star - chi * v_sol
    return SamplePair(v_star, v_sol, v_irr, phi, chi, int(entry["seed"]),
                      int(entry["octaves_phi"]), int(entry["octaves_psi"]))
