"""Flow evaluation metrics: angular error, divergence / curl MSE, relative L2."""

from __future__ import annotations

import numpy as np

from .fields import ScalarField, VectorField, curl, divergence


def aae(v_est: VectorField, v_gt: VectorField) -> float:
    """Average angular error in degrees between homogeneous vectors (u, w, 1).

    The appended unit component is the standard optical-flow convention; it
    keeps the metric finite for zero vectors but makes it scale-dependent.
    """
    if v_est.shape != v_gt.shape:
        raise ValueError(f"shape mismatch {v_est.shape} vs {v_gt.shape}")
    dot = v_est.u * v_gt.u + v_est.w * v_gt.w + 1.0
    n_est = np.sqrt(v_est.u ** 2 + v_est.w ** 2 + 1.0)
    n_gt = np.sqrt(v_gt.u ** 2 + v_gt.w ** 2 + 1.0)
    cosang = np.clip(dot / (n_est * n_gt), -1.0, 1.0)
    return float(np.degrees(np.mean(np.arccos(cosang))))


def div_mse(v: VectorField) -> float:
    """Mean squared divergence (against zero)."""
    return float(np.mean(divergence(v).data ** 2))


def curl_mse(v: VectorField) -> float:
    """Mean squared curl (against zero)."""
    return float(np.mean(curl(v).data ** 2))


def _flat(a) -> np.ndarray:
    if isinstance(a, VectorField):
        return np.concatenate([a.u.ravel(), a.w.ravel()])
    if isinstance(a, ScalarField):
        return a.data.ravel()
    return np.asarray(a, dtype=np.float64).ravel()


def rel_l2(a, b) -> float:
    """||a - b|| / ||b||; falls back to the absolute error when ||b|| = 0."""
    fa, fb = _flat(a), _flat(b)
    if fa.shape != fb.shape:
        raise ValueError(f"shape mismatch {fa.shape} vs {fb.shape}")
    nb = np.linalg.norm(fb)
    diff = np.linalg.norm(fa - fb)
    if nb == 0.0:
        return float(diff)
    return float(diff / nb)


def phase_error(phi_est: ScalarField, phi_gt: ScalarField) -> float:
    """Relative L2 error between potentials after removing each field's mean.

    The additive constant of a potential is pure gauge, so it is discarded
    before comparing.
    """
    a = phi_est.data - np.mean(phi_est.data)
    b = phi_gt.data - np.mean(phi_gt.data)
    return rel_l2(a, b)
