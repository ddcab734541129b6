"""Exact Helmholtz decomposition via a spectral Poisson solve, plus a PCG solver.

The solver inverts the *composed* central-difference Laplacian div(grad(.)),
whose Fourier symbol is

    lambda(k, l) = -(sin^2(2 pi k / W) + sin^2(2 pi l / H)) / spacing^2,

so the decomposition identities hold to machine precision at any resolution.

On even-sized grids the symbol vanishes not only at the DC mode but also at
the three Nyquist corner modes (k in {0, W/2}) x (l in {0, H/2}); those modes
are invisible to the central-difference gradient and are assigned the zero
gauge, exactly as the additive constant is.  Divergences of discrete vector
fields never contain them, so the solve is exact for every right-hand side
arising from a decomposition.
"""

from __future__ import annotations

import numpy as np

from .fields import ScalarField, VectorField, divergence, gradient, laplacian


class PoissonError(ValueError):
    """Raised for right-hand sides incompatible with the periodic solve."""


def _axis_sin2(n: int) -> np.ndarray:
    k = np.arange(n)
    s = np.sin(2.0 * np.pi * k / n) ** 2
    # sin(pi) is ~1e-16 in floating point; the DC and Nyquist frequencies are
    # exact zeros of the stencil symbol and must be treated as such
    s[(2 * k) % n == 0] = 0.0
    return s


def _symbol(height: int, width: int, spacing: float) -> np.ndarray:
    sk = _axis_sin2(width)
    sl = _axis_sin2(height)
    return -(sk[None, :] + sl[:, None]) / spacing ** 2


def null_mask(height: int, width: int) -> np.ndarray:
    """Boolean Fourier-domain mask of the modes annihilated by the stencil."""
    return _symbol(height, width, 1.0) == 0.0


def project_to_range(f: ScalarField) -> ScalarField:
    """Remove the stencil's null modes (mean and, on even grids, Nyquist corners)."""
    spectrum = np.fft.fft2(f.data)
    spectrum[null_mask(f.height, f.width)] = 0.0
    return ScalarField(np.real(np.fft.ifft2(spectrum)), f.spacing)


def _check_solvable(f: ScalarField) -> None:
    fmax = np.max(np.abs(f.data))
    if fmax > 0 and abs(np.mean(f.data)) > 1e-6 * fmax:
        raise PoissonError(
            f"source mean {np.mean(f.data):.3e} incompatible with periodic "
            f"boundary (max |f| = {fmax:.3e})")


def _solve_spectral(f: ScalarField) -> ScalarField:
    lam = _symbol(f.height, f.width, f.spacing)
    spectrum = np.fft.fft2(f.data)
    singular = lam == 0.0
    lam[singular] = 1.0
    phi_hat = spectrum / lam
    phi_hat[singular] = 0.0
    return ScalarField(np.real(np.fft.ifft2(phi_hat)), f.spacing)


def solve_poisson(f: ScalarField) -> ScalarField:
    """Solve div(grad(phi)) = f on the periodic grid, zero-mean gauge."""
    f.validate()
    _check_solvable(f)
    return _solve_spectral(f)


def helmholtz_decompose(v: VectorField) -> tuple[ScalarField, VectorField, VectorField]:
    """Split v into a curl-free part grad(phi) and the divergence-free remainder.

    A discrete divergence has zero mean identically, so the solvability check
    is skipped (round-off dust would otherwise trip the relative threshold on
    near-solenoidal inputs).
    """
    phi = _solve_spectral(divergence(v))
    v_irr = gradient(phi)
    v_sol = v - v_irr
    return phi, v_irr, v_sol


def pcg_poisson(f: ScalarField, tol: float = 1e-10, max_iter: int = 2000,
                callback=None) -> ScalarField:
    """Jacobi-preconditioned conjugate gradients on the same stencil.

    Solves -div(grad(phi)) = -f (the SPD sign convention); iterates are
    projected onto the solvable subspace every step.  The wide stencil has a
    constant diagonal, so the Jacobi preconditioner reduces to a fixed scaling.
    """
    f.validate()
    _check_solvable(f)

    mask = null_mask(f.height, f.width)

    def project(a: np.ndarray) -> np.ndarray:
        spectrum = np.fft.fft2(a)
        spectrum[mask] = 0.0
        return np.real(np.fft.ifft2(spectrum))

    def apply_a(a: np.ndarray) -> np.ndarray:
        return -laplacian(ScalarField(a, f.spacing)).data

    b = project(-f.data)
    diag = 1.0 / f.spacing ** 2  # (2 + 2) / (4 h^2)

    x = np.zeros_like(b)
    r = b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return ScalarField(x, f.spacing)
    if callback is not None:
        callback(float(np.linalg.norm(r)))
    z = r / diag
    p = z.copy()
    rz = np.sum(r * z)
    for _ in range(max_iter):
        ap = apply_a(p)
        alpha = rz / np.sum(p * ap)
        x += alpha * p
        r -= alpha * ap
        if callback is not None:
            callback(float(np.linalg.norm(r)))
        if np.linalg.norm(r) <= tol * bnorm:
            return ScalarField(project(x), f.spacing)
        z = r / diag
        rz_new = np.sum(r * z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
        p = project(p)
    raise PoissonError(
        f"PCG did not converge in {max_iter} iterations "
        f"(relative residual {np.linalg.norm(r) / bnorm:.3e})")
