"""Discrete 2D fields on a periodic grid and finite-difference vector calculus.

All operators use second-order central differences with periodic wrap, so the
discrete identities curl(grad) = 0 and div(curl) = 0 hold to round-off, and
grad/div/curl commute with the spectral Poisson solver.

Array convention: ``data[i, j]`` with ``i`` the row (y) index and ``j`` the
column (x) index.  Velocity component ``u`` points along x (columns), ``w``
along y (rows).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class FieldError(ValueError):
    """Raised for invalid field data (shape mismatch, non-finite values)."""


def _check_finite(data: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(data)):
        bad = tuple(int(k) for k in np.argwhere(~np.isfinite(data))[0])
        raise FieldError(f"{name} contains non-finite value at index {bad}")


@dataclass
class ScalarField:
    """A real scalar quantity sampled on a width x height periodic grid."""

    data: np.ndarray
    spacing: float | None = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise FieldError(f"scalar field must be 2D, got shape {self.data.shape}")
        if self.spacing is None:
            self.spacing = 1.0 / self.width
        if self.spacing <= 0:
            raise FieldError(f"spacing must be positive, got {self.spacing}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def validate(self) -> "ScalarField":
        _check_finite(self.data, "scalar field")
        return self

    @classmethod
    def zeros(cls, height: int, width: int, spacing: float | None = None) -> "ScalarField":
        return cls(np.zeros((height, width)), spacing)

    @classmethod
    def full(cls, height: int, width: int, value: float, spacing: float | None = None) -> "ScalarField":
        return cls(np.full((height, width), float(value)), spacing)


@dataclass
class VectorField:
    """A 2-component velocity field; u along x (columns), w along y (rows)."""

    u: np.ndarray
    w: np.ndarray
    spacing: float | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.u.ndim != 2 or self.u.shape != self.w.shape:
            raise FieldError(
                f"u and w must be 2D with identical shapes, got {self.u.shape} vs {self.w.shape}"
            )
        if self.spacing is None:
            self.spacing = 1.0 / self.width
        if self.spacing <= 0:
            raise FieldError(f"spacing must be positive, got {self.spacing}")

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape

    def validate(self) -> "VectorField":
        _check_finite(self.u, "vector field (u)")
        _check_finite(self.w, "vector field (w)")
        return self

    @classmethod
    def zeros(cls, height: int, width: int, spacing: float | None = None) -> "VectorField":
        return cls(np.zeros((height, width)), np.zeros((height, width)), spacing)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u + other.u, self.w + other.w, self.spacing)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u - other.u, self.w - other.w, self.spacing)

    def __mul__(self, scalar: float) -> "VectorField":
        return VectorField(self.u * scalar, self.w * scalar, self.spacing)

    __rmul__ = __mul__

    def norm(self) -> float:
        """Discrete L2 norm sqrt(sum(u^2 + w^2))."""
        return float(np.sqrt(np.sum(self.u ** 2) + np.sum(self.w ** 2)))

    def inner(self, other: "VectorField") -> float:
        return float(np.sum(self.u * other.u) + np.sum(self.w * other.w))


# -- central-difference stencils (periodic) ----------------------------------

def ddx(a: np.ndarray, spacing: float) -> np.ndarray:
    """Central difference along x (last axis), periodic wrap."""
    return (np.roll(a, -1, axis=-1) - np.roll(a, 1, axis=-1)) / (2.0 * spacing)


def ddy(a: np.ndarray, spacing: float) -> np.ndarray:
    """Central difference along y (second-to-last axis), periodic wrap."""
    return (np.roll(a, -1, axis=-2) - np.roll(a, 1, axis=-2)) / (2.0 * spacing)


def gradient(phi: ScalarField) -> VectorField:
    """(d/dx, d/dy) of a scalar potential; the irrotational field it generates."""
    phi.validate()
    return VectorField(ddx(phi.data, phi.spacing), ddy(phi.data, phi.spacing), phi.spacing)


def divergence(v: VectorField) -> ScalarField:
    """du/dx + dw/dy."""
    v.validate()
    return ScalarField(ddx(v.u, v.spacing) + ddy(v.w, v.spacing), v.spacing)


def curl(v: VectorField) -> ScalarField:
    """Scalar 2D curl dw/dx - du/dy."""
    v.validate()
    return ScalarField(ddx(v.w, v.spacing) - ddy(v.u, v.spacing), v.spacing)


def curl2d(Phi: ScalarField) -> VectorField:
    """(dPhi/dy, -dPhi/dx); the divergence-free field generated by a stream function."""
    Phi.validate()
    return VectorField(ddy(Phi.data, Phi.spacing), -ddx(Phi.data, Phi.spacing), Phi.spacing)


def laplacian(phi: ScalarField) -> ScalarField:
    """div(grad(phi)): the wide 5-point Laplacian implied by central differences."""
    return divergence(gradient(phi))
