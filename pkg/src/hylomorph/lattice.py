"""Lattice geometry and the discrete periodic sample grid.

Space is tiled by cells Q = A [0,1)^d of an invertible cell map A; the
computational box is a whole number of cells per direction with periodic
wrap-around, so lattice translations act on sampled fields as exact index
rolls.  All integrals use the uniform quadrature weight |det A| / prod(n)
per point, which fixes the integral convention for the whole package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _as_int_tuple(v, dim: int, name: str) -> tuple[int, ...]:
    arr = np.asarray(v, dtype=np.int64).ravel()
    if arr.size != dim:
        raise ValueError(f"{name} must have {dim} entries, got {arr.size}")
    return tuple(int(x) for x in arr)


@dataclass
class LatticeSpec:
    """Cell map of the lattice: cells Q = A [0,1)^d, shifts x -> x + A z."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"lattice dim must be 1, 2 or 3, got {self.dim}")
        A = np.asarray(self.matrix, dtype=float)
        if A.shape != (self.dim, self.dim):
            raise ValueError(
                f"lattice matrix must be {self.dim}x{self.dim}, got {A.shape}"
            )
        if not np.all(np.isfinite(A)):
            raise ValueError("lattice matrix has non-finite entries")
        det = np.linalg.det(A)
        scale = np.linalg.norm(A) ** self.dim
        if abs(det) <= 1e-12 * max(scale, 1e-300):
            raise ValueError(f"lattice matrix is numerically singular (det={det:g})")
        self.matrix = A
        self.inverse = np.linalg.inv(A)
        self.det = float(det)
        self.cell_volume = float(abs(det))


@dataclass
class Grid:
    """Periodic tensor grid over whole lattice cells, with quadrature.

    Points are x = A(q0 + j) with q0 on the uniform fractional mesh
    l/n (l = 0..n-1) and j the integer cell index; direction i wraps with
    period cells_per_dim[i].
    """

    lattice: LatticeSpec
    cells_per_dim: tuple[int, ...]
    points_per_cell: tuple[int, ...]

    def __post_init__(self):
        d = self.lattice.dim
        self.cells_per_dim = _as_int_tuple(self.cells_per_dim, d, "cells_per_dim")
        self.points_per_cell = _as_int_tuple(self.points_per_cell, d, "points_per_cell")
        if any(m < 1 for m in self.cells_per_dim):
            raise ValueError(f"cells_per_dim must be >= 1, got {self.cells_per_dim}")
        if any(n < 2 for n in self.points_per_cell):
            raise ValueError(f"points_per_cell must be >= 2, got {self.points_per_cell}")
        self.dim = d
        self.shape = tuple(
            m * n for m, n in zip(self.cells_per_dim, self.points_per_cell)
        )
        self.total_points = int(np.prod(self.shape))
        self.weight = self.lattice.cell_volume / float(np.prod(self.points_per_cell))
        self.box_volume = float(np.prod(self.cells_per_dim)) * self.lattice.cell_volume

        # fractional coordinates y in [0, m_i) per axis; x = A y
        self.fractional_axes = [
            np.arange(N) / n for N, n in zip(self.shape, self.points_per_cell)
        ]
        mesh = np.meshgrid(*self.fractional_axes, indexing="ij")
        frac = np.stack(mesh, axis=-1)
        self.points = frac @ self.lattice.matrix.T
        self.box_center = self.lattice.matrix @ (
            np.asarray(self.cells_per_dim, dtype=float) / 2.0
        )

        # spectral wavevectors: y-frequencies per axis, mapped by A^-T
        k_axes = [
            2.0 * np.pi * np.fft.fftfreq(N, d=1.0 / n)
            for N, n in zip(self.shape, self.points_per_cell)
        ]
        kmesh = np.meshgrid(*k_axes, indexing="ij")
        invA = self.lattice.inverse
        self.wavevectors = [
            sum(invA[i, a] * kmesh[i] for i in range(d)) for a in range(d)
        ]
        self.ksq = sum(np.abs(k) ** 2 for k in self.wavevectors)

    # -- quadrature ---------------------------------------------------------

    def integrate(self, density: np.ndarray) -> float:
        """Quadrature sum of a per-point density over the box."""
        return float(self.weight * np.sum(density))

    # -- spectral calculus --------------------------------------------------

    def gradient(self, values: np.ndarray) -> list[np.ndarray]:
        """Cartesian gradient components by Fourier differentiation."""
        vhat = np.fft.fftn(values)
        return [np.fft.ifftn(1j * k * vhat) for k in self.wavevectors]

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        """Periodic spectral Laplacian."""
        return np.fft.ifftn(-self.ksq * np.fft.fftn(values))

    # -- geometry helpers ----------------------------------------------------

    def compatible(self, other: "Grid") -> bool:
        return (
            self.shape == other.shape
            and self.cells_per_dim == other.cells_per_dim
            and np.array_equal(self.lattice.matrix, other.lattice.matrix)
        )

    def minimum_image_radius(self) -> np.ndarray:
        """Distance of every point from the box center, shortest periodic image."""
        m = np.asarray(self.cells_per_dim, dtype=float)
        mesh = np.meshgrid(*self.fractional_axes, indexing="ij")
        frac = np.stack(mesh, axis=-1)
        # fractional offset from the center, wrapped to [-m/2, m/2)
        delta = (frac - m / 2.0) % m
        delta = np.where(delta >= m / 2.0, delta - m, delta)
        offset = delta @ self.lattice.matrix.T
        return np.sqrt(np.sum(offset**2, axis=-1))

    def inradius(self) -> float:
        """Radius of the largest ball around the center inside one period."""
        # half the shortest box height: distance between opposite box faces
        B = self.lattice.matrix * np.asarray(self.cells_per_dim, dtype=float)
        invB = np.linalg.inv(B)
        heights = 1.0 / np.linalg.norm(invB, axis=1)
        return float(0.5 * np.min(heights))


@dataclass
class Field:
    """Complex scalar field sampled on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise ValueError(
                f"field values shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(v.view(float) if v.dtype.kind == "c" else v)):
            raise ValueError("field has non-finite entries")
        self.values = v

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


@dataclass
class NkgState:
    """Klein-Gordon phase-space point: field and its time derivative."""

    psi: Field
    psi_dot: Field

    def __post_init__(self):
        if not self.psi.grid.compatible(self.psi_dot.grid):
            raise ValueError("psi and psi_dot live on different grids")

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    def copy(self) -> "NkgState":
        return NkgState(self.psi.copy(), self.psi_dot.copy())


def build_grid(lattice: LatticeSpec, cells_per_dim, points_per_cell) -> Grid:
    """Construct the periodic sample grid of m whole cells, n points each."""
    return Grid(lattice, cells_per_dim, points_per_cell)


def cell_of(lattice: LatticeSpec, x) -> tuple[np.ndarray, np.ndarray]:
    """Decompose a point as x = q + A j with j integer and q in the base cell."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != lattice.dim:
        raise ValueError(f"point must have {lattice.dim} coordinates, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite coordinates")
    y = lattice.inverse @ x
    j = np.floor(y).astype(np.int64)
    q = x - lattice.matrix @ j.astype(float)
    return j, q


def translate(u: Field, z) -> Field:
    """Lattice translation: values of u at x + A z, wrapped periodically."""
    z = _as_int_tuple(z, u.grid.dim, "z")
    shifts = tuple(-zi * ni for zi, ni in zip(z, u.grid.points_per_cell))
    return Field(u.grid, np.roll(u.values, shifts, axis=tuple(range(u.grid.dim))))


def translate_state(state: NkgState, z) -> NkgState:
    return NkgState(translate(state.psi, z), translate(state.psi_dot, z))


def cell_sums(grid: Grid, density: np.ndarray) -> np.ndarray:
    """Per-cell quadrature totals of a density, indexed by the cell index j."""
    density = np.asarray(density)
    if density.shape != grid.shape:
        raise ValueError(
            f"density shape {density.shape} does not match grid shape {grid.shape}"
        )
    split = []
    for m, n in zip(grid.cells_per_dim, grid.points_per_cell):
        split.extend((m, n))
    blocks = density.reshape(split)
    # sum out the intra-cell axes (1, 3, 5, ...)
    return grid.weight * blocks.sum(axis=tuple(range(1, 2 * grid.dim, 2)))
