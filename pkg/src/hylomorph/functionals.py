"""Model definitions and the energy / charge functionals with densities.

Two models share one variational skeleton: energy splits into a quadratic
part (the squared norm used everywhere for distances) plus a superquadratic
remainder, while the charge is exactly quadratic.  Gradients are Fréchet
derivatives with respect to the real L2 pairing fixed by the grid weight.

NLS:  E = int( |grad u|^2/2 + V |u|^2 + W(|u|) ),      C = int |u|^2
NKG:  E = int( |psi_dot|^2/2 + |grad psi|^2/2 + W(x,|psi|) ),
      C = -Re int( i psi_dot conj(psi) )
with W(x,s) = h(x)^2 s^2 / 2 + N(s).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .lattice import Field, Grid, NkgState


class GridMismatchError(ValueError):
    """State and model are defined on incompatible grids."""


class ZeroChargeError(ValueError):
    """Energy/charge ratio requested for a state with vanishing charge."""


State = Union[Field, NkgState]


@dataclass
class Nonlinearity:
    """Radial interaction W(s) = h^2 s^2/2 - (a/4) s^4 + (b/6) s^6.

    The quadratic coefficient h^2 is the small-field mass scale; the
    quartic well and sextic cap produce binding while keeping W >= 0.
    Positivity requires b >= 3 a^2 / (16 h^2); construction rejects
    parameters that violate it.
    """

    h: float
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.h < 0:
            raise ValueError(f"h must be >= 0, got {self.h}")
        if self.a < 0 or self.b < 0:
            raise ValueError(f"a, b must be >= 0, got a={self.a}, b={self.b}")
        if self.a > 0:
            if self.b <= 0:
                raise ValueError("a > 0 requires b > 0 for W to stay bounded below")
            # min of 2 W(s)/s^2 over s is h^2 - 3 a^2 / (16 b)
            if self.h**2 - 3.0 * self.a**2 / (16.0 * self.b) < -1e-12:
                raise ValueError(
                    "W takes negative values: need b >= 3 a^2 / (16 h^2), "
                    f"got a={self.a}, b={self.b}, h={self.h}"
                )
        # numerical spot check of W >= 0 on a wide amplitude range
        s = np.linspace(0.0, 10.0 * (1.0 + self.root_scale()), 2001)
        if np.min(self.w(s)) < -1e-10 * max(1.0, self.h**2):
            raise ValueError("W takes negative values on the scan range")

    def root_scale(self) -> float:
        """Amplitude where the superquadratic part changes sign (0 if none)."""
        if self.a > 0 and self.b > 0:
            return float(np.sqrt(3.0 * self.a / (2.0 * self.b)))
        return 0.0

    def w(self, s):
        s2 = np.square(s)
        return 0.5 * self.h**2 * s2 - 0.25 * self.a * s2**2 + self.b / 6.0 * s2**3

    def n_part(self, s):
        """Superquadratic remainder N(s) = W(s) - h^2 s^2 / 2."""
        s2 = np.square(s)
        return -0.25 * self.a * s2**2 + self.b / 6.0 * s2**3

    def wprime_over_s(self, s):
        """W'(s)/s = h^2 - a s^2 + b s^4; smooth through s = 0."""
        s2 = np.square(s)
        return self.h**2 - self.a * s2 + self.b * s2**2


@dataclass
class Potential:
    """Product-cosine background V(x) = v0 prod_i (1 + cos 2 pi y_i) / 2.

    y = A^-1 x are fractional lattice coordinates, so V is exactly
    cell-periodic, bounded, with 0 <= V <= v0 and max V = v0 attained on
    the grid (at y = 0).
    """

    v0: float = 0.0

    def __post_init__(self):
        if self.v0 < 0 or not np.isfinite(self.v0):
            raise ValueError(f"v0 must be finite and >= 0, got {self.v0}")

    def sample_cell(self, points_per_cell) -> np.ndarray:
        axes = [
            0.5 * (1.0 + np.cos(2.0 * np.pi * np.arange(n) / n))
            for n in points_per_cell
        ]
        prod = axes[0]
        for a in axes[1:]:
            prod = np.multiply.outer(prod, a)
        return self.v0 * prod

    @property
    def sup(self) -> float:
        return self.v0


def _tile_cell(cell: np.ndarray, cells_per_dim) -> np.ndarray:
    """Tile a one-cell sample block across the box, bit-exactly periodic."""
    return np.tile(cell, cells_per_dim)


@dataclass
class NlsModel:
    """Schroedinger model: periodic potential plus radial nonlinearity."""

    grid: Grid
    potential: Potential
    nonlinearity: Nonlinearity

    def __post_init__(self):
        cell = self.potential.sample_cell(self.grid.points_per_cell)
        self.v_samples = _tile_cell(cell, self.grid.cells_per_dim)
        self.v_sup = self.potential.sup


@dataclass
class NkgModel:
    """Klein-Gordon model: cell-periodic mass h(x) plus radial nonlinearity.

    h(x) = h (1 + mass_eta prod_i (1 + cos 2 pi y_i)/2); mass_eta = 0 gives
    the constant-mass case.  min h(x) = h > 0 always.
    """

    grid: Grid
    nonlinearity: Nonlinearity
    mass_eta: float = 0.0

    def __post_init__(self):
        if self.mass_eta < 0:
            raise ValueError(f"mass_eta must be >= 0, got {self.mass_eta}")
        if self.nonlinearity.h <= 0:
            raise ValueError("NKG needs a strictly positive mass scale h")
        bump = Potential(1.0).sample_cell(self.grid.points_per_cell)
        cell = self.nonlinearity.h * (1.0 + self.mass_eta * bump)
        self.h_samples = _tile_cell(cell, self.grid.cells_per_dim)
        self.h_min = float(np.min(self.h_samples))
        self.h_max = float(np.max(self.h_samples))


Model = Union[NlsModel, NkgModel]


@dataclass
class FunctionalValue:
    """A functional together with its per-point density."""

    value: float
    density: np.ndarray


@dataclass
class Gradients:
    """First variations of energy and charge, in state shape."""

    energy: State
    charge: State


def _check_state(model: Model, state: State) -> None:
    if isinstance(model, NlsModel):
        if not isinstance(state, Field):
            raise GridMismatchError("NLS model expects a Field state")
        grid = state.grid
    else:
        if not isinstance(state, NkgState):
            raise GridMismatchError("NKG model expects an NkgState")
        grid = state.grid
    if grid is not model.grid and not grid.compatible(model.grid):
        raise GridMismatchError("state grid does not match model grid")


def pairing(grid: Grid, x: State, y: State) -> float:
    """Real L2 pairing fixed by the grid weight."""
    if isinstance(x, Field):
        return grid.integrate(np.real(np.conj(x.values) * y.values))
    return grid.integrate(
        np.real(np.conj(x.psi.values) * y.psi.values)
        + np.real(np.conj(x.psi_dot.values) * y.psi_dot.values)
    )


def energy(model: Model, state: State) -> FunctionalValue:
    """Total energy and its density."""
    _check_state(model, state)
    grid = model.grid
    if isinstance(model, NlsModel):
        u = state.values
        grad = grid.gradient(u)
        dens = 0.5 * sum(np.abs(g) ** 2 for g in grad)
        amp = np.abs(u)
        dens = dens + model.v_samples * amp**2 + model.nonlinearity.w(amp)
    else:
        psi = state.psi.values
        psi_dot = state.psi_dot.values
        grad = grid.gradient(psi)
        amp = np.abs(psi)
        dens = (
            0.5 * np.abs(psi_dot) ** 2
            + 0.5 * sum(np.abs(g) ** 2 for g in grad)
            + 0.5 * model.h_samples**2 * amp**2
            + model.nonlinearity.n_part(amp)
        )
    return FunctionalValue(grid.integrate(dens), dens)


def charge(model: Model, state: State) -> FunctionalValue:
    """Hylenic charge and its density."""
    _check_state(model, state)
    grid = model.grid
    if isinstance(model, NlsModel):
        dens = np.abs(state.values) ** 2
    else:
        # -Re(i psi_dot conj(psi)) = Im(psi_dot conj(psi))
        dens = np.imag(state.psi_dot.values * np.conj(state.psi.values))
    return FunctionalValue(grid.integrate(dens), dens)


def first_variation(model: Model, state: State) -> Gradients:
    """Gradients of E and C for the real L2 pairing of the grid.

    E(u + eps v) = E(u) + eps <grad_E, v> + O(eps^2), same for C.
    """
    _check_state(model, state)
    grid = model.grid
    if isinstance(model, NlsModel):
        u = state.values
        ge = (
            -grid.laplacian(u)
            + 2.0 * model.v_samples * u
            + model.nonlinearity.wprime_over_s(np.abs(u)) * u
        )
        return Gradients(Field(grid, ge), Field(grid, 2.0 * u))
    psi = state.psi.values
    psi_dot = state.psi_dot.values
    wp = (
        model.h_samples**2
        - model.nonlinearity.a * np.abs(psi) ** 2
        + model.nonlinearity.b * np.abs(psi) ** 4
    )
    ge = Field(grid, -grid.laplacian(psi) + wp * psi)
    return Gradients(
        NkgState(ge, Field(grid, psi_dot.astype(complex))),
        NkgState(Field(grid, -1j * psi_dot), Field(grid, 1j * psi)),
    )


def quadratic_norm(model: Model, state: State) -> float:
    """Squared norm int rho_E^(2): the full quadratic part of the energy density."""
    _check_state(model, state)
    grid = model.grid
    if isinstance(model, NlsModel):
        u = state.values
        grad = grid.gradient(u)
        dens = sum(np.abs(g) ** 2 for g in grad)
        dens = dens + (model.nonlinearity.h**2 + 2.0 * model.v_samples) * np.abs(u) ** 2
    else:
        grad = grid.gradient(state.psi.values)
        dens = sum(np.abs(g) ** 2 for g in grad)
        dens = (
            dens
            + np.abs(state.psi_dot.values) ** 2
            + model.h_samples**2 * np.abs(state.psi.values) ** 2
        )
    return grid.integrate(dens)


def hylomorphy_ratio(model: Model, state: State) -> float:
    """Energy per unit charge, E(u) / |C(u)|."""
    e = energy(model, state).value
    c = charge(model, state).value
    if abs(c) < 1e-30:
        raise ZeroChargeError("hylomorphy ratio undefined: charge vanishes")
    return e / abs(c)
