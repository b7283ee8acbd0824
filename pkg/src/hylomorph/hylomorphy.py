"""Existence diagnostics: binding rates, vacuum thresholds, concentration.

The machinery that decides whether charge-sigma minimizers can beat the
vacuum is made executable here:

* ``compute_alpha``      - best bulk energy-per-charge rate of the interaction
* ``estimate_e0``        - small-field rate over one lattice cell (threshold)
* ``lambda_star_upper``  - plateau test profiles bounding the global rate
* ``check_hylomorphy``   - the strict inequality that guarantees binding
* ``best_cell``          - mediant/concentration step over the cell covering
* ``splitting_defect``   - additivity of E, C over far-separated pieces
* ``dilation_scan``      - scaling behaviour of E, C, Lambda under x -> theta x
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .functionals import (
    Field,
    Model,
    NkgModel,
    NkgState,
    NlsModel,
    charge,
    energy,
)
from .lattice import Grid, build_grid, cell_sums


class ConvergenceError(RuntimeError):
    """An iterative eigensolve failed to reach tolerance."""


class BoxTooSmallError(ValueError):
    """The periodic box cannot hold the requested test profile."""


class NoChargedCellError(ValueError):
    """No cell carries charge of the dominant sign."""


@dataclass
class HylomorphyReport:
    """Scalar diagnostics for the binding inequality."""

    alpha: float
    e0_lower: float
    e0_upper: float
    e0_rayleigh: float
    lambda_star_upper: float
    margin: float
    passes: bool


@dataclass
class E0Estimate:
    lower: float
    upper: float
    rayleigh: float


@dataclass
class PlateauRow:
    radius: float
    amplitude: float
    energy: float
    charge: float
    lam: float


@dataclass
class DilationRow:
    theta: float
    energy: float
    charge: float
    lam: float


# ---------------------------------------------------------------------------
# alpha: inf over amplitudes of 2 W(s) / s^2
# ---------------------------------------------------------------------------


def _amplitude_ratio(model: Model) -> Callable[[np.ndarray], np.ndarray]:
    """2 W(s)/s^2 as a function of the amplitude s (sup over x for NKG)."""
    nl = model.nonlinearity
    if isinstance(model, NlsModel):
        base = nl.h**2
    else:
        # sup_x 2 W(x,s)/s^2 = (max h)^2 + 2 N(s)/s^2
        base = model.h_max**2
    return lambda s: base - 0.5 * nl.a * np.square(s) + nl.b / 3.0 * np.square(s) ** 2


def _alpha_argmin(model: Model, s_max: float | None = None) -> tuple[float, float]:
    """Return (alpha, argmin amplitude) of sqrt(inf 2W/s^2).

    Dense log-spaced scan followed by golden-section refinement; the
    s -> 0 limit (value h^2) participates through the smallest scan point.
    """
    ratio = _amplitude_ratio(model)
    nl = model.nonlinearity
    if s_max is None:
        s_max = 10.0 * nl.root_scale() if nl.root_scale() > 0 else 50.0
    s = np.geomspace(1e-6, s_max, 2048)
    vals = ratio(s)
    i = int(np.argmin(vals))
    if i == 0:
        # infimum attained in the small-amplitude limit
        lim = ratio(np.array(0.0))
        return float(math.sqrt(max(float(lim), 0.0))), 0.0
    lo = s[max(i - 1, 0)]
    hi = s[min(i + 1, len(s) - 1)]
    # golden-section minimization on [lo, hi]
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - gr * (b - a)
    d = a + gr * (b - a)
    fc, fd = float(ratio(np.array(c))), float(ratio(np.array(d)))
    while b - a > 1e-10:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = float(ratio(np.array(c)))
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = float(ratio(np.array(d)))
    s_star = 0.5 * (a + b)
    val = float(ratio(np.array(s_star)))
    return float(math.sqrt(max(val, 0.0))), float(s_star)


def compute_alpha(model: Model) -> float:
    """Best bulk rate alpha = sqrt(inf_s 2 W(s)/s^2); alpha <= h always."""
    return _alpha_argmin(model)[0]


# ---------------------------------------------------------------------------
# e0: small-field energy/charge rate over one periodic cell
# ---------------------------------------------------------------------------


def _single_cell_model(model: Model) -> Model:
    lat = model.grid.lattice
    cell_grid = build_grid(lat, [1] * lat.dim, model.grid.points_per_cell)
    if isinstance(model, NlsModel):
        return NlsModel(cell_grid, model.potential, model.nonlinearity)
    return NkgModel(cell_grid, model.nonlinearity, model.mass_eta)


def _rayleigh_minimize(
    grid: Grid,
    apply_h: Callable[[np.ndarray], np.ndarray],
    tol: float = 1e-12,
    max_iter: int = 20000,
) -> float:
    """Smallest Rayleigh quotient of a positive operator by preconditioned descent.

    Starts from the constant mode; the Fourier-diagonal preconditioner
    (1 + tau k^2)^-1 removes the stiffness of the kinetic part.
    """
    u = np.ones(grid.shape, dtype=complex)
    tau = 0.5
    pre = 1.0 / (1.0 + tau * grid.ksq)
    norm2 = grid.integrate(np.abs(u) ** 2)
    u /= math.sqrt(norm2)
    hu = apply_h(u)
    quot = grid.integrate(np.real(np.conj(u) * hu))
    for _ in range(max_iter):
        resid = hu - quot * u
        rnorm = math.sqrt(grid.integrate(np.abs(resid) ** 2))
        if rnorm <= tol * max(1.0, abs(quot)):
            return float(quot)
        step = np.fft.ifftn(np.fft.fftn(resid) * pre)
        cand = u - tau * step
        cand /= math.sqrt(grid.integrate(np.abs(cand) ** 2))
        hc = apply_h(cand)
        qc = grid.integrate(np.real(np.conj(cand) * hc))
        if qc <= quot + 1e-15:
            u, hu, quot = cand, hc, qc
            tau = min(tau * 1.1, 1e3)
            pre = 1.0 / (1.0 + tau * grid.ksq)
        else:
            tau *= 0.5
            pre = 1.0 / (1.0 + tau * grid.ksq)
            if tau < 1e-14:
                break
    raise ConvergenceError("Rayleigh quotient minimization did not converge")


def estimate_e0(model: Model) -> E0Estimate:
    """Bracket and minimize the one-cell small-field energy/charge rate.

    NLS: rate is the lowest periodic eigenvalue of -Lap/2 + h^2/2 + V on Q,
    bracketed by [h^2/2, h^2/2 + max V].  NKG: eliminating the optimal time
    derivative gives sqrt of the lowest eigenvalue of -Lap + h(x)^2,
    bracketed by [min h, max h].
    """
    cell = _single_cell_model(model)
    grid = cell.grid
    if isinstance(cell, NlsModel):
        pot = 0.5 * cell.nonlinearity.h**2 + cell.v_samples

        def apply_h(u):
            return -0.5 * grid.laplacian(u) + pot * u

        rayleigh = _rayleigh_minimize(grid, apply_h)
        lower = 0.5 * cell.nonlinearity.h**2
        upper = lower + cell.v_sup
        return E0Estimate(lower, upper, rayleigh)

    hsq = cell.h_samples**2

    def apply_h(u):
        return -grid.laplacian(u) + hsq * u

    lam = _rayleigh_minimize(grid, apply_h)
    return E0Estimate(cell.h_min, cell.h_max, float(math.sqrt(max(lam, 0.0))))


# ---------------------------------------------------------------------------
# lambda*: plateau-ramp test profiles
# ---------------------------------------------------------------------------


def plateau_values(grid: Grid, radius: float, amplitude: float) -> np.ndarray:
    """Radial plateau of the given amplitude, linear ramp to zero over one unit."""
    r = grid.minimum_image_radius()
    ramp = np.clip(radius + 1.0 - r, 0.0, 1.0)
    return (amplitude * ramp).astype(complex)


def plateau_scan(
    model: Model,
    radii: Sequence[float],
    amplitudes: Sequence[float] | None = None,
) -> list[PlateauRow]:
    """Evaluate the energy/charge rate on plateau-ramp profiles.

    For NKG the time derivative is set to -i alpha psi, the ansatz whose
    charge is alpha int |psi|^2.
    """
    grid = model.grid
    inradius = grid.inradius()
    for r in radii:
        if r <= 0:
            raise ValueError(f"plateau radius must be positive, got {r}")
        if r + 1.0 > inradius:
            raise BoxTooSmallError(
                f"box inradius {inradius:g} cannot hold plateau radius {r:g} + ramp"
            )
    if amplitudes is None:
        alpha, s_star = _alpha_argmin(model)
        if s_star <= 0:
            s_star = 1.0
        amplitudes = [f * s_star for f in (0.7, 0.85, 1.0, 1.15, 1.3)]
    else:
        alpha = _alpha_argmin(model)[0]

    rows: list[PlateauRow] = []
    for r in radii:
        for s in amplitudes:
            u = Field(grid, plateau_values(grid, float(r), float(s)))
            if isinstance(model, NlsModel):
                state = u
            else:
                state = NkgState(u, Field(grid, -1j * alpha * u.values))
            e = energy(model, state).value
            c = charge(model, state).value
            lam = e / abs(c) if abs(c) > 0 else math.inf
            rows.append(PlateauRow(float(r), float(s), e, c, lam))
    return rows


def default_radii(grid: Grid) -> list[float]:
    """Plateau radii that fit the box, coarsest spread up to the inradius."""
    r_max = grid.inradius() - 1.0
    radii = [r for r in (2.0, 4.0, 6.0, 8.0, 12.0, 16.0, 24.0) if r <= r_max]
    if not radii:
        if r_max <= 0:
            raise BoxTooSmallError(
                f"box inradius {grid.inradius():g} leaves no room for any plateau"
            )
        radii = [r_max]
    return radii


def lambda_star_upper(
    model: Model,
    radii: Sequence[float] | None = None,
    amplitudes: Sequence[float] | None = None,
) -> float:
    """Upper bound on the global energy/charge infimum from plateau profiles."""
    if radii is None:
        radii = default_radii(model.grid)
    rows = plateau_scan(model, radii, amplitudes)
    return min(row.lam for row in rows)


# ---------------------------------------------------------------------------
# the binding inequality
# ---------------------------------------------------------------------------


def check_hylomorphy(model: Model) -> HylomorphyReport:
    """Evaluate the strict inequality that guarantees bound minimizers.

    NLS: alpha^2/2 + max V < h^2/2; NKG: alpha < min h.  The margin is the
    slack of the inequality; the report also carries the computed one-cell
    threshold and the plateau upper bound for cross-checks.
    """
    alpha = compute_alpha(model)
    e0 = estimate_e0(model)
    try:
        lam_star = lambda_star_upper(model)
    except BoxTooSmallError:
        lam_star = math.nan
    if isinstance(model, NlsModel):
        margin = 0.5 * model.nonlinearity.h**2 - 0.5 * alpha**2 - model.v_sup
    else:
        margin = model.h_min - alpha
    return HylomorphyReport(
        alpha=alpha,
        e0_lower=e0.lower,
        e0_upper=e0.upper,
        e0_rayleigh=e0.rayleigh,
        lambda_star_upper=lam_star,
        margin=float(margin),
        passes=bool(margin > 0),
    )


# ---------------------------------------------------------------------------
# concentration, splitting, dilation
# ---------------------------------------------------------------------------


def best_cell(model: Model, state) -> tuple[tuple[int, ...], float]:
    """Cell with the smallest energy/charge rate among charged cells.

    Cells are filtered to those whose charge has the sign of the total,
    mirroring the mediant step of the concentration argument; the returned
    rate never exceeds the aggregate rate over the filtered cells.
    """
    e_cells = cell_sums(model.grid, energy(model, state).density)
    c_cells = cell_sums(model.grid, charge(model, state).density)
    total = float(np.sum(c_cells))
    sign = 1.0 if total >= 0 else -1.0
    signed = sign * c_cells
    mask = signed > 0
    if not np.any(mask):
        raise NoChargedCellError("no cell carries charge of the dominant sign")
    ratios = np.full(e_cells.shape, np.inf)
    ratios[mask] = e_cells[mask] / signed[mask]
    flat = int(np.argmin(ratios))
    idx = np.unravel_index(flat, e_cells.shape)
    return tuple(int(i) for i in idx), float(ratios[idx])


def _add_states(u, w):
    if isinstance(u, Field):
        return Field(u.grid, u.values + w.values)
    return NkgState(
        Field(u.grid, u.psi.values + w.psi.values),
        Field(u.grid, u.psi_dot.values + w.psi_dot.values),
    )


def splitting_defect(model: Model, u, w) -> tuple[float, float]:
    """Additivity defects E(u+w) - E(u) - E(w) and the same for C.

    Both vanish (to quadrature roundoff) when the supports are disjoint;
    for overlapping bumps they decay with the separation.
    """
    both = _add_states(u, w)
    de = energy(model, both).value - energy(model, u).value - energy(model, w).value
    dc = charge(model, both).value - charge(model, u).value - charge(model, w).value
    return float(de), float(dc)


def gaussian_profile(width: float = 1.0, amplitude: float = 1.0) -> Callable:
    """Radial Gaussian amplitude -> callable r -> amplitude exp(-r^2/(2 width^2))."""

    def profile(r):
        return amplitude * np.exp(-np.square(r) / (2.0 * width**2))

    return profile


def plateau_profile(radius: float, amplitude: float = 1.0) -> Callable:
    """Radial plateau with unit ramp, as a callable of the radius."""

    def profile(r):
        return amplitude * np.clip(radius + 1.0 - r, 0.0, 1.0)

    return profile


def dilation_scan(
    model: NlsModel,
    profile: Callable[[np.ndarray], np.ndarray],
    thetas: Sequence[float],
) -> list[DilationRow]:
    """Evaluate E, C, Lambda on analytically dilated radial profiles u(theta r).

    The profile is re-evaluated per theta (never resampled from the grid),
    so the scan is free of interpolation error.
    """
    if not isinstance(model, NlsModel):
        raise TypeError("dilation_scan applies to the NLS model only")
    r = model.grid.minimum_image_radius()
    rows: list[DilationRow] = []
    for theta in thetas:
        if theta <= 0:
            raise ValueError(f"dilation parameter must be positive, got {theta}")
        u = Field(model.grid, np.asarray(profile(theta * r), dtype=complex))
        e = energy(model, u).value
        c = charge(model, u).value
        lam = e / abs(c) if abs(c) > 0 else math.inf
        rows.append(DilationRow(float(theta), e, c, lam))
    return rows
