"""hylomorph: charge-constrained solitary waves on lattice-periodic backgrounds.

A numerical laboratory for computing energy minimizers at fixed hylenic
charge (Q-balls / standing solitary waves) of the nonlinear Schroedinger
and nonlinear Klein-Gordon equations with cell-periodic coefficients, and
for probing the diagnostics that govern their existence and stability.
"""

__version__ = "0.1.0"

from .dynamics import (
    CflError,
    OrbitReference,
    StabilityReport,
    Trajectory,
    evolve,
    evolve_nkg,
    evolve_nls,
    fit_phase_rate,
    lyapunov,
    make_reference,
    nkg_cfl_limit,
    orbit_distance,
    stability_experiment,
)
from .functionals import (
    FunctionalValue,
    Gradients,
    GridMismatchError,
    NkgModel,
    NlsModel,
    Nonlinearity,
    Potential,
    ZeroChargeError,
    charge,
    energy,
    first_variation,
    hylomorphy_ratio,
    pairing,
    quadratic_norm,
)
from .hylomorphy import (
    BoxTooSmallError,
    DilationRow,
    E0Estimate,
    HylomorphyReport,
    NoChargedCellError,
    PlateauRow,
    best_cell,
    check_hylomorphy,
    compute_alpha,
    dilation_scan,
    estimate_e0,
    gaussian_profile,
    lambda_star_upper,
    plateau_profile,
    plateau_scan,
    splitting_defect,
)
from .lattice import (
    Field,
    Grid,
    LatticeSpec,
    NkgState,
    build_grid,
    cell_of,
    cell_sums,
    translate,
    translate_state,
)
from .snapshots import (
    RawSnapshot,
    SnapshotFormatError,
    read_raw_snapshot,
    read_snapshot,
    write_snapshot,
)
from .solver import (
    SolitonResult,
    SolverOptions,
    SweepRow,
    minimize,
    minimize_nkg,
    minimize_nls,
    sigma_sweep,
    soliton_state,
)
