"""Shared fixtures: reference models, grids, and converged minimizers.

The reference setup is 1d, 32 unit cells x 32 points (1024 samples), a
quartic-sextic interaction with h=1, a=1, b=1/4 (bulk rate alpha = 1/2)
and a cosine potential of amplitude 0.1, giving binding margin 0.275.
"""

import numpy as np
import pytest

from hylomorph import (
    LatticeSpec,
    NkgModel,
    NlsModel,
    Nonlinearity,
    Potential,
    SolverOptions,
    build_grid,
    minimize_nkg,
    minimize_nls,
)

REF_SIGMA = 18.0


@pytest.fixture(scope="session")
def grid_1d():
    return build_grid(LatticeSpec(1, [[1.0]]), [32], [32])


@pytest.fixture(scope="session")
def grid_1d_fine():
    # 16 cells x 64 points: same box resolution style, finer cells
    return build_grid(LatticeSpec(1, [[1.0]]), [16], [64])


@pytest.fixture(scope="session")
def grid_2d():
    return build_grid(LatticeSpec(2, [[1.0, 0.0], [0.0, 1.0]]), [8, 8], [16, 16])


@pytest.fixture(scope="session")
def grid_lambda_star():
    # wide 1d box (inradius 16) able to hold the R = 12 plateau
    return build_grid(LatticeSpec(1, [[1.0]]), [32], [16])


@pytest.fixture(scope="session")
def nls_ref(grid_1d):
    return NlsModel(grid_1d, Potential(0.1), Nonlinearity(1.0, 1.0, 0.25))


@pytest.fixture(scope="session")
def nls_free(grid_1d):
    # no potential, same interaction
    return NlsModel(grid_1d, Potential(0.0), Nonlinearity(1.0, 1.0, 0.25))


@pytest.fixture(scope="session")
def nls_linear(grid_1d):
    # W = s^2/2 only: no binding
    return NlsModel(grid_1d, Potential(0.0), Nonlinearity(1.0))


@pytest.fixture(scope="session")
def nkg_ref(grid_1d):
    return NkgModel(grid_1d, Nonlinearity(1.0, 1.0, 0.25))


@pytest.fixture(scope="session")
def nls_soliton(nls_ref):
    result = minimize_nls(nls_ref, SolverOptions(sigma=REF_SIGMA, seed=7, restarts=3))
    assert result.converged
    return result


@pytest.fixture(scope="session")
def nkg_soliton(nkg_ref):
    result = minimize_nkg(nkg_ref, SolverOptions(sigma=REF_SIGMA, seed=7, restarts=2))
    assert result.converged
    return result


def random_field(grid, seed, smooth=True, fraction=0.25):
    """Seeded random complex field, band-limited by default."""
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    if not smooth:
        return raw
    mask = grid.ksq <= (fraction**2) * float(np.max(grid.ksq))
    return np.fft.ifftn(np.fft.fftn(raw) * mask)
