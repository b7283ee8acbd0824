"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
report.  Tolerances are fixed here, not tuned at run time.
"""

import math
import time

import numpy as np

from hylomorph import (
    Field,
    LatticeSpec,
    NkgModel,
    NkgState,
    NlsModel,
    Nonlinearity,
    Potential,
    SolverOptions,
    best_cell,
    build_grid,
    charge,
    check_hylomorphy,
    compute_alpha,
    energy,
    estimate_e0,
    evolve_nkg,
    evolve_nls,
    first_variation,
    fit_phase_rate,
    hylomorphy_ratio,
    lambda_star_upper,
    lyapunov,
    make_reference,
    minimize_nkg,
    minimize_nls,
    nkg_cfl_limit,
    orbit_distance,
    pairing,
    quadratic_norm,
    read_snapshot,
    soliton_state,
    splitting_defect,
    translate,
    write_snapshot,
)
from hylomorph.cli import main as cli_main
from conftest import REF_SIGMA, random_field
from oracles import alpha_closed_form, nkg_joint_minimize

CHECKS: list[tuple[str, bool, str]] = []


def report(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


def test_criterion_01_hylomorphy_arithmetic(grid_1d):
    t0 = time.perf_counter()
    model = NlsModel(grid_1d, Potential(0.0), Nonlinearity(1.0, 1.0, 0.25))
    alpha = compute_alpha(model)
    m1 = check_hylomorphy(
        NlsModel(grid_1d, Potential(0.1), Nonlinearity(1.0, 1.0, 0.25))
    ).margin
    m4 = check_hylomorphy(
        NlsModel(grid_1d, Potential(0.4), Nonlinearity(1.0, 1.0, 0.25))
    ).margin
    elapsed = time.perf_counter() - t0
    ok = (
        abs(alpha - alpha_closed_form(1.0, 1.0, 0.25)) <= 1e-6
        and abs(alpha - 0.5) <= 1e-6
        and abs(m1 - 0.275) <= 1e-6
        and abs(m4 - (-0.025)) <= 1e-6
        and elapsed < 1.0
    )
    report(
        1,
        ok,
        f"alpha={alpha:.8f} margins=({m1:.6f}, {m4:.6f}) in {elapsed:.2f}s",
    )


def test_criterion_02_e0_bracketing(grid_1d):
    t0 = time.perf_counter()
    rates = {}
    ok = True
    for v0 in (0.0, 0.1, 0.3):
        model = NlsModel(grid_1d, Potential(v0), Nonlinearity(1.0, 1.0, 0.25))
        est = estimate_e0(model)
        rates[v0] = est.rayleigh
        ok &= 0.5 - 1e-9 <= est.rayleigh <= 0.5 + v0 + 1e-9
    ok &= abs(rates[0.0] - 0.5) <= 1e-9
    nkg = NkgModel(grid_1d, Nonlinearity(1.0, 1.0, 0.25))
    est = estimate_e0(nkg)
    ok &= est.rayleigh >= nkg.h_min - 1e-9
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 10.0
    report(
        2,
        ok,
        "rayleigh(v0)="
        + ", ".join(f"{v}:{r:.6f}" for v, r in rates.items())
        + f" nkg={est.rayleigh:.6f} in {elapsed:.2f}s",
    )


def test_criterion_03_test_profile_bound(grid_lambda_star):
    t0 = time.perf_counter()
    nls = NlsModel(grid_lambda_star, Potential(0.0), Nonlinearity(1.0, 1.0, 0.25))
    lam_nls = lambda_star_upper(nls, [12.0])
    nkg = NkgModel(grid_lambda_star, Nonlinearity(1.0, 1.0, 0.25))
    lam_nkg = lambda_star_upper(nkg, [12.0])
    elapsed = time.perf_counter() - t0
    target_nls = 0.5**2 / 2.0
    target_nkg = 0.5
    ok_nls = abs(lam_nls - target_nls) <= 0.10 * target_nls
    ok_nkg = abs(lam_nkg - target_nkg) <= 0.10 * target_nkg
    ok = ok_nls and ok_nkg and elapsed < 5.0
    report(
        3,
        ok,
        f"NLS {lam_nls:.5f} vs {target_nls:.5f} "
        f"({abs(lam_nls - target_nls) / target_nls:.1%} off), "
        f"NKG {lam_nkg:.5f} vs {target_nkg:.5f} "
        f"({abs(lam_nkg - target_nkg) / target_nkg:.1%} off) in {elapsed:.2f}s",
    )


def test_criterion_04_gradient_correctness(grid_1d, nls_ref, nkg_ref):
    eps = 1e-5
    worst = 0.0
    ok = True
    for seed in range(20):
        u = Field(grid_1d, random_field(grid_1d, 1000 + seed))
        v = Field(grid_1d, random_field(grid_1d, 2000 + seed))
        gr = first_variation(nls_ref, u)
        e0 = energy(nls_ref, u).value
        up = Field(grid_1d, u.values + eps * v.values)
        um = Field(grid_1d, u.values - eps * v.values)
        fd = (energy(nls_ref, up).value - energy(nls_ref, um).value) / (2 * eps)
        err = abs(pairing(grid_1d, gr.energy, v) - fd) / (1 + abs(e0))
        worst = max(worst, err)
        ok &= err <= 1e-5

        st = NkgState(
            Field(grid_1d, random_field(grid_1d, 3000 + seed)),
            Field(grid_1d, random_field(grid_1d, 4000 + seed)),
        )
        dv = NkgState(
            Field(grid_1d, random_field(grid_1d, 5000 + seed)),
            Field(grid_1d, random_field(grid_1d, 6000 + seed)),
        )
        gk = first_variation(nkg_ref, st)
        ek = energy(nkg_ref, st).value
        plus = NkgState(
            Field(grid_1d, st.psi.values + eps * dv.psi.values),
            Field(grid_1d, st.psi_dot.values + eps * dv.psi_dot.values),
        )
        minus = NkgState(
            Field(grid_1d, st.psi.values - eps * dv.psi.values),
            Field(grid_1d, st.psi_dot.values - eps * dv.psi_dot.values),
        )
        fdk = (energy(nkg_ref, plus).value - energy(nkg_ref, minus).value) / (2 * eps)
        errk = abs(pairing(grid_1d, gk.energy, dv) - fdk) / (1 + abs(ek))
        worst = max(worst, errk)
        ok &= errk <= 1e-5
    report(4, ok, f"20 seeded fields per model, worst relative error {worst:.2e}")


def test_criterion_05_minimizer_certification(nls_ref, nkg_ref):
    t0 = time.perf_counter()
    res = minimize_nls(nls_ref, SolverOptions(sigma=REF_SIGMA, seed=7, restarts=3))
    t_nls = time.perf_counter() - t0
    e0_nls = estimate_e0(nls_ref).rayleigh
    ok = (
        res.converged
        and res.residual <= 1e-6
        and abs(res.charge - REF_SIGMA) <= 1e-10 * REF_SIGMA
        and res.lam < e0_nls
        and t_nls < 60.0
    )
    t0 = time.perf_counter()
    rk = minimize_nkg(nkg_ref, SolverOptions(sigma=REF_SIGMA, seed=7, restarts=2))
    t_nkg = time.perf_counter() - t0
    g = nkg_ref.grid
    psi = rk.profile.values
    lhs = -g.laplacian(psi) + nkg_ref.nonlinearity.wprime_over_s(np.abs(psi)) * psi
    ella = np.linalg.norm(lhs - rk.omega**2 * psi) / np.linalg.norm(rk.omega**2 * psi)
    e0_nkg = estimate_e0(nkg_ref).rayleigh
    ok &= (
        rk.converged
        and ella <= 1e-6
        and abs(rk.charge - REF_SIGMA) <= 1e-10 * REF_SIGMA
        and rk.lam < e0_nkg
        and t_nkg < 60.0
    )
    report(
        5,
        ok,
        f"NLS resid={res.residual:.1e} lam={res.lam:.4f}<e0={e0_nls:.4f} ({t_nls:.1f}s); "
        f"NKG ella={ella:.1e} lam={rk.lam:.4f}<e0={e0_nkg:.4f} ({t_nkg:.1f}s)",
    )


def test_criterion_06_nkg_reduction_oracle():
    grid = build_grid(LatticeSpec(1, [[1.0]]), [8], [4])
    model = NkgModel(grid, Nonlinearity(1.0, 1.0, 0.25))
    sigma = 2.0
    reduced = minimize_nkg(
        model, SolverOptions(sigma=sigma, seed=3, restarts=2, tol=1e-6, max_iter=20000)
    )
    e_joint, _, _ = nkg_joint_minimize(grid, model.h_samples**2, model.nonlinearity, sigma)
    gap = abs(e_joint - reduced.energy)
    report(6, gap <= 1e-8, f"|E_joint - E_reduced| = {gap:.2e} on a 32-point grid")


def test_criterion_07_standing_wave(nls_ref, nls_soliton, nkg_ref, nkg_soliton):
    t0 = time.perf_counter()
    ref = make_reference(nls_ref, nls_soliton)
    traj = evolve_nls(
        nls_ref, nls_soliton.profile, 1e-3, 10000, stride=100,
        reference=ref, store_fields=True,
    )
    base = np.abs(nls_soliton.profile.values)
    amp_nls = max(
        np.linalg.norm(np.abs(s.values) - base) / np.linalg.norm(base)
        for _, s in traj.snapshots
    )
    om_nls = -fit_phase_rate(traj)
    ok = amp_nls <= 1e-3 and abs(om_nls - nls_soliton.omega) <= 0.01 * nls_soliton.omega

    refk = make_reference(nkg_ref, nkg_soliton)
    trk = evolve_nkg(
        nkg_ref, soliton_state(nkg_ref, nkg_soliton), 1e-3, 10000, stride=100,
        reference=refk, store_fields=True,
    )
    basek = np.abs(nkg_soliton.profile.values)
    amp_nkg = max(
        np.linalg.norm(np.abs(s.psi.values) - basek) / np.linalg.norm(basek)
        for _, s in trk.snapshots
    )
    om_nkg = -fit_phase_rate(trk)
    elapsed = time.perf_counter() - t0
    ok &= (
        amp_nkg <= 1e-3
        and abs(om_nkg - nkg_soliton.omega) <= 0.01 * nkg_soliton.omega
        and elapsed < 120.0
    )
    report(
        7,
        ok,
        f"NLS amp drift {amp_nls:.1e}, omega fit {om_nls:.6f}/{nls_soliton.omega:.6f}; "
        f"NKG amp drift {amp_nkg:.1e}, omega fit {om_nkg:.6f}/{nkg_soliton.omega:.6f} "
        f"in {elapsed:.0f}s",
    )


def test_criterion_08_conservation(nls_ref, nls_soliton, nkg_ref, nkg_soliton):
    traj = evolve_nls(nls_ref, nls_soliton.profile, 1e-3, 10000, stride=500)
    c_drift = np.max(np.abs(traj.charge - traj.charge[0])) / abs(traj.charge[0])
    e_drift = np.max(np.abs(traj.energy - traj.energy[0])) / abs(traj.energy[0])
    ok = c_drift <= 1e-12 and e_drift <= 1e-6

    st = soliton_state(nkg_ref, nkg_soliton)
    dt = nkg_cfl_limit(nkg_ref) / 10.0
    trk = evolve_nkg(nkg_ref, st, dt, 10000, stride=500)
    ck = np.max(np.abs(trk.charge - trk.charge[0])) / abs(trk.charge[0])
    ek = np.max(np.abs(trk.energy - trk.energy[0])) / abs(trk.energy[0])
    ok &= ck <= 1e-6 and ek <= 1e-5

    fwd = evolve_nkg(nkg_ref, st, 1e-3, 500, stride=500, store_fields=True)
    back = evolve_nkg(
        nkg_ref, fwd.snapshots[-1][1], -1e-3, 500, stride=500, store_fields=True
    )
    rt = back.snapshots[-1][1]
    rt_err = max(
        float(np.max(np.abs(rt.psi.values - st.psi.values))),
        float(np.max(np.abs(rt.psi_dot.values - st.psi_dot.values))),
    )
    ok &= rt_err <= 1e-10
    report(
        8,
        ok,
        f"NLS dC={c_drift:.1e} dE={e_drift:.1e}; NKG dC={ck:.1e} dE={ek:.1e}; "
        f"roundtrip {rt_err:.1e}",
    )


def test_criterion_09_symmetry_suite(nls_ref, nls_soliton):
    g = nls_ref.grid
    ref = make_reference(nls_ref, nls_soliton)
    states = [
        Field(g, random_field(g, 9100)),
        Field(g, random_field(g, 9101)),
        nls_soliton.profile,
    ]
    worst = 0.0
    ok = True
    for u in states:
        e0v = energy(nls_ref, u).value
        c0v = charge(nls_ref, u).value
        l0v = hylomorphy_ratio(nls_ref, u)
        v0v = lyapunov(nls_ref, u, REF_SIGMA, nls_soliton.energy)
        d0v = orbit_distance(ref, u)
        for z, theta in [([1], 0.0), ([9], 1.3), ([31], -2.2)]:
            moved = Field(g, np.exp(1j * theta) * translate(u, z).values)
            for base, fn in (
                (e0v, lambda s: energy(nls_ref, s).value),
                (c0v, lambda s: charge(nls_ref, s).value),
                (l0v, lambda s: hylomorphy_ratio(nls_ref, s)),
                (v0v, lambda s: lyapunov(nls_ref, s, REF_SIGMA, nls_soliton.energy)),
                (d0v, lambda s: orbit_distance(ref, s)),
            ):
                # relative drift with a unit floor: quantities that vanish on
                # the orbit (distance, certificate) compare absolutely
                rel = abs(fn(moved) - base) / max(abs(base), 1.0)
                worst = max(worst, rel)
                ok &= rel <= 1e-12
    report(9, ok, f"E, C, ratio, lyapunov, orbit distance; worst drift {worst:.1e}")


def test_criterion_10_splitting(nls_ref):
    g = nls_ref.grid
    x = g.points[..., 0] - 16.0
    u = Field(g, np.exp(-((x + 7.0) ** 2)).astype(complex))
    w = Field(g, np.exp(-((x - 7.0) ** 2)).astype(complex))
    de, dc = splitting_defect(nls_ref, u, w)
    ok = abs(de) <= 1e-12 and abs(dc) <= 1e-12
    defects = []
    for sep in (2.0, 4.0, 6.0):
        ua = Field(g, np.exp(-((x + sep / 2) ** 2)).astype(complex))
        wb = Field(g, np.exp(-((x - sep / 2) ** 2)).astype(complex))
        dd, _ = splitting_defect(nls_ref, ua, wb)
        defects.append(abs(dd))
    ok &= defects[0] > defects[1] > defects[2]
    report(
        10,
        ok,
        f"disjoint defect ({abs(de):.1e}, {abs(dc):.1e}); "
        f"overlap defects {defects[0]:.2e} > {defects[1]:.2e} > {defects[2]:.2e}",
    )


def test_criterion_11_mediant(nls_ref):
    from hylomorph import cell_sums

    g = nls_ref.grid
    ok = True
    for seed in range(100):
        u = Field(g, random_field(g, 11000 + seed))
        _, ratio = best_cell(nls_ref, u)
        e_cells = cell_sums(g, energy(nls_ref, u).density)
        c_cells = cell_sums(g, charge(nls_ref, u).density)
        mask = c_cells > 0
        aggregate = e_cells[mask].sum() / c_cells[mask].sum()
        ok &= ratio <= aggregate + 1e-12
    report(11, ok, "best-cell rate <= aggregate rate on 100 seeded fields")


def test_criterion_12_stability_smoke(nls_ref, nls_soliton):
    from hylomorph import stability_experiment

    base = stability_experiment(nls_ref, nls_soliton, 0.0, 20.0, 1e-3, seed=99)
    rep = stability_experiment(nls_ref, nls_soliton, 1e-2, 20.0, 1e-3, seed=99)
    ok = (
        base.max_orbit_distance <= 1e-3
        and rep.max_orbit_distance <= 10.0 * rep.delta
        and rep.lyapunov_max <= 10.0 * max(rep.lyapunov_initial, 1e-300)
        and not rep.blowup
    )
    report(
        12,
        ok,
        f"baseline {base.max_orbit_distance:.1e} <= 1e-3; perturbed "
        f"{rep.max_orbit_distance:.3f} <= {10 * rep.delta:.1f}; "
        f"lyapunov x{rep.lyapunov_max / max(rep.lyapunov_initial, 1e-300):.3f}",
    )


def test_criterion_13_exact_solution_oracles(grid_1d_fine, grid_1d):
    g = grid_1d_fine
    model = NlsModel(g, Potential(0.0), Nonlinearity(0.0))
    x = g.points[..., 0]
    k = 2.0 * math.pi * 3 / 16.0
    steps = 20
    traj = evolve_nls(
        model, Field(g, np.exp(1j * k * x)), 1e-3, steps, stride=steps, store_fields=True
    )
    exact = np.exp(1j * (k * x - 0.5 * k**2 * steps * 1e-3))
    pw_err = np.max(np.abs(traj.snapshots[-1][1].values - exact)) / steps
    ok = pw_err <= 1e-12

    mk = NkgModel(grid_1d, Nonlinearity(1.0))
    st = NkgState(
        Field(grid_1d, np.ones(grid_1d.shape, complex)),
        Field(grid_1d, np.zeros(grid_1d.shape, complex)),
    )
    steps = int(round(2 * math.pi / 1e-3))
    trk = evolve_nkg(mk, st, 1e-3, steps, stride=steps // 40, store_fields=True)
    harm_err = max(
        float(np.max(np.abs(s.psi.values - math.cos(t)))) for t, s in trk.snapshots
    )
    ok &= harm_err <= 1e-4
    report(
        13,
        ok,
        f"plane wave {pw_err:.1e} per step; harmonic field {harm_err:.1e} over a period",
    )


def test_criterion_14_determinism_and_io(tmp_path, grid_1d):
    cfg = tmp_path / "ref.toml"
    cfg.write_text(
        f"""
[model]
type = "nls"
h = 1.0
a = 1.0
b = 0.25
v0 = 0.1
lattice = [[1.0]]

[grid]
dim = 1
cells_per_dim = [32]
points_per_cell = [32]

[solver]
sigma = 6.0
restarts = 2
seed = 5

[output]
directory = "{tmp_path}/out"
"""
    )
    assert cli_main(["minimize", "--config", str(cfg)]) == 0
    j1 = open(tmp_path / "out" / "minimize.json", "rb").read()
    assert cli_main(["minimize", "--config", str(cfg)]) == 0
    j2 = open(tmp_path / "out" / "minimize.json", "rb").read()
    ok = j1 == j2

    u = Field(grid_1d, random_field(grid_1d, 77, smooth=False))
    snap = str(tmp_path / "rt.hylo")
    write_snapshot(snap, u)
    back = read_snapshot(snap, grid_1d)
    ok &= np.array_equal(back.values, u.values)
    report(14, ok, "byte-identical JSON across reruns; snapshot round trip bit exact")
