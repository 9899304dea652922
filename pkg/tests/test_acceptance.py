"""Acceptance suite: one test per criterion, at desk scale.

Desk scale: n_x = 64, n_theta = 32, dt = 0.01, T* = 2 (band uses 4 and the
two-disk geometry 3, matching their presets), horizons <= 20.  Expensive
preset runs are shared session-wide.  Each test prints one PASS line (shown
with -s, or in the captured output block on failure); the pytest -v status
line per test is the authoritative pass/fail record.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from hypoflow import (DensityField, GridSpec, SolverConfig, build_ledger,
                      build_moment_decomposition, build_sigma, certify_gcc,
                      decomposition_identity_residuals, disk_domain,
                      end_to_end_certificate, energy_ledger_check, evolve,
                      fit_decay, make_bump, make_random_bandlimited,
                      make_single_mode, measure_lambda, micro_coercivity_pairs,
                      make_harmonic_mode, normalize_chi, psi_orbit_quadrature,
                      rect_domain, step_collision, step_transport, strang_step,
                      verify_claim_bound, verify_following, bogovskii_solve,
                      manufactured_case, estimate_c_d,
                      random_zero_mean_ensemble, PhasePoint, GccError,
                      l2_norm_sq)
from hypoflow.cli import RunConfig, main
from hypoflow.report import trapz_series

GRID = GridSpec(64, 32)
DT = 0.01

PRESET_T_STAR = {"uniform": 2.0, "cross": 2.0, "band": 4.0, "two-disks": 3.0}
GCC_PRESETS = ("uniform", "cross", "two-disks")


def report_line(num, desc, ok=True):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:>2}: {desc}: {status}", flush=True)
    assert ok, f"criterion {num} failed: {desc}"


@pytest.fixture(scope="session")
def preset_fields():
    out = {}
    for name in ("uniform", "cross", "band", "two-disks"):
        cfg = RunConfig({"scenario.preset": name})
        field = build_sigma(cfg.region, 0.05, 1.0, GRID)
        out[name] = field
    return out


@pytest.fixture(scope="session")
def preset_runs(preset_fields):
    """Zero-mass runs (horizon 5) per preset, chi normalized where possible."""
    runs = {}
    for name, field in preset_fields.items():
        t_star = PRESET_T_STAR[name]
        ledger = None
        if name in GCC_PRESETS:
            field, _ = normalize_chi(field, t_star, (64, 32))
            ledger = build_ledger(field, t_star)
        f0 = make_random_bandlimited(GRID, seed=100)
        rep, _ = evolve(f0, field, SolverConfig(dt=DT, t_end=5.0), zero_mass=True)
        rep.ledger = ledger
        runs[name] = (field, rep)
    return runs


# ---------------------------------------------------------------------------


def test_criterion_01_conservation(preset_fields, preset_runs):
    # relative mass drift on runs carrying mass, monotone norms on all runs
    for name, field in preset_fields.items():
        f0 = make_single_mode(GRID, eps=0.5, background=1.0)
        rep, _ = evolve(f0, field, SolverConfig(dt=DT, t_end=1.0), zero_mass=False)
        m = rep.mass_series
        assert np.max(np.abs(m - m[0])) <= 1e-12 * abs(m[0])
    for name, (field, rep) in preset_runs.items():
        e = rep.l2_sq
        assert np.all(np.diff(e) <= 1e-12 * e[0] + 1e-14), name
        assert np.all(rep.dissipation_series >= -1e-12 * e[0]), name
    report_line(1, "mass conserved to 1e-12 and L2 norm nonincreasing on all presets")


def test_criterion_02_energy_ledger(preset_runs):
    for name, (field, rep) in preset_runs.items():
        check = energy_ledger_check(rep, rel_tol=1e-6)
        assert check.passed, (name, check.row())
    report_line(2, "energy drop equals dissipation quadrature to 1e-6 on all presets")


def test_criterion_03_exact_substeps(preset_fields):
    uniform = preset_fields["uniform"]
    f = make_random_bandlimited(GRID, seed=42)
    g = step_transport(f, 0.173)
    assert abs(l2_norm_sq(g) - l2_norm_sq(f)) <= 1e-12 * l2_norm_sq(f)

    harm = make_harmonic_mode(GRID)
    dt = 0.31
    coll = step_collision(harm, uniform, dt)
    assert np.max(np.abs(coll.values - np.exp(-dt) * harm.values)) < 1e-12

    f0 = make_random_bandlimited(GRID, seed=43)
    horizon = 0.5

    def run(dt_):
        cur = f0
        for _ in range(int(round(horizon / dt_))):
            cur = strang_step(cur, uniform, dt_)
        return cur.values

    ref = run(0.00125)
    order = np.log2(np.linalg.norm(run(0.02) - ref)
                    / np.linalg.norm(run(0.01) - ref))
    assert 1.8 <= order <= 2.2, order
    report_line(3, f"transport unitary, collision multiplier exact, "
                   f"Strang order {order:.3f} in [1.8, 2.2]")


def test_criterion_04_poincare():
    for seed in range(100):
        f = make_random_bandlimited(GRID, seed=seed, m_max=4)
        lhs, rhs = micro_coercivity_pairs(f)
        assert np.all(lhs <= rhs * (1 + 1e-10) + 1e-15)
    harm = make_harmonic_mode(GRID)
    lhs, rhs = micro_coercivity_pairs(harm)
    assert np.max(np.abs(lhs / rhs - 1.0)) <= 1e-10
    report_line(4, "circle Poincare holds pointwise with C_P = 1, sharp on the "
                   "first harmonic")


def _oracle_min_line_integral(sigma, t_star, n_pos, n_ang, n_quad):
    """Test-owned exhaustive quadrature, vectorized independently."""
    n = sigma.shape[0]
    ts = np.linspace(0.0, t_star, n_quad)
    w = np.ones(n_quad)
    w[0] = w[-1] = 0.5
    xs = np.arange(n_pos) / n_pos
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    best = np.inf
    for theta in 2 * np.pi * np.arange(n_ang) / n_ang:
        px = (X.ravel()[:, None] + ts[None, :] * np.cos(theta)) % 1.0
        py = (Y.ravel()[:, None] + ts[None, :] * np.sin(theta)) % 1.0
        fx = px * n
        fy = py * n
        ix = fx.astype(np.int64) % n
        iy = fy.astype(np.int64) % n
        tx = fx - np.floor(fx)
        ty = fy - np.floor(fy)
        ix1 = (ix + 1) % n
        iy1 = (iy + 1) % n
        vals = ((1 - tx) * (1 - ty) * sigma[ix, iy]
                + tx * (1 - ty) * sigma[ix1, iy]
                + (1 - tx) * ty * sigma[ix, iy1]
                + tx * ty * sigma[ix1, iy1])
        integ = t_star * (vals @ w) / (n_quad - 1)
        best = min(best, float(integ.min()))
    return best


def test_criterion_05_gcc_certificates(preset_fields):
    uni = certify_gcc(preset_fields["uniform"], 2.0, (64, 32))
    assert uni.c_min == 2.0

    band = certify_gcc(preset_fields["band"], 4.0, (64, 32))
    assert band.c_min == 0.0
    assert band.worst_point.theta in (0.0, np.pi)

    cross = certify_gcc(preset_fields["cross"], 2.0, (64, 32))
    oracle = _oracle_min_line_integral(preset_fields["cross"].sigma, 2.0,
                                       128, 64, 321)
    assert cross.c_min > 0.0
    assert abs(cross.c_min - oracle) <= 0.02 * oracle, (cross.c_min, oracle)
    report_line(5, f"uniform c_min = T*, band trapped horizontal ray, cross "
                   f"c_min = {cross.c_min:.4f} within 2% of oracle {oracle:.4f}")


def test_criterion_06_psi_invariant(preset_runs):
    field, _ = preset_runs["cross"]
    rng = np.random.default_rng(777)
    worst = 0.0
    for _ in range(1000):
        z = PhasePoint(rng.uniform(), rng.uniform(), rng.uniform(0, 2 * np.pi))
        q = psi_orbit_quadrature(field, z, 2.0)
        worst = max(worst, abs(q - 1.0))
    assert worst <= 1e-6, worst
    report_line(6, f"psi orbit quadrature within 1e-6 of one for 1000 random "
                   f"phase points (worst {worst:.2e})")


def test_criterion_07_decay_certificates(preset_runs):
    summaries = []
    for name in GCC_PRESETS:
        field, _ = preset_runs[name]
        t_star = PRESET_T_STAR[name]
        cert_gcc = certify_gcc(field, t_star, (64, 32))
        assert cert_gcc.c_min > 0.0
        cert = end_to_end_certificate(field, t_star, GRID, dt=0.02,
                                      n_random=16, n_heldout=8, seed=500,
                                      worst_point=cert_gcc.worst_point)
        assert cert.big_c >= 1.0 and cert.big_lambda > 0.0
        assert cert.heldout_margin >= 1.0
        summaries.append(f"{name}: C={cert.big_c:.3g} Lambda={cert.big_lambda:.3g}")
    report_line(7, "decay certificates issued and held out on " + "; ".join(summaries))


def test_criterion_08_band_concentration(preset_fields):
    field = preset_fields["band"]
    cert = certify_gcc(field, 4.0, (64, 32))
    assert cert.c_min == 0.0
    center = (cert.worst_point.x1, cert.worst_point.x2)
    theta_c = cert.worst_point.theta
    rates = []
    for width in (0.2, 0.1, 0.05):
        f0 = make_bump(GRID, center=center, theta_center=theta_c, width=width)
        rep, _ = evolve(f0, field, SolverConfig(dt=DT, t_end=8.0, record_every=2),
                        zero_mass=True)
        fit = fit_decay(rep.t, rep.l2, window=(1.6, 8.0))
        rates.append(fit.lambda_emp)
    assert rates[0] > rates[1] > rates[2] > 0.0, rates
    report_line(8, "no uniform certificate for the band; fitted rates decrease "
                   f"along bump concentration {[f'{r:.4f}' for r in rates]}")


def test_criterion_09_trajectory_transfer(preset_runs):
    slacks = []
    for name in GCC_PRESETS:
        field, rep = preset_runs[name]
        check = verify_following(rep, rep.ledger, PRESET_T_STAR[name])
        assert check.passed, (name, check.row())
        slacks.append(f"{name}: {check.slack_ratio:.3g}")
    # the band preset has no certified chi, so the formula constants do not
    # exist for it: the normalization is rejected rather than faked
    with pytest.raises(GccError):
        normalize_chi(preset_runs["band"][0], 4.0, (64, 32))
    report_line(9, "transfer inequality holds with formula constants, slack "
                   + "; ".join(slacks))


def test_criterion_10_moment_decomposition(preset_fields):
    from hypoflow.criterion import moment_test_functions

    phi = moment_test_functions(GRID)
    th = GRID.thetas
    v = np.stack([np.ones_like(th), np.cos(th), np.sin(th)])
    gram = phi @ v.T * GRID.dtheta
    assert np.max(np.abs(gram - np.eye(3))) < 1e-12

    field = preset_fields["cross"]
    for seed in (11, 12, 13):
        f = make_random_bandlimited(GRID, seed=seed)
        f = DensityField(GRID, f.values - f.values.mean())
        res = decomposition_identity_residuals(f, field)
        assert np.all(res <= 1e-8), res

    c3 = {}
    for n_x in (64, 128):
        grid = GridSpec(n_x, 32)
        cfg = RunConfig({"scenario.preset": "cross"})
        fld = build_sigma(cfg.region, 0.05, 1.0, grid)
        f0 = make_random_bandlimited(grid, seed=300)
        rep, _ = evolve(f0, fld, SolverConfig(dt=DT, t_end=2.0, record_every=10,
                                              keep_snapshots=True),
                        zero_mass=True)
        check = verify_claim_bound(rep, fld, 2.0)
        c3[n_x] = check.measured
    rel = abs(c3[64] - c3[128]) / max(c3.values())
    assert rel <= 0.20, c3
    report_line(10, f"biorthogonality exact, identity residual <= 1e-8, "
                    f"C_3 stable across n_x 64/128 ({c3[64]:.4g} vs {c3[128]:.4g})")


def test_criterion_11_bogovskii():
    results = {}
    for n in (64, 128):
        dom = disk_domain(n)
        h = manufactured_case(dom)
        hn = np.sqrt(float(np.sum(h ** 2)) * dom.cell_size ** 2)
        sol = bogovskii_solve(dom, h)
        results[n] = sol.divergence_residual / hn
        assert sol.boundary_max <= sol.boundary_tolerance
    assert results[128] <= 1e-3, results
    assert results[128] <= 0.6 * results[64], results

    coarse = disk_domain(40)
    fine = disk_domain(80)
    cd_c = estimate_c_d(coarse, random_zero_mean_ensemble(coarse, 8, seed=21))
    cd_f = estimate_c_d(fine, random_zero_mean_ensemble(fine, 8, seed=21))
    assert abs(cd_f - cd_c) <= 0.30 * max(cd_c, cd_f), (cd_c, cd_f)

    square = rect_domain(48, width_x=0.8, width_y=0.8)
    thin = rect_domain(48, width_x=0.88, width_y=0.11, ball=((0.5, 0.5), 0.04))
    cd_sq = estimate_c_d(square, random_zero_mean_ensemble(square, 8, seed=22))
    cd_thin = estimate_c_d(thin, random_zero_mean_ensemble(thin, 8, seed=22))
    assert cd_thin > cd_sq, (cd_thin, cd_sq)
    report_line(11, f"divergence residual {results[128]:.2e} <= 1e-3 at 128^2, "
                    f"refinement {results[128]/results[64]:.2f} <= 0.6, C_D stable "
                    f"({cd_c:.3g}/{cd_f:.3g}), thin {cd_thin:.3g} > square {cd_sq:.3g}")


def test_criterion_12_scaling_invariance(preset_fields):
    field, _ = normalize_chi(preset_fields["uniform"], 2.0, (32, 16))
    f0 = make_random_bandlimited(GRID, seed=900)
    cfg = SolverConfig(dt=0.02, t_end=2.0)
    rep0, _ = evolve(f0, field, cfg, zero_mass=True)
    lam0 = measure_lambda(rep0, 2.0).value
    fit0 = fit_decay(rep0.t, rep0.l2).lambda_emp
    for a in (0.5, 2.0, 10.0):
        rep, _ = evolve(DensityField(GRID, a * f0.values), field, cfg,
                        zero_mass=True)
        lam = measure_lambda(rep, 2.0).value
        fit = fit_decay(rep.t, rep.l2).lambda_emp
        assert abs(lam - lam0) <= 1e-10 * lam0
        assert abs(fit - fit0) <= 1e-10 * max(fit0, 1e-10)
    report_line(12, "lambda and fitted rate invariant under data scaling "
                    "{0.5, 2, 10} to 1e-10 relative")


def test_criterion_13_determinism(tmp_path):
    cfg_text = ("scenario.preset = cross\nsolver.t_end = 2.0\n"
                "gcc.positions = 48\ngcc.angles = 24\ninitial.seed = 31\n")
    cfgpath = tmp_path / "run.cfg"
    cfgpath.write_text(cfg_text)
    csvs = []
    for sub in ("a", "b"):
        out = str(tmp_path / sub)
        assert main(["simulate", "--config", str(cfgpath), "--out", out]) == 0
        lines = open(os.path.join(out, "series.csv")).read().splitlines()
        assert lines[0].startswith("#")  # timestamp header excluded from compare
        csvs.append(lines[1:])
    assert csvs[0] == csvs[1]
    report_line(13, "identical config and seed reproduce a byte-identical CSV")
