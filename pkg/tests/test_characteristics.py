import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypoflow import (Disk, FullTorus, GccError, PhasePoint, SupportRegion,
                      build_psi, build_sigma, certify_gcc,
                      component_reachability, flow, line_integral,
                      normalize_chi, psi_eval, psi_orbit_quadrature,
                      reachability_horizon)
from hypoflow.characteristics import psi_denominator


def torus_dist(a, b):
    d = np.abs(np.asarray(a) - np.asarray(b))
    return np.max(np.minimum(d, 1.0 - d))


# ---------------------------------------------------------------------------
# flow
# ---------------------------------------------------------------------------


def test_flow_examples():
    z = flow(PhasePoint(0.2, 0.3, 0.0), 0.5)
    assert abs(z.x1 - 0.7) < 1e-15 and abs(z.x2 - 0.3) < 1e-15
    z0 = PhasePoint(0.42, 0.77, 1.23)
    zt = flow(z0, 0.0)
    assert zt == z0
    zv = flow(PhasePoint(0.1, 0.9, np.pi / 2), 1.0)
    assert torus_dist((zv.x1, zv.x2), (0.1, 0.9)) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 2 * np.pi),
       st.floats(-3, 3), st.floats(-3, 3))
def test_flow_group_property(x1, x2, th, s, t):
    z = PhasePoint(x1, x2, th)
    a = flow(flow(z, s), t)
    b = flow(z, s + t)
    assert torus_dist((a.x1, a.x2), (b.x1, b.x2)) < 1e-12
    assert a.theta == b.theta


def test_flow_measure_preserving(cross_field32):
    # discrete sum of h o Z_t over a uniform phase sample matches sum of h
    from hypoflow._kernels import _bilin_periodic_np

    grid = cross_field32.grid
    n, m = 64, 16
    xs = np.arange(n) / n
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    th = 2 * np.pi * np.arange(m) / m
    t = 0.37
    sig = cross_field32.sigma
    total_before = m * np.sum(_bilin_periodic_np(sig, X, Y))
    total_after = sum(
        np.sum(_bilin_periodic_np(sig, X + t * np.cos(theta), Y + t * np.sin(theta)))
        for theta in th)
    rel = abs(total_after - total_before) / abs(total_before)
    assert rel < 10.0 / grid.n_x ** 2


# ---------------------------------------------------------------------------
# line integrals
# ---------------------------------------------------------------------------


def test_line_integral_constant(uniform_field32):
    val = line_integral(uniform_field32, PhasePoint(0.13, 0.77, 1.1), 2.0)
    assert val == 2.0  # constant integrand integrates exactly


def test_line_integral_trapped_band(band_field32):
    val = line_integral(band_field32, PhasePoint(0.5, 0.1, 0.0), 4.0)
    assert val == 0.0


def test_line_integral_band_crossing_oracle(band_field32):
    # sharp band of width 1/3 gives chord length 1/3; the smoothstep ramp
    # replaces w of plateau on each side by w/2, so the mollified line mass
    # along a full vertical crossing is 1/3 - w
    w = band_field32.smoothing_width
    oracle = 1.0 / 3.0 - w
    val = line_integral(band_field32, PhasePoint(0.5, 0.1, np.pi / 2), 1.0)
    assert abs(val - oracle) < 2e-3


def test_line_integral_additivity(cross_field32):
    z = PhasePoint(0.21, 0.68, 0.83)
    t = 1.1
    whole = line_integral(cross_field32, z, 2 * t, dt_quad=t / 512)
    first = line_integral(cross_field32, z, t, dt_quad=t / 512)
    second = line_integral(cross_field32, flow(z, t), t, dt_quad=t / 512)
    assert abs(whole - (first + second)) < 1e-12 * max(1.0, whole)


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------


def test_certify_uniform_exact(uniform_field32):
    cert = certify_gcc(uniform_field32, 1.0, (16, 8))
    assert cert.c_min == 1.0
    assert cert.uniform_certified
    assert cert.trapped_fraction == 0.0


def test_certify_band_trapped(band_field32):
    cert = certify_gcc(band_field32, 4.0, (32, 16))
    assert cert.c_min == 0.0
    assert not cert.uniform_certified
    assert cert.worst_point.theta in (0.0,)  # lexicographic tie-break
    assert cert.trapped_fraction > 0.0


def test_certify_cross_positive(cross_field32):
    cert = certify_gcc(cross_field32, 2.0, (48, 24))
    assert cert.c_min > 0.3
    # recomputing the worst ray reproduces c_min to quadrature tolerance
    again = line_integral(cross_field32, cert.worst_point, 2.0)
    assert abs(again - cert.c_min) < 1e-10


def test_certify_monotone_in_t_star(cross_field32):
    cs = [certify_gcc(cross_field32, t, (24, 12)).c_min for t in (0.5, 1.0, 2.0)]
    assert cs[0] <= cs[1] <= cs[2]


def test_certify_rejects_bad_horizon(cross_field32):
    with pytest.raises(Exception):
        certify_gcc(cross_field32, -1.0, (8, 8))


# ---------------------------------------------------------------------------
# psi
# ---------------------------------------------------------------------------


def test_psi_constant_chi(grid32):
    field = build_sigma(SupportRegion([FullTorus()]), 0.05, 1.0, grid32)
    t_star = 2.0
    fieldn, cert = normalize_chi(field, t_star, (16, 8))
    psi = build_psi(fieldn, t_star, n_t=9, sample_counts=(16, 8))
    assert np.allclose(psi.values, 1.0 / t_star, rtol=0, atol=1e-12)
    assert psi.min_denominator >= 1.0


def test_psi_orbit_invariant_random(cross_field32):
    t_star = 2.0
    fieldn, _ = normalize_chi(cross_field32, t_star, (64, 32))
    rng = np.random.default_rng(7)
    for _ in range(50):
        z = PhasePoint(rng.uniform(), rng.uniform(), rng.uniform(0, 2 * np.pi))
        q = psi_orbit_quadrature(fieldn, z, t_star)
        assert abs(q - 1.0) <= 1e-6
    # independent node count: agreement at quadrature order only
    q2 = psi_orbit_quadrature(fieldn, PhasePoint(0.3, 0.7, 1.0), t_star, n_nodes=1001)
    assert abs(q2 - 1.0) < 5e-3


def test_psi_vanishes_off_support(cross_field32):
    t_star = 2.0
    fieldn, _ = normalize_chi(cross_field32, t_star, (48, 24))
    psi = build_psi(fieldn, t_star, n_t=5, sample_counts=(48, 24))
    off = fieldn.chi == 0.0
    assert np.all(psi.values[:, off, :] == 0.0)
    assert np.all(psi.values >= 0.0)
    # spot per-query value off support
    assert psi_eval(fieldn, 0.5, PhasePoint(0.05, 0.05, 1.0), t_star) == 0.0


def test_psi_denominator_uniform_bound(cross_field32):
    t_star = 2.0
    fieldn, _ = normalize_chi(cross_field32, t_star, (64, 32))
    rng = np.random.default_rng(3)
    for _ in range(20):
        z = PhasePoint(rng.uniform(), rng.uniform(), rng.uniform(0, 2 * np.pi))
        t = rng.uniform(0, t_star)
        assert psi_denominator(fieldn, t, z, t_star) >= 1.0 - 1e-9


def test_psi_requires_certified_chi(band_field32):
    with pytest.raises(GccError):
        normalize_chi(band_field32, 4.0, (32, 16))
    with pytest.raises(GccError):
        build_psi(band_field32, 4.0, n_t=5, sample_counts=(32, 16))


# ---------------------------------------------------------------------------
# reachability
# ---------------------------------------------------------------------------


def test_reachability_single_component():
    region = SupportRegion([Disk(0.5, 0.5, 0.2)])
    mat = component_reachability(region, 1.0, samples=(24, 16))
    assert mat.shape == (1, 1) and mat[0, 0]


def test_reachability_two_disks():
    region = SupportRegion([Disk(0.25, 0.25, 0.1), Disk(0.75, 0.75, 0.1)])
    mat = component_reachability(region, 2.0, samples=(32, 32), dt=0.005)
    assert mat.all()  # the connecting diagonal direction exists
    short = component_reachability(region, 0.01, samples=(32, 32), dt=0.002)
    assert not short[0, 1] and not short[1, 0]
    assert short[0, 0] and short[1, 1]


def test_reachability_horizon():
    region = SupportRegion([Disk(0.25, 0.25, 0.1), Disk(0.75, 0.75, 0.1)])
    t = reachability_horizon(region, [0.01, 2.0], samples=(32, 32), dt=0.005)
    assert t == 2.0
    assert reachability_horizon(region, [0.01], samples=(16, 8)) is None


def test_certificate_bounded_by_sup(cross_field32):
    cert = certify_gcc(cross_field32, 2.0, (24, 12))
    assert 0.0 <= cert.c_min <= 2.0 * cross_field32.sigma_sup + 1e-12


def test_psi_raw_dump_roundtrip(tmp_path, grid32):
    field = build_sigma(SupportRegion([FullTorus()]), 0.05, 1.0, grid32)
    fieldn, _ = normalize_chi(field, 1.0, (16, 8))
    psi = build_psi(fieldn, 1.0, n_t=5, sample_counts=(16, 8))
    path = tmp_path / "psi.bin"
    from hypoflow.characteristics import write_psi_raw
    write_psi_raw(path, psi)
    header = np.fromfile(path, dtype=np.int64, count=4)
    assert tuple(header) == psi.values.shape
    data = np.fromfile(path, dtype=np.float64, offset=32).reshape(psi.values.shape)
    assert np.array_equal(data, psi.values)
