"""Command line interface: config ingestion, presets, runs, reports.

Configuration is flat ``key = value`` text with dotted section names, e.g.::

    scenario.preset = cross
    solver.dt = 0.01
    gcc.t_star = 2.0

Unknown keys are hard errors, which guards long scientific runs against
silent typos.  Subcommands: ``simulate``, ``gcc``, ``verify``,
``bogovskii``, ``certificate``.  Exit codes: 0 success, 1 config error,
2 numerical abort or failed certification, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .core import (Band, ConfigError, Cross, Disk, FullTorus, GridSpec, Rect,
                   SupportRegion, build_sigma, write_field_raw)
from .characteristics import (GccError, build_psi, certify_gcc, normalize_chi,
                              reachability_horizon, write_psi_raw)
from .solver import (NumericalAbort, SolverConfig, evolve, make_bump,
                     make_equilibrium_mode, make_harmonic_mode,
                     make_random_bandlimited, make_single_mode)
from .diagnostics import fit_decay
from .criterion import (CertificateError, build_ledger, end_to_end_certificate,
                        energy_ledger_check, mass_conservation_check,
                        measure_lambda, monotonicity_check, verify_claim_bound,
                        verify_following, verify_quant)
from .bogovskii import (bogovskii_solve, disk_domain, estimate_c_d,
                        lshape_domain, manufactured_case,
                        random_zero_mean_ensemble, rect_domain)
from .report import InequalityCheck


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_KNOWN_KEYS = {
    "scenario.preset",
    "region.count",
    "sigma.amplitude", "sigma.smoothing_width",
    "grid.n_x", "grid.n_theta",
    "solver.dt", "solver.t_end", "solver.record_every",
    "gcc.t_star", "gcc.positions", "gcc.angles", "gcc.dt_quad", "gcc.chi_margin",
    "psi.n_t",
    "initial.preset", "initial.seed", "initial.eps", "initial.k",
    "initial.center", "initial.theta_center", "initial.width",
    "initial.amplitude", "initial.zero_mass",
    "verify.deltas", "verify.record_every", "verify.run_dir",
    "certificate.n_random", "certificate.n_heldout", "certificate.dt",
    "certificate.seed",
    "bogovskii.shape", "bogovskii.mesh", "bogovskii.ensemble", "bogovskii.seed",
    "output.dir",
}

_REGION_SUBKEYS = {"kind", "center", "radius", "axis", "width", "width_x", "width_y"}

_DEFAULTS = {
    "scenario.preset": "uniform",
    "sigma.amplitude": "1.0",
    "sigma.smoothing_width": "0.05",
    "grid.n_x": "64",
    "grid.n_theta": "32",
    "solver.dt": "0.01",
    "solver.t_end": "10.0",
    "solver.record_every": "1",
    "gcc.t_star": "2.0",
    "gcc.positions": "128",
    "gcc.angles": "64",
    "gcc.chi_margin": "1e-3",
    "psi.n_t": "17",
    "initial.preset": "random",
    "initial.seed": "7",
    "initial.eps": "0.5",
    "initial.k": "1 0",
    "initial.center": "0.5 0.5",
    "initial.theta_center": "0.0",
    "initial.width": "0.1",
    "initial.amplitude": "1.0",
    "initial.zero_mass": "true",
    "verify.deltas": "1 0.1 0.01",
    "verify.record_every": "5",
    "certificate.n_random": "16",
    "certificate.n_heldout": "8",
    "certificate.dt": "0.02",
    "certificate.seed": "2024",
    "bogovskii.shape": "disk",
    "bogovskii.mesh": "128",
    "bogovskii.ensemble": "8",
    "bogovskii.seed": "11",
    "output.dir": "out",
}

# preset overrides applied before the config file
_PRESETS = {
    "uniform": {},
    "cross": {},
    "band": {"gcc.t_star": "4.0"},
    "two-disks": {"gcc.t_star": "3.0"},
    "custom": {},
}


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def _validate_keys(cfg: dict):
    for key in cfg:
        if key in _KNOWN_KEYS:
            continue
        parts = key.split(".")
        if (len(parts) == 3 and parts[0] == "region" and parts[1].isdigit()
                and parts[2] in _REGION_SUBKEYS):
            continue
        raise ConfigError(f"unknown configuration key {key!r}")


def _floats(s: str):
    return tuple(float(tok) for tok in s.split())


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


class RunConfig:
    """Validated configuration; ``echo`` keeps the merged flat key-values."""

    def __init__(self, cfg: dict):
        _validate_keys(cfg)
        preset = cfg.get("scenario.preset", _DEFAULTS["scenario.preset"])
        if preset not in _PRESETS:
            raise ConfigError(f"unknown scenario preset {preset!r}; "
                              f"choose from {sorted(_PRESETS)}")
        merged = dict(_DEFAULTS)
        merged.update(_PRESETS[preset])
        merged.update(cfg)
        self.echo = merged
        self.preset = preset
        self.dt_explicit = "solver.dt" in cfg
        try:
            self.grid = GridSpec(int(merged["grid.n_x"]), int(merged["grid.n_theta"]))
            self.amplitude = float(merged["sigma.amplitude"])
            self.smoothing_width = float(merged["sigma.smoothing_width"])
            self.dt = float(merged["solver.dt"])
            self.t_end = float(merged["solver.t_end"])
            self.record_every = int(merged["solver.record_every"])
            self.t_star = float(merged["gcc.t_star"])
            self.gcc_samples = (int(merged["gcc.positions"]), int(merged["gcc.angles"]))
            self.dt_quad = (float(merged["gcc.dt_quad"])
                            if "gcc.dt_quad" in merged else None)
            self.chi_margin = float(merged["gcc.chi_margin"])
            self.psi_n_t = int(merged["psi.n_t"])
            self.seed = int(merged["initial.seed"])
            self.zero_mass = _bool(merged["initial.zero_mass"])
            self.deltas = _floats(merged["verify.deltas"])
            self.verify_record_every = int(merged["verify.record_every"])
            self.out_dir = merged["output.dir"]
        except ValueError as exc:
            raise ConfigError(f"invalid configuration value: {exc}") from exc
        self.region = self._build_region(merged, preset)

    @staticmethod
    def _build_region(merged: dict, preset: str) -> SupportRegion:
        if preset == "uniform":
            return SupportRegion([FullTorus()])
        if preset == "cross":
            return SupportRegion([Cross(0.5, 0.5, 1.0 / 3.0)])
        if preset == "band":
            return SupportRegion([Band(1, 0.5, 1.0 / 3.0)])
        if preset == "two-disks":
            # one large disk blocks every direction except the two axes,
            # which the small disk patches; two equal disjoint disks cannot
            # satisfy the uniform control condition on the torus
            return SupportRegion([Disk(0.25, 0.25, 0.45), Disk(0.75, 0.75, 0.12)])
        count = int(merged.get("region.count", "0"))
        if count < 1:
            raise ConfigError("custom scenario needs region.count >= 1")
        comps = []
        for i in range(1, count + 1):
            kind = merged.get(f"region.{i}.kind")
            if kind is None:
                raise ConfigError(f"missing region.{i}.kind")
            if kind == "band":
                comps.append(Band(int(merged[f"region.{i}.axis"]),
                                  _floats(merged[f"region.{i}.center"])[0],
                                  float(merged[f"region.{i}.width"])))
            elif kind == "disk":
                c = _floats(merged[f"region.{i}.center"])
                comps.append(Disk(c[0], c[1], float(merged[f"region.{i}.radius"])))
            elif kind == "rect":
                c = _floats(merged[f"region.{i}.center"])
                comps.append(Rect(c[0], c[1], float(merged[f"region.{i}.width_x"]),
                                  float(merged[f"region.{i}.width_y"])))
            elif kind == "cross":
                c = _floats(merged[f"region.{i}.center"])
                comps.append(Cross(c[0], c[1], float(merged[f"region.{i}.width"])))
            elif kind == "full":
                comps.append(FullTorus())
            else:
                raise ConfigError(f"unknown shape kind {kind!r} in region.{i}.kind")
        return SupportRegion(comps)

    def build_field(self):
        return build_sigma(self.region, self.smoothing_width, self.amplitude,
                           self.grid)

    def initial_data(self):
        merged = self.echo
        preset = merged["initial.preset"]
        amp = float(merged["initial.amplitude"])
        if preset == "random":
            return make_random_bandlimited(self.grid, seed=self.seed, amplitude=amp)
        if preset == "single-mode":
            k = tuple(int(v) for v in _floats(merged["initial.k"]))
            return make_single_mode(self.grid, eps=float(merged["initial.eps"]), k=k)
        if preset == "bump":
            c = _floats(merged["initial.center"])
            return make_bump(self.grid, center=(c[0], c[1]),
                             theta_center=float(merged["initial.theta_center"]),
                             width=float(merged["initial.width"]))
        if preset == "equilibrium":
            k = tuple(int(v) for v in _floats(merged["initial.k"]))
            return make_equilibrium_mode(self.grid, k=k)
        if preset == "harmonic":
            return make_harmonic_mode(self.grid)
        raise ConfigError(f"unknown initial data preset {preset!r}")

    def echo_lines(self):
        return [f"{k} = {v}" for k, v in sorted(self.echo.items())]


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    cfg = {}
    if path is not None:
        try:
            with open(path) as fh:
                cfg = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if overrides:
        cfg.update(overrides)
    return RunConfig(cfg)


# ---------------------------------------------------------------------------
# Report writing helpers
# ---------------------------------------------------------------------------


def _ensure_outdir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    return path


def _write_text(path: str, text: str):
    with open(path, "w") as fh:
        fh.write(text if text.endswith("\n") else text + "\n")


GNUPLOT_TEMPLATE = """\
set datafile separator ','
set logscale y
set xlabel 't'
set ylabel 'L2 norm / dissipation'
plot 'series.csv' skip 2 using 1:3 with lines title 'l2', \\
     'series.csv' skip 2 using 1:4 with lines title 'dissipation'
"""


def _config_header(cfg: RunConfig):
    return ["configuration:"] + ["  " + s for s in cfg.echo_lines()] + [""]


def _simulation_pipeline(cfg: RunConfig, out: str, keep_snapshots=False,
                         record_every=None, snapshot_t_max=None):
    """Shared simulate/verify pipeline: build, certify, evolve, annotate."""
    from .solver import default_dt

    field = cfg.build_field()
    cert = certify_gcc(field, cfg.t_star, cfg.gcc_samples, cfg.dt_quad)
    chi_note = None
    ledger = None
    try:
        field, chi_cert = normalize_chi(field, cfg.t_star, cfg.gcc_samples,
                                        cfg.dt_quad, margin=cfg.chi_margin)
        ledger = build_ledger(field, cfg.t_star)
        ledger.lam = None
    except GccError as exc:
        chi_note = f"uniform GCC not certified: {exc}"
    f0 = cfg.initial_data()
    dt = cfg.dt if cfg.dt_explicit else default_dt(field)
    solver_cfg = SolverConfig(dt=dt, t_end=cfg.t_end,
                              record_every=record_every or cfg.record_every,
                              keep_snapshots=keep_snapshots)
    report, final = evolve(f0, field, solver_cfg, zero_mass=cfg.zero_mass,
                           snapshot_t_max=snapshot_t_max)
    report.config_echo = dict(cfg.echo)
    report.config_echo["solver.dt"] = repr(dt)
    report.ledger = ledger
    if chi_note:
        report.notes.append(chi_note)
    return field, cert, report, final


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, _cli_overrides(args))
    out = _ensure_outdir(args.out or cfg.out_dir)
    field, cert, report, final = _simulation_pipeline(cfg, out)
    report.checks.append(mass_conservation_check(report))
    report.checks.append(monotonicity_check(report))
    report.checks.append(energy_ledger_check(report))
    fit_note = ""
    try:
        fit = fit_decay(report.t, report.l2)
        report.decay_fit = fit
    except ValueError as exc:
        fit_note = f"decay fit unavailable: {exc}"

    report.write_csv(os.path.join(out, "series.csv"))
    write_field_raw(os.path.join(out, "state.bin"), final)
    lines = [f"hypoflow {__version__} simulation report", ""]
    lines += _config_header(cfg)
    lines.append(cert.summary())
    lines.append("")
    for note in report.notes:
        lines.append("note: " + note)
    if report.ledger is not None:
        lines.append(report.ledger.summary())
    lines.append("")
    for check in report.checks:
        lines.append(check.row())
    lines.append("")
    if report.decay_fit is not None:
        lines.append(report.decay_fit.summary())
    elif fit_note:
        lines.append(fit_note)
    lines.append(f"dissipation factor (primary D / instantaneous integral): "
                 f"{report.dissipation_factor():.6f}")
    _write_text(os.path.join(out, "report.txt"), "\n".join(lines))
    if args.gnuplot:
        _write_text(os.path.join(out, "plot.gp"), GNUPLOT_TEMPLATE)
    print(f"simulate: wrote {out}/series.csv and {out}/report.txt")
    return 0


def cmd_gcc(args) -> int:
    cfg = load_config(args.config, _cli_overrides(args))
    out = _ensure_outdir(args.out or cfg.out_dir)
    field = cfg.build_field()
    cert = certify_gcc(field, cfg.t_star, cfg.gcc_samples, cfg.dt_quad)
    lines = _config_header(cfg) + [cert.summary(), ""]
    try:
        fieldn, chi_cert = normalize_chi(field, cfg.t_star, cfg.gcc_samples,
                                         cfg.dt_quad, margin=cfg.chi_margin)
        lines.append("chi normalized: sampled minimum line integral = "
                     f"{chi_cert.c_min:.10g}")
        psi = build_psi(fieldn, cfg.t_star, n_t=cfg.psi_n_t,
                        dt_quad=cfg.dt_quad, sample_counts=cfg.gcc_samples)
        write_psi_raw(os.path.join(out, "psi.bin"), psi)
        lines.append(f"psi tabulated on {cfg.psi_n_t} time slices, minimum "
                     f"denominator {psi.min_denominator:.6f} (dump: psi.bin)")
    except GccError as exc:
        lines.append(f"uniform GCC not certified: {exc}")
    if len(cfg.region.components) > 1:
        horizon = reachability_horizon(cfg.region,
                                       [0.5, 1.0, 1.5, 2.0, 3.0, 4.0])
        lines.append(f"component reachability: smallest sampled T* with an "
                     f"irreducible matrix = {horizon}")
    _write_text(os.path.join(out, "gcc.txt"), "\n".join(lines))
    print("\n".join(lines))
    return 0


def cmd_verify(args) -> int:
    cfg = load_config(args.config, _cli_overrides(args))
    out = _ensure_outdir(args.out or cfg.out_dir)
    run_dir = cfg.echo.get("verify.run_dir", "")
    if run_dir:
        # completed run directory: series only, constants rebuilt from config
        from .report import load_csv

        report = load_csv(os.path.join(run_dir, "series.csv"))
        field = cfg.build_field()
        report.config_echo = dict(cfg.echo)
        try:
            field, _ = normalize_chi(field, cfg.t_star, cfg.gcc_samples,
                                     cfg.dt_quad, margin=cfg.chi_margin)
            report.ledger = build_ledger(field, cfg.t_star)
        except GccError as exc:
            report.notes.append(f"uniform GCC not certified: {exc}")
    else:
        field, cert, report, _ = _simulation_pipeline(
            cfg, out, keep_snapshots=True, record_every=cfg.verify_record_every,
            snapshot_t_max=cfg.t_star)
    rows = []
    mandatory = [mass_conservation_check(report), energy_ledger_check(report),
                 monotonicity_check(report)]
    rows += mandatory
    lam = measure_lambda(report, cfg.t_star)
    if lam.vacuous:
        note = "criterion vacuous (no dissipation recorded)"
    else:
        note = f"lambda_emp = {lam.value:.6g}"
    rows.append(InequalityCheck(
        name="integral criterion", lhs=lam.initial_energy,
        rhs=(lam.value * lam.dissipation_integral if not lam.vacuous else 0.0),
        tolerance=0.0, passed=True, note=note))
    if report.ledger is not None:
        rows.append(verify_following(report, report.ledger, cfg.t_star))
        for delta in cfg.deltas:
            rows.append(verify_quant(report, cfg.t_star, delta))
        if report.snapshots:
            rows.append(verify_claim_bound(report, field, cfg.t_star))
        else:
            rows.append(InequalityCheck(
                name="moment bound", lhs=0.0, rhs=0.0, tolerance=0.0,
                passed=True,
                note="skipped: snapshots unavailable from a CSV-only run"))
    else:
        rows.append(InequalityCheck(
            name="trajectory transfer", lhs=0.0, rhs=0.0, tolerance=0.0,
            passed=True,
            note="not applicable: uniform GCC not certified (no chi constants)"))
    lines = ["inequality report", ""] + _config_header(cfg)
    lines += [r.row() for r in rows]
    _write_text(os.path.join(out, "verify.txt"), "\n".join(lines))
    print("\n".join(lines))
    if not all(c.passed for c in mandatory):
        print("mandatory identity failed", file=sys.stderr)
        return 2
    return 0


def cmd_bogovskii(args) -> int:
    cfg = load_config(args.config, _cli_overrides(args))
    out = _ensure_outdir(args.out or cfg.out_dir)
    merged = cfg.echo
    shape = merged["bogovskii.shape"]
    n_mesh = int(merged["bogovskii.mesh"])
    n_ens = int(merged["bogovskii.ensemble"])
    seed = int(merged["bogovskii.seed"])
    builders = {"disk": disk_domain, "rect": rect_domain, "lshape": lshape_domain}
    if shape not in builders:
        raise ConfigError(f"unknown bogovskii.shape {shape!r}")
    domain = builders[shape](n_mesh)
    h = manufactured_case(domain)
    hn = np.sqrt(float(np.sum(h ** 2)) * domain.cell_size ** 2)
    sol = bogovskii_solve(domain, h, residual_tolerance=24.0 * domain.cell_size ** 2 * hn)
    ensemble = random_zero_mean_ensemble(domain, size=n_ens, seed=seed)
    c_d = estimate_c_d(domain, ensemble)
    coarse = builders[shape](max(16, n_mesh // 2))
    c_d_coarse = estimate_c_d(coarse, random_zero_mean_ensemble(coarse, size=n_ens,
                                                                seed=seed))
    lines = ["divergence inequality report", ""] + _config_header(cfg) + [
        f"  domain                : {shape} (mesh {n_mesh}^2, ball radius "
        f"{domain.ball_radius})",
        f"  manufactured residual : {sol.divergence_residual:.6g} "
        f"(tolerance {sol.residual_tolerance:.6g}, |h| = {sol.h_norm:.6g})",
        f"  boundary max |F|      : {sol.boundary_max:.6g} "
        f"(tolerance {sol.boundary_tolerance:.6g})",
        f"  witness ||F||_H1/||h|| : {sol.c_d_witness:.6g}",
        f"  C_D estimate          : {c_d:.6g} over {n_ens} random data",
        f"  C_D at half mesh      : {c_d_coarse:.6g} "
        f"(ratio {c_d / max(c_d_coarse, 1e-300):.4f})",
    ]
    ok = sol.divergence_residual <= sol.residual_tolerance \
        and sol.boundary_max <= sol.boundary_tolerance
    lines.append(f"  verdict               : {'pass' if ok else 'FAIL'}")
    _write_text(os.path.join(out, "divergence.txt"), "\n".join(lines))
    sol.f_field[:, :, 0].astype(np.float64).tofile(os.path.join(out, "F_x.bin"))
    sol.f_field[:, :, 1].astype(np.float64).tofile(os.path.join(out, "F_y.bin"))
    print("\n".join(lines))
    return 0 if ok else 2


def cmd_certificate(args) -> int:
    cfg = load_config(args.config, _cli_overrides(args))
    out = _ensure_outdir(args.out or cfg.out_dir)
    field = cfg.build_field()
    cert = certify_gcc(field, cfg.t_star, cfg.gcc_samples, cfg.dt_quad)
    lines = _config_header(cfg) + [cert.summary(), ""]
    if not cert.uniform_certified:
        lines.append("no decay certificate: uniform GCC not certified at this "
                     "sampling resolution")
        _write_text(os.path.join(out, "certificate.txt"), "\n".join(lines))
        print("\n".join(lines))
        return 2
    field, _ = normalize_chi(field, cfg.t_star, cfg.gcc_samples, cfg.dt_quad,
                             margin=cfg.chi_margin)
    merged = cfg.echo
    decay = end_to_end_certificate(
        field, cfg.t_star, cfg.grid, dt=float(merged["certificate.dt"]),
        n_random=int(merged["certificate.n_random"]),
        n_heldout=int(merged["certificate.n_heldout"]),
        seed=int(merged["certificate.seed"]), worst_point=cert.worst_point)
    lines.append(decay.summary())
    _write_text(os.path.join(out, "certificate.txt"), "\n".join(lines))
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def _cli_overrides(args) -> dict:
    over = {}
    if args.seed is not None:
        over["initial.seed"] = str(args.seed)
    if args.out is not None:
        over["output.dir"] = args.out
    return over


def _add_common(p):
    p.add_argument("--config", help="path to the run configuration file")
    p.add_argument("--out", help="output directory (overrides output.dir)")
    p.add_argument("--seed", type=int, help="override initial.seed")
    p.add_argument("--threads", type=int, help="numba thread count")
    p.add_argument("--gnuplot", action="store_true",
                   help="emit a gnuplot script next to the CSV")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hypoflow",
        description="kinetic Fokker-Planck laboratory on the torus")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "simulate": cmd_simulate,
        "gcc": cmd_gcc,
        "verify": cmd_verify,
        "bogovskii": cmd_bogovskii,
        "certificate": cmd_certificate,
    }
    for name in handlers:
        _add_common(sub.add_parser(name))
    args = parser.parse_args(argv)
    if args.threads:
        try:
            import numba
            numba.set_num_threads(args.threads)
        except ImportError:
            pass
    try:
        return handlers[args.command](args)
    except (NumericalAbort, GccError, CertificateError) as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:  # ConfigError and DomainError subclass this
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
