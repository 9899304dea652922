"""Run reports: diagnostic time series, inequality residuals, CSV emission.

The CSV schema is fixed: ``t,mass,l2,dissipation,good_set_density_sq,
sigma_defect`` with one timestamp comment line on top (excluded from the
byte-reproducibility contract).  The ``l2`` column is the L2 norm; the
``dissipation`` column is the primary series D = -d/dt ||g||^2 whose
full-window trapezoid telescopes exactly to the energy drop.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
import datetime
import numpy as np


@dataclass
class InequalityCheck:
    """One verified inequality: name, sides, slack and verdict.

    ``measured`` carries the smallest constant realizing the inequality when
    the check measures one (C 3, C_delta).
    """

    name: str
    lhs: float
    rhs: float
    tolerance: float
    passed: bool
    note: str = ""
    measured: float | None = None

    @property
    def slack_ratio(self) -> float:
        if self.lhs == 0.0:
            return float("inf") if self.rhs > 0 else 1.0
        return self.rhs / self.lhs

    def row(self) -> str:
        verdict = "pass" if self.passed else "FAIL"
        return (f"{self.name:<28s} lhs={self.lhs:<13.6g} rhs={self.rhs:<13.6g} "
                f"slack={self.slack_ratio:<10.4g} tol={self.tolerance:<9.3g} {verdict}"
                + (f"  [{self.note}]" if self.note else ""))


@dataclass
class RunReport:
    """Diagnostics of one evolution run plus everything verified on it."""

    samples: list
    dissipation_instant: np.ndarray | None = None
    snapshots: list | None = None
    config_echo: dict = dc_field(default_factory=dict)
    decay_fit: object = None
    ledger: object = None
    checks: list = dc_field(default_factory=list)
    certificates: list = dc_field(default_factory=list)
    notes: list = dc_field(default_factory=list)

    # --- series accessors

    @property
    def t(self):
        return np.array([s.t for s in self.samples])

    @property
    def mass_series(self):
        return np.array([s.mass for s in self.samples])

    @property
    def l2_sq(self):
        return np.array([s.l2_sq for s in self.samples])

    @property
    def l2(self):
        return np.sqrt(self.l2_sq)

    @property
    def dissipation_series(self):
        return np.array([s.dissipation for s in self.samples])

    @property
    def good_set_series(self):
        return np.array([s.good_set_density_sq for s in self.samples])

    @property
    def sigma_defect_series(self):
        return np.array([s.sigma_weighted_defect for s in self.samples])

    def index_at(self, t_target: float) -> int:
        """Index of the recorded time closest to t_target."""
        return int(np.argmin(np.abs(self.t - t_target)))

    def dissipation_factor(self) -> float:
        """Measured constant relating -d/dt ||g||^2 to int sigma |d_theta g|^2.

        The analytic computation gives 2; the measured value is recorded in
        the report rather than assumed from the energy-estimate display.
        """
        if self.dissipation_instant is None:
            return float("nan")
        inst = np.asarray(self.dissipation_instant)
        prim = self.dissipation_series
        sel = inst > 1e-13 * max(1.0, float(self.l2_sq[0]))
        sel[0] = sel[-1] = False  # one-sided differences are first order
        if not np.any(sel):
            return float("nan")
        return float(np.median(prim[sel] / inst[sel]))

    # --- CSV

    CSV_HEADER = "t,mass,l2,dissipation,good_set_density_sq,sigma_defect"

    def write_csv(self, path, timestamp: str | None = None):
        if timestamp is None:
            timestamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        with open(path, "w") as fh:
            fh.write(f"# written {timestamp}\n")
            fh.write(self.CSV_HEADER + "\n")
            for s in self.samples:
                fh.write("%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n" % (
                    s.t, s.mass, np.sqrt(s.l2_sq), s.dissipation,
                    s.good_set_density_sq, s.sigma_weighted_defect))


def load_csv(path) -> RunReport:
    """Rebuild a report (series only) from a run CSV."""
    from .diagnostics import DiagnosticsSample

    rows = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
    samples = [
        DiagnosticsSample(t=r[0], mass=r[1], l2_sq=r[2] ** 2, dissipation=r[3],
                          good_set_density_sq=r[4], sigma_weighted_defect=r[5])
        for r in rows
    ]
    return RunReport(samples=samples)


def trapz_series(t, y, t_hi: float | None = None) -> float:
    """Trapezoid quadrature of a recorded series up to t_hi (default: all)."""
    t = np.asarray(t)
    y = np.asarray(y)
    if t_hi is not None:
        sel = t <= t_hi + 1e-12
        t, y = t[sel], y[sel]
    return float(np.trapezoid(y, t))
