"""Quadrature functionals of the state and decay-rate fitting.

All integrals use the uniform-grid rectangle rule, which is spectrally exact
for band-limited integrands and consistent with the solver's notion of mass
and norm, so conservation checks are exact rather than quadrature-limited.
Angular derivatives are spectral.

The micro-coercivity check is the Poincare inequality on the circle,

    int |g - <g> M|^2 dtheta <= C_P int |d_theta g|^2 dtheta,  C_P = 1,

which is sharp on the first harmonic (the spectral gap of d^2_theta is one).
The sigma-weighted variant from the energy estimate only makes sense where
sigma is bounded below; it is checked on the good set with C_P / sigma_min
and the discrepancy with the unweighted form is flagged, not resolved.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .core import AbsorptionField, DensityField


@dataclass(frozen=True)
class DiagnosticsSample:
    t: float
    mass: float
    l2_sq: float
    dissipation: float
    sigma_weighted_defect: float
    good_set_density_sq: float


def mass(f: DensityField) -> float:
    """int f dx dtheta (rectangle rule; exact for trigonometric data)."""
    return float(np.sum(f.values)) * f.grid.cell_measure


def l2_norm_sq(f: DensityField) -> float:
    return float(np.sum(f.values ** 2)) * f.grid.cell_measure


def velocity_average(f: DensityField) -> np.ndarray:
    """<g>(x) = int g dtheta, returned as an n_x x n_x array."""
    return f.values.sum(axis=2) * f.grid.dtheta


def theta_derivative(f: DensityField) -> np.ndarray:
    # usual real-FFT convention: the Nyquist mode differentiates to zero;
    # exact for data band-limited below n_theta/2
    m = np.fft.rfftfreq(f.grid.n_theta, 1.0 / f.grid.n_theta)
    spec = np.fft.rfft(f.values, axis=2)
    return np.fft.irfft(1j * m * spec, axis=2, n=f.grid.n_theta)


def dissipation(f: DensityField, field: AbsorptionField) -> float:
    """int sigma |d_theta g|^2 dx dtheta with a spectral theta-derivative."""
    dg = theta_derivative(f)
    return float(np.sum(field.sigma[:, :, None] * dg * dg)) * f.grid.cell_measure


def sigma_weighted_defect(f: DensityField, field: AbsorptionField) -> float:
    """int sigma |g - <g> M|^2 dx dtheta."""
    avg = velocity_average(f) * f.grid.local_equilibrium_M
    dev = f.values - avg[:, :, None]
    return float(np.sum(field.sigma[:, :, None] * dev * dev)) * f.grid.cell_measure


def good_set_density_sq(f: DensityField, field: AbsorptionField) -> float:
    """int_Sigma <g>^2 dx over the sharp support mask of Sigma."""
    avg = velocity_average(f)
    m = field.support_mask()
    return float(np.sum(avg[m] ** 2)) * f.grid.dx ** 2


def micro_coercivity_pairs(f: DensityField) -> tuple[np.ndarray, np.ndarray]:
    """Per-site pair (int |g - <g>M|^2 dtheta, int |d_theta g|^2 dtheta).

    The unweighted Poincare inequality lhs <= rhs holds at every site with
    C_P = 1; both quadratures are spectrally exact on the grid.
    """
    avg = velocity_average(f) * f.grid.local_equilibrium_M
    dev = f.values - avg[:, :, None]
    lhs = (dev * dev).sum(axis=2) * f.grid.dtheta
    dg = theta_derivative(f)
    rhs = (dg * dg).sum(axis=2) * f.grid.dtheta
    return lhs, rhs


def micro_coercivity_defect(f: DensityField, field: AbsorptionField,
                            sigma_min: float | None = None):
    """Good-set restricted pairs for the sigma-weighted inequality.

    sigma_min defaults to amplitude/2 on the eroded region recorded at build
    time; the weighted constant is C_P / sigma_min there.
    """
    lhs, rhs = micro_coercivity_pairs(f)
    mask = field.eroded_mask()
    if sigma_min is None:
        sigma_min = field.amplitude / 2.0
    return lhs[mask], rhs[mask], 1.0 / sigma_min


def equilibrium_projection(f: DensityField) -> DensityField:
    """Replace g by <g> M (idempotent local-equilibrium projection)."""
    avg = velocity_average(f) * f.grid.local_equilibrium_M
    vals = np.repeat(avg[:, :, None], f.grid.n_theta, axis=2)
    return DensityField(f.grid, vals)


@dataclass(frozen=True)
class DecayFit:
    lambda_emp: float
    c_emp: float
    fit_window: tuple
    residual: float
    n_points: int

    def summary(self) -> str:
        return (f"decay fit: lambda = {self.lambda_emp:.6g}, prefactor = "
                f"{self.c_emp:.6g}, window = [{self.fit_window[0]:.3g}, "
                f"{self.fit_window[1]:.3g}], rms residual = {self.residual:.3g}")


def fit_decay(ts, norms, window: tuple | None = None,
              transient_fraction: float = 0.2, floor: float = 1e-13) -> DecayFit:
    """Least-squares slope of -log ||g_t|| over the fit window.

    The first ``transient_fraction`` of the horizon is dropped by default.
    Rejects windows with fewer than 10 samples above the roundoff floor.
    """
    ts = np.asarray(ts, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if window is None:
        t_lo = ts[0] + transient_fraction * (ts[-1] - ts[0])
        window = (float(t_lo), float(ts[-1]))
    sel = (ts >= window[0]) & (ts <= window[1])
    if np.any(norms[sel] <= floor):
        raise ValueError("decay fit window touches the roundoff floor")
    t = ts[sel]
    y = np.log(norms[sel])
    if t.size < 10:
        raise ValueError("decay fit needs at least 10 samples in the window")
    A = np.vstack([t, np.ones_like(t)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope, intercept = coef
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return DecayFit(lambda_emp=float(-slope), c_emp=float(np.exp(intercept)),
                    fit_window=window, residual=resid, n_points=int(t.size))
