"""Strang-split time integration with exact spectral sub-flows.

The evolution dt f + v . grad_x f = sigma(x) d^2_theta f is split into free
transport and per-site velocity diffusion.  Both sub-flows are solved exactly
on the grid: transport multiplies each spatial Fourier mode (k1, k2) of the
theta = theta_j slice by exp(-2 pi i dt (k1 cos theta_j + k2 sin theta_j)),
and the collision step multiplies the theta-mode m at site x by
exp(-sigma(x) m^2 dt).  Transport is unitary and the collision multipliers
lie in (0, 1], so mass is conserved exactly, the discrete L2 norm never
increases, and all discretization error sits in the second-order splitting
commutator.  There is no CFL restriction; the recommended dt only controls
splitting accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .core import AbsorptionField, ConfigError, DensityField, GridSpec, TWO_PI
from .diagnostics import DiagnosticsSample, dissipation, \
    sigma_weighted_defect, good_set_density_sq
from .report import RunReport


class NumericalAbort(RuntimeError):
    """Non-finite state encountered during time stepping."""


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    record_every: int = 1
    keep_snapshots: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.t_end < self.dt:
            raise ConfigError("t_end must be at least dt")
        if self.record_every < 1:
            raise ConfigError("record_every must be a positive integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def default_dt(field: AbsorptionField) -> float:
    return min(0.01, 0.1 / max(1.0, field.sigma_sup))


class SpectralStepper:
    """Precomputed multipliers for repeated Strang steps at fixed dt."""

    def __init__(self, grid: GridSpec, field: AbsorptionField, dt: float):
        self.grid = grid
        self.dt = dt
        n, m = grid.n_x, grid.n_theta
        k = np.fft.fftfreq(n, 1.0 / n)
        kr = np.fft.rfftfreq(n, 1.0 / n)
        th = grid.thetas
        phase = k[:, None, None] * np.cos(th)[None, None, :] \
            + kr[None, :, None] * np.sin(th)[None, None, :]
        self.transport_half = np.exp(-2j * np.pi * (dt / 2.0) * phase)
        self.transport_full = self.transport_half ** 2
        mm = np.arange(m // 2 + 1)
        self.collision_full = np.exp(-field.sigma[:, :, None] * mm[None, None, :] ** 2 * dt)

    @staticmethod
    def _transport(vals, mult):
        spec = np.fft.rfft2(vals, axes=(0, 1))
        return np.fft.irfft2(spec * mult, axes=(0, 1), s=vals.shape[:2])

    @staticmethod
    def _collide(vals, mult):
        spec = np.fft.rfft(vals, axis=2)
        return np.fft.irfft(spec * mult, axis=2, n=vals.shape[2])

    def strang(self, vals):
        half = self._transport(vals, self.transport_half)
        mid = self._collide(half, self.collision_full)
        return self._transport(mid, self.transport_half)


def step_transport(f: DensityField, dt: float) -> DensityField:
    """Exact free-transport step (unitary phase shift per theta slice)."""
    grid = f.grid
    n = grid.n_x
    k = np.fft.fftfreq(n, 1.0 / n)
    kr = np.fft.rfftfreq(n, 1.0 / n)
    th = grid.thetas
    phase = k[:, None, None] * np.cos(th)[None, None, :] \
        + kr[None, :, None] * np.sin(th)[None, None, :]
    mult = np.exp(-2j * np.pi * dt * phase)
    return DensityField(grid, SpectralStepper._transport(f.values, mult))


def step_collision(f: DensityField, field: AbsorptionField, dt: float) -> DensityField:
    """Exact heat step on the velocity circle with frozen coefficient sigma(x)."""
    grid = f.grid
    mm = np.arange(grid.n_theta // 2 + 1)
    mult = np.exp(-field.sigma[:, :, None] * mm[None, None, :] ** 2 * dt)
    return DensityField(grid, SpectralStepper._collide(f.values, mult))


def strang_step(f: DensityField, field: AbsorptionField, dt: float) -> DensityField:
    """Symmetric composition transport(dt/2) o collision(dt) o transport(dt/2)."""
    return step_transport(step_collision(step_transport(f, dt / 2.0), field, dt),
                          dt / 2.0)


def evolve(f0: DensityField, field: AbsorptionField, config: SolverConfig,
           diagnostics_hook=None, zero_mass: bool = True,
           snapshot_t_max: float | None = None) -> tuple[RunReport, DensityField]:
    """Iterate Strang steps, recording diagnostics at the configured cadence.

    With ``zero_mass`` the global average is subtracted once at the start, so
    the evolved field is the fluctuation around the conserved equilibrium.
    The recorded ``dissipation`` series is the primary quantity
    D = -d/dt ||g||^2, obtained by centered differencing of the recorded
    squared norms (one-sided at the ends); its full-window trapezoid
    telescopes to ||g_0||^2 - ||g_T||^2 exactly.  The instantaneous spectral
    dissipation integral int sigma |d_theta g|^2 is recorded alongside, and
    the factor relating the two is reported rather than assumed.

    Aborts with the step index on non-finite values.
    """
    grid = f0.grid
    if field.grid != grid:
        raise ConfigError("field and initial data live on different grids")
    vals = f0.values.copy()
    if zero_mass:
        vals = vals - vals.mean()
    stepper = SpectralStepper(grid, field, config.dt)
    meas = grid.cell_measure

    times = [0.0]
    l2sq = [float(np.sum(vals * vals)) * meas]
    masses = [float(np.sum(vals)) * meas]
    inst = [dissipation(DensityField(grid, vals), field)]
    defect = [sigma_weighted_defect(DensityField(grid, vals), field)]
    gsd = [good_set_density_sq(DensityField(grid, vals), field)]
    snapshots = [DensityField(grid, vals.copy())] if config.keep_snapshots else None

    n_steps = config.n_steps
    for k in range(1, n_steps + 1):
        vals = stepper.strang(vals)
        if k % config.record_every == 0 or k == n_steps:
            if not np.all(np.isfinite(vals)):
                raise NumericalAbort(f"non-finite state at step {k}")
            g = DensityField(grid, vals.copy())
            times.append(k * config.dt)
            l2sq.append(float(np.sum(vals * vals)) * meas)
            masses.append(float(np.sum(vals)) * meas)
            inst.append(dissipation(g, field))
            defect.append(sigma_weighted_defect(g, field))
            gsd.append(good_set_density_sq(g, field))
            if snapshots is not None and (snapshot_t_max is None
                                          or k * config.dt <= snapshot_t_max + 1e-12):
                snapshots.append(g)
            if diagnostics_hook is not None:
                diagnostics_hook(k, g)

    t = np.asarray(times)
    e = np.asarray(l2sq)
    diss = _primary_dissipation(t, e)
    samples = [
        DiagnosticsSample(t=float(t[i]), mass=masses[i], l2_sq=float(e[i]),
                          dissipation=float(diss[i]),
                          sigma_weighted_defect=float(defect[i]),
                          good_set_density_sq=float(gsd[i]))
        for i in range(len(times))
    ]
    report = RunReport(samples=samples, dissipation_instant=np.asarray(inst),
                       snapshots=snapshots)
    return report, DensityField(grid, vals)


def _primary_dissipation(t, e):
    """Centered differences of the squared-norm series, one-sided at the ends.

    With trapezoid weights the full-window quadrature of this series
    telescopes exactly to e[0] - e[-1].
    """
    d = np.empty_like(e)
    if len(e) == 1:
        d[0] = 0.0
        return d
    d[0] = (e[0] - e[1]) / (t[1] - t[0])
    d[-1] = (e[-2] - e[-1]) / (t[-1] - t[-2])
    if len(e) > 2:
        d[1:-1] = (e[:-2] - e[2:]) / (t[2:] - t[:-2])
    return d


# ---------------------------------------------------------------------------
# Initial data presets
# ---------------------------------------------------------------------------


def make_single_mode(grid: GridSpec, eps: float = 0.5, k=(1, 0),
                     background: float = 1.0) -> DensityField:
    """background + eps * cos(2 pi k . x) cos(theta)."""
    X, Y = grid.meshgrid()
    th = grid.thetas
    phase = np.cos(TWO_PI * (k[0] * X + k[1] * Y))
    vals = background + eps * phase[:, :, None] * np.cos(th)[None, None, :]
    return DensityField(grid, vals)


def make_equilibrium_mode(grid: GridSpec, k=(1, 0)) -> DensityField:
    """Local-equilibrium datum cos(2 pi k . x), constant in theta."""
    X, Y = grid.meshgrid()
    phase = np.cos(TWO_PI * (k[0] * X + k[1] * Y))
    return DensityField(grid, np.repeat(phase[:, :, None], grid.n_theta, axis=2))


def make_harmonic_mode(grid: GridSpec) -> DensityField:
    """x-independent first velocity harmonic cos(theta)."""
    th = grid.thetas
    vals = np.broadcast_to(np.cos(th)[None, None, :],
                           (grid.n_x, grid.n_x, grid.n_theta)).copy()
    return DensityField(grid, vals)


def _periodic_gaussian(u, center, width):
    d = (u - center + 0.5) % 1.0 - 0.5
    return np.exp(-0.5 * (d / width) ** 2)


def make_bump(grid: GridSpec, center=(0.5, 0.5), theta_center: float = 0.0,
              width: float = 0.1, theta_width: float | None = None) -> DensityField:
    """Gaussian bump on phase space; subtract the mean for a zero-mass datum."""
    if theta_width is None:
        theta_width = np.pi * width
    X, Y = grid.meshgrid()
    th = grid.thetas
    gx = _periodic_gaussian(X, center[0], width) * _periodic_gaussian(Y, center[1], width)
    dth = (th - theta_center + np.pi) % TWO_PI - np.pi
    gt = np.exp(-0.5 * (dth / theta_width) ** 2)
    return DensityField(grid, gx[:, :, None] * gt[None, None, :])


def make_random_bandlimited(grid: GridSpec, k_max: int = 2, m_max: int = 2,
                            seed: int = 0, amplitude: float = 1.0) -> DensityField:
    """Random band-limited field with the given seed (reproducible)."""
    rng = np.random.default_rng(seed)
    X, Y = grid.meshgrid()
    th = grid.thetas
    vals = np.zeros((grid.n_x, grid.n_x, grid.n_theta))
    for kx in range(-k_max, k_max + 1):
        for ky in range(0, k_max + 1):
            for m in range(0, m_max + 1):
                a, b, c, d = rng.standard_normal(4)
                sp = TWO_PI * (kx * X + ky * Y)
                xpart = a * np.cos(sp) + b * np.sin(sp)
                tpart = np.cos(m * th) if m else np.ones_like(th)
                vals += xpart[:, :, None] * tpart[None, None, :]
                if m:
                    xpart2 = c * np.cos(sp) + d * np.sin(sp)
                    vals += xpart2[:, :, None] * np.sin(m * th)[None, None, :]
    vals *= amplitude / max(1.0, float(np.max(np.abs(vals))))
    return DensityField(grid, vals)
