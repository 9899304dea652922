"""Free transport on the torus and geometric control certification.

The transport semigroup is the straight-line flow Z_t(x, v) = (x + t v, v)
with unit speed.  The uniform geometric control condition (GCC) asks for a
horizon T* and a constant c > 0 such that every ray accumulates at least c
of sigma within time T*.  Here it is certified by exhaustive sampling: the
line integral of sigma is minimized over a uniform (position, angle) grid
with a trapezoid quadrature along each ray, and the certificate records the
sampling resolution it was obtained at.  A rigorous continuum minimum is out
of scope; the trapped-ray fraction below a threshold is reported instead of
a hard yes/no for the non-uniform condition.

The control weight psi_t(z) = chi(z) / int_0^T* chi(Z_{s-t}(z)) ds is
tabulated on the space-time grid.  Its defining invariant is that the
quadrature of psi_t(Z_t(z)) over [0, T*] equals one along every orbit.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from .core import (AbsorptionField, GridSpec, PhasePoint, SupportRegion, TWO_PI,
                   ConfigError)
from ._kernels import ray_integrals


class GccError(RuntimeError):
    """Certification failure (trapped rays, margin violation)."""


def flow(z: PhasePoint, t: float) -> PhasePoint:
    """Exact free flow: position advances by t * (cos theta, sin theta) mod 1."""
    cx, cy = np.cos(z.theta), np.sin(z.theta)
    return PhasePoint(z.x1 + t * cx, z.x2 + t * cy, z.theta)


def _n_quad(field: AbsorptionField, t_star: float, dt_quad) -> int:
    if dt_quad is None:
        dt_quad = field.smoothing_width / 4.0
    if dt_quad <= 0:
        raise ConfigError("dt_quad must be positive")
    return max(3, int(np.ceil(t_star / dt_quad)) + 1)


def line_integral(field: AbsorptionField, z: PhasePoint, t_star: float,
                  dt_quad: float | None = None, which: str = "sigma") -> float:
    """Trapezoid quadrature of sigma (or chi) along the ray from z over [0, T*].

    The coefficient is evaluated by periodic bilinear interpolation on its
    spatial grid.
    """
    if t_star <= 0:
        raise ConfigError("t_star must be positive")
    coeff = field.sigma if which == "sigma" else field.chi
    nq = _n_quad(field, t_star, dt_quad)
    out = ray_integrals(coeff, np.array([z.x1]), np.array([z.x2]),
                        np.array([z.theta]), t_star, nq)
    return float(out[0])


@dataclass(frozen=True)
class GccCertificate:
    """Outcome of sampled GCC checking.

    c_min is the smallest sampled line integral, attained at worst_point.
    ``uniform_certified`` states c_min > threshold at this sampling
    resolution; trapped_fraction is the fraction of sampled rays whose
    integral falls below the threshold.
    """

    t_star: float
    c_min: float
    worst_point: PhasePoint
    sample_counts: tuple
    quadrature_step: float
    threshold: float
    trapped_fraction: float
    which: str = "sigma"

    @property
    def uniform_certified(self) -> bool:
        return self.c_min > self.threshold

    def summary(self) -> str:
        lines = [
            "geometric control certificate (at sampling resolution)",
            f"  coefficient      : {self.which}",
            f"  t_star           : {self.t_star:.6g}",
            f"  c_min            : {self.c_min:.10g}",
            f"  worst ray        : x = ({self.worst_point.x1:.6f}, "
            f"{self.worst_point.x2:.6f}), theta = {self.worst_point.theta:.6f}",
            f"  samples          : {self.sample_counts[0]}^2 positions x "
            f"{self.sample_counts[1]} angles",
            f"  quadrature step  : {self.quadrature_step:.6g}",
            f"  threshold        : {self.threshold:.3g}",
            f"  trapped fraction : {self.trapped_fraction:.6f}",
            f"  uniform GCC      : {'certified' if self.uniform_certified else 'NOT certified'}",
        ]
        return "\n".join(lines)


def certify_gcc(field: AbsorptionField, t_star: float,
                sample_counts: tuple = (128, 64),
                dt_quad: float | None = None,
                which: str = "sigma",
                threshold: float = 1e-9) -> GccCertificate:
    """Minimize the ray integral over a uniform (position, angle) sample grid.

    The minimum is reduced deterministically: the lexicographically smallest
    flat sample index wins ties, independent of thread scheduling.
    """
    if t_star <= 0:
        raise ConfigError("t_star must be positive")
    n_pos, n_ang = sample_counts
    coeff = field.sigma if which == "sigma" else field.chi
    nq = _n_quad(field, t_star, dt_quad)
    xs = np.arange(n_pos) / n_pos
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    th = TWO_PI * np.arange(n_ang) / n_ang
    x0 = np.repeat(X.ravel(), n_ang)
    y0 = np.repeat(Y.ravel(), n_ang)
    ang = np.tile(th, n_pos * n_pos)
    vals = ray_integrals(coeff, x0, y0, ang, t_star, nq)
    imin = int(np.argmin(vals))  # first occurrence: deterministic tie-break
    worst = PhasePoint(x0[imin], y0[imin], ang[imin])
    c_min = float(vals[imin])
    trapped = float(np.count_nonzero(vals <= threshold)) / vals.size
    return GccCertificate(
        t_star=t_star, c_min=c_min, worst_point=worst,
        sample_counts=(n_pos, n_ang), quadrature_step=t_star / (nq - 1),
        threshold=threshold, trapped_fraction=trapped, which=which)


def normalize_chi(field: AbsorptionField, t_star: float,
                  sample_counts: tuple = (128, 64),
                  dt_quad: float | None = None,
                  margin: float = 1e-3) -> tuple[AbsorptionField, GccCertificate]:
    """Rescale chi so the sampled minimum of its line integral is 1 + margin.

    Raises GccError when the sampled minimum vanishes (trapped rays): the
    control condition on chi cannot be realized by rescaling.
    """
    cert = certify_gcc(field, t_star, sample_counts, dt_quad, which="chi")
    if cert.c_min <= cert.threshold:
        raise GccError(
            f"chi normalization impossible: sampled ray integral minimum is "
            f"{cert.c_min:.3g} (trapped ray at x=({cert.worst_point.x1:.4f},"
            f"{cert.worst_point.x2:.4f}), theta={cert.worst_point.theta:.4f})")
    scale = (1.0 + margin) / cert.c_min
    scaled = field.with_chi_scaled(scale)
    new_cert = GccCertificate(
        t_star=cert.t_star, c_min=cert.c_min * scale,
        worst_point=cert.worst_point, sample_counts=cert.sample_counts,
        quadrature_step=cert.quadrature_step, threshold=cert.threshold,
        trapped_fraction=cert.trapped_fraction, which="chi")
    return scaled, new_cert


# ---------------------------------------------------------------------------
# Control weight psi
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ControlWeight:
    """psi sampled on the space-time grid (n_t, n_x, n_x, n_theta).

    psi >= 0, psi vanishes with chi, and the orbit quadrature of
    psi_t(Z_t(z)) over [0, T*] equals one.
    """

    grid: GridSpec
    t_star: float
    n_t: int
    values: np.ndarray
    min_denominator: float

    @property
    def t_nodes(self):
        return np.linspace(0.0, self.t_star, self.n_t)


def psi_denominator(field: AbsorptionField, t: float, z: PhasePoint,
                    t_star: float, dt_quad: float | None = None) -> float:
    """int_0^T* chi(Z_{s-t}(z)) ds, evaluated as a ray quadrature.

    Shifting the starting point backwards along the ray reduces the window
    [-t, T*-t] to the standard window [0, T*].
    """
    back = flow(z, -t)
    return line_integral(field, back, t_star, dt_quad, which="chi")


def psi_eval(field: AbsorptionField, t: float, z: PhasePoint, t_star: float,
             dt_quad: float | None = None) -> float:
    """Per-query evaluation psi_t(z) = chi(z) / denominator (spot checks)."""
    chi_val = _interp_chi(field, z)
    if chi_val == 0.0:
        return 0.0
    return chi_val / psi_denominator(field, t, z, t_star, dt_quad)


def _interp_chi(field: AbsorptionField, z: PhasePoint) -> float:
    n = field.grid.n_x
    fx = (z.x1 % 1.0) * n
    fy = (z.x2 % 1.0) * n
    ix, iy = int(fx), int(fy)
    tx, ty = fx - ix, fy - iy
    ix0, iy0 = ix % n, iy % n
    ix1, iy1 = (ix0 + 1) % n, (iy0 + 1) % n
    c = field.chi
    return float((1 - tx) * (1 - ty) * c[ix0, iy0] + tx * (1 - ty) * c[ix1, iy0]
                 + (1 - tx) * ty * c[ix0, iy1] + tx * ty * c[ix1, iy1])


def build_psi(field: AbsorptionField, t_star: float, n_t: int,
              dt_quad: float | None = None,
              sample_counts: tuple = (128, 64),
              require_certificate: bool = True) -> ControlWeight:
    """Tabulate psi on the space-time grid.

    Requires the sampled chi line-integral minimum to be at least one
    (chi normalized beforehand); aborts when any tabulated denominator
    falls below 0.5, which would void the certification margin.
    """
    if require_certificate:
        cert = certify_gcc(field, t_star, sample_counts, dt_quad, which="chi")
        if cert.c_min < 1.0:
            raise GccError(
                f"build_psi requires the normalized chi to satisfy the control "
                f"condition; sampled minimum {cert.c_min:.6g} < 1")
    grid = field.grid
    nq = _n_quad(field, t_star, dt_quad)
    t_nodes = np.linspace(0.0, t_star, n_t)
    xs = grid.xs
    th = grid.thetas
    cth, sth = np.cos(th), np.sin(th)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    values = np.empty((n_t, grid.n_x, grid.n_x, grid.n_theta))
    min_denom = np.inf
    for it, t in enumerate(t_nodes):
        # backward-shifted start points for all (x, theta) at once
        x0 = (X[:, :, None] - t * cth[None, None, :]).ravel()
        y0 = (Y[:, :, None] - t * sth[None, None, :]).ravel()
        ang = np.broadcast_to(th[None, None, :], X.shape + (grid.n_theta,)).ravel()
        denom = ray_integrals(field.chi, x0, y0, ang, t_star, nq)
        denom = denom.reshape(grid.n_x, grid.n_x, grid.n_theta)
        min_denom = min(min_denom, float(denom.min()))
        if min_denom < 0.5:
            raise GccError(
                f"psi tabulation aborted: denominator {min_denom:.4g} < 0.5 "
                f"at t = {t:.4g} (certification margin violated)")
        values[it] = field.chi[:, :, None] / denom
    return ControlWeight(grid=grid, t_star=t_star, n_t=n_t, values=values,
                         min_denominator=min_denom)


def psi_orbit_quadrature(field: AbsorptionField, z: PhasePoint, t_star: float,
                         n_nodes: int | None = None,
                         dt_quad: float | None = None) -> float:
    """Trapezoid quadrature of psi_t(Z_t(z)) over t in [0, T*].

    Uses the per-query psi evaluation.  By the flow group property the
    denominator is constant along the orbit, and with the default node count
    (the same trapezoid discretization the denominator uses) the outer
    quadrature reproduces the denominator, so the invariant value one holds
    at the discrete level up to floating point.  Passing a different
    ``n_nodes`` turns this into a genuine two-discretization consistency
    check accurate to the quadrature order.
    """
    if n_nodes is None:
        n_nodes = _n_quad(field, t_star, dt_quad)
    ts = np.linspace(0.0, t_star, n_nodes)
    w = np.ones(n_nodes)
    w[0] = w[-1] = 0.5
    vals = np.array([psi_eval(field, t, flow(z, t), t_star, dt_quad) for t in ts])
    return float(t_star * (vals @ w) / (n_nodes - 1))


def write_psi_raw(path, psi: ControlWeight):
    """Dump psi to raw binary: int64 header (n_t, n_x, n_x, n_theta) + doubles."""
    with open(path, "wb") as fh:
        np.asarray(psi.values.shape, dtype=np.int64).tofile(fh)
        np.ascontiguousarray(psi.values).tofile(fh)


# ---------------------------------------------------------------------------
# Multi-component reachability under the flow
# ---------------------------------------------------------------------------


def component_reachability(region: SupportRegion, t_star: float,
                           samples: tuple = (48, 64),
                           dt: float = 0.01) -> np.ndarray:
    """Boolean matrix: entry (i, j) true iff a sampled ray from component i
    enters component j within time t_star.

    Start points are grid samples inside each component; the march uses a
    uniform time step, so hits shorter than dt can be missed (refine dt for
    thin components).
    """
    k = len(region.components)
    n_pts, n_ang = samples
    xs = (np.arange(n_pts) + 0.5) / n_pts
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    th = TWO_PI * np.arange(n_ang) / n_ang
    n_steps = int(np.ceil(t_star / dt)) + 1
    ts = np.linspace(0.0, t_star, n_steps)
    reach = np.zeros((k, k), dtype=bool)
    for i, comp in enumerate(region.components):
        inside = comp.depth(X, Y) > 0.0
        px = X[inside]
        py = Y[inside]
        if px.size == 0:
            continue
        if px.size > 64:  # cap start points per component, keep determinism
            step = px.size // 64
            px, py = px[::step], py[::step]
        # positions: (n_start, n_ang, n_steps)
        posx = px[:, None, None] + ts[None, None, :] * np.cos(th)[None, :, None]
        posy = py[:, None, None] + ts[None, None, :] * np.sin(th)[None, :, None]
        for j, target in enumerate(region.components):
            hit = target.depth(posx % 1.0, posy % 1.0) > 0.0
            reach[i, j] = bool(hit.any())
    return reach


def _irreducible(mat: np.ndarray) -> bool:
    k = mat.shape[0]
    closure = mat | np.eye(k, dtype=bool)
    for _ in range(k):
        closure = closure | (closure @ closure)
    return bool(closure.all())


def reachability_horizon(region: SupportRegion, t_star_candidates,
                         samples: tuple = (48, 64), dt: float = 0.01):
    """Smallest sampled T* whose reachability matrix is irreducible, or None."""
    for t_star in sorted(t_star_candidates):
        if _irreducible(component_reachability(region, t_star, samples, dt)):
            return t_star
    return None
