"""Domain types for the kinetic model on the unit torus with unit velocities.

Phase space is T^2 x S^1: positions live in [0,1)^2, velocity directions are
angles theta in [0,2pi) encoding v = (cos theta, sin theta).  The absorption
coefficient sigma(x) >= 0 and its control companion chi are built from
primitive shapes (band / cross / disk / rectangle / full torus) mollified to
C^1 with a smoothstep ramp of prescribed width, so that sup norms, the
support inclusion supp chi inside Sigma, and the gradient bound are all
certifiable by construction.  A raw grid import path exists for arbitrary
sigma but carries no smoothness certificate.

Grids are uniform tensor grids with power-of-two sizes, so the discrete
Fourier transforms used by the solver are exact fast transforms.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

TWO_PI = 2.0 * np.pi


class ConfigError(ValueError):
    """Invalid construction parameters (bad shapes, widths, grid sizes)."""


def torus_delta(a, b):
    """Signed distance a - b on the unit circle, reduced into [-1/2, 1/2)."""
    return (a - b + 0.5) % 1.0 - 0.5


def smoothstep(u):
    """C^1 ramp: 0 for u<=0, u^2(3-2u) on [0,1], 1 for u>=1. Max slope 3/2."""
    u = np.clip(u, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhasePoint:
    """A point z = (x, v) with x on T^2 and v = (cos theta, sin theta)."""

    x1: float
    x2: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "x1", self.x1 % 1.0)
        object.__setattr__(self, "x2", self.x2 % 1.0)
        object.__setattr__(self, "theta", self.theta % TWO_PI)

    @property
    def velocity(self):
        return (np.cos(self.theta), np.sin(self.theta))


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid: n_x points per spatial axis, n_theta angles.

    Grid nodes are x_i = i/n_x and theta_j = 2 pi j/n_theta.  The local
    equilibrium on the velocity circle is the constant M = 1/(2 pi), the
    reciprocal of the circle measure.
    """

    n_x: int
    n_theta: int

    def __post_init__(self):
        if self.n_x < 8 or self.n_theta < 8:
            raise ConfigError("grid sizes must be at least 8")
        if not (_is_pow2(self.n_x) and _is_pow2(self.n_theta)):
            raise ConfigError("grid sizes must be powers of two")

    @property
    def dx(self) -> float:
        return 1.0 / self.n_x

    @property
    def dtheta(self) -> float:
        return TWO_PI / self.n_theta

    @property
    def local_equilibrium_M(self) -> float:
        return 1.0 / TWO_PI

    @property
    def xs(self):
        return np.arange(self.n_x) / self.n_x

    @property
    def thetas(self):
        return TWO_PI * np.arange(self.n_theta) / self.n_theta

    def meshgrid(self):
        return np.meshgrid(self.xs, self.xs, indexing="ij")

    @property
    def cell_measure(self) -> float:
        return self.dx * self.dx * self.dtheta


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DensityField:
    """A real density g(x1, x2, theta) sampled on the grid.

    Values are immutable after construction; all operations return fresh
    fields.  The equivalent spectral representation is obtained with
    :func:`transform_forward`.
    """

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = self.values
        n, m = self.grid.n_x, self.grid.n_theta
        if v.shape != (n, n, m):
            raise ConfigError(f"field shape {v.shape} does not match grid ({n},{n},{m})")
        if not np.all(np.isfinite(v)):
            raise ConfigError("field contains non-finite entries")
        object.__setattr__(self, "values", _freeze(v))

    def __add__(self, other):
        return DensityField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return DensityField(self.grid, self.values - other.values)

    def __mul__(self, a: float):
        return DensityField(self.grid, self.values * a)

    __rmul__ = __mul__


# ---------------------------------------------------------------------------
# Primitive shapes
#
# Each shape provides a C^1 "ramp" profile in [0,1]: 0 outside the shape,
# 1 on the interior eroded by the ramp width.  ``erode`` shifts the profile
# inward, which is how the chi companion gets support strictly inside Sigma.
# Rectangles use a per-axis product so the profile stays C^1 at corners.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Band:
    """Axis-aligned periodic band of given width: {|x_axis - center| < w/2}."""

    axis: int
    center: float
    width: float
    kind = "band"

    def validate(self):
        if self.axis not in (0, 1):
            raise ConfigError("band axis must be 0 or 1")
        if not 0.0 < self.width < 1.0:
            raise ConfigError("band width must lie in (0,1)")

    @property
    def min_dimension(self):
        return self.width

    def depth(self, X, Y):
        c = X if self.axis == 0 else Y
        return self.width / 2.0 - np.abs(torus_delta(c, self.center))

    def ramp(self, X, Y, width, erode=0.0):
        return smoothstep((self.depth(X, Y) - erode) / width)


@dataclass(frozen=True)
class Disk:
    """Disk in the torus metric."""

    cx: float
    cy: float
    radius: float
    kind = "disk"

    def validate(self):
        if not 0.0 < self.radius < 0.5:
            raise ConfigError("disk radius must lie in (0, 0.5)")

    @property
    def min_dimension(self):
        return self.radius

    def depth(self, X, Y):
        dx = torus_delta(X, self.cx)
        dy = torus_delta(Y, self.cy)
        return self.radius - np.sqrt(dx * dx + dy * dy)

    def ramp(self, X, Y, width, erode=0.0):
        return smoothstep((self.depth(X, Y) - erode) / width)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle; the ramp is a per-axis product (C^1 corners)."""

    cx: float
    cy: float
    width_x: float
    width_y: float
    kind = "rect"

    def validate(self):
        if not (0.0 < self.width_x < 1.0 and 0.0 < self.width_y < 1.0):
            raise ConfigError("rectangle widths must lie in (0,1)")

    @property
    def min_dimension(self):
        return min(self.width_x, self.width_y)

    def depth(self, X, Y):
        dx = self.width_x / 2.0 - np.abs(torus_delta(X, self.cx))
        dy = self.width_y / 2.0 - np.abs(torus_delta(Y, self.cy))
        return np.minimum(dx, dy)

    def ramp(self, X, Y, width, erode=0.0):
        dx = self.width_x / 2.0 - np.abs(torus_delta(X, self.cx))
        dy = self.width_y / 2.0 - np.abs(torus_delta(Y, self.cy))
        return smoothstep((dx - erode) / width) * smoothstep((dy - erode) / width)


@dataclass(frozen=True)
class Cross:
    """Union of a horizontal and a vertical band of equal width through a center."""

    cx: float
    cy: float
    width: float
    kind = "cross"

    def validate(self):
        if not 0.0 < self.width < 1.0:
            raise ConfigError("cross width must lie in (0,1)")

    @property
    def min_dimension(self):
        return self.width

    def _bands(self):
        return (Band(0, self.cx, self.width), Band(1, self.cy, self.width))

    def depth(self, X, Y):
        a, b = self._bands()
        return np.maximum(a.depth(X, Y), b.depth(X, Y))

    def ramp(self, X, Y, width, erode=0.0):
        a, b = self._bands()
        ra = a.ramp(X, Y, width, erode)
        rb = b.ramp(X, Y, width, erode)
        return 1.0 - (1.0 - ra) * (1.0 - rb)


@dataclass(frozen=True)
class FullTorus:
    """The whole torus; realizes sigma identically equal to the amplitude."""

    kind = "full"

    def validate(self):
        pass

    @property
    def min_dimension(self):
        return 1.0

    def depth(self, X, Y):
        return np.full_like(np.asarray(X, dtype=float), np.inf)

    def ramp(self, X, Y, width, erode=0.0):
        return np.ones_like(np.asarray(X, dtype=float))


Shape = Band | Disk | Rect | Cross | FullTorus


@dataclass(frozen=True)
class SupportRegion:
    """The thermalisation set Sigma as a finite union of primitive shapes."""

    components: tuple

    def __init__(self, components):
        comps = tuple(components)
        if len(comps) == 0:
            raise ConfigError("support region needs at least one component")
        for c in comps:
            c.validate()
        object.__setattr__(self, "components", comps)

    @property
    def min_dimension(self):
        return min(c.min_dimension for c in self.components)

    def depth(self, X, Y):
        d = self.components[0].depth(X, Y)
        for c in self.components[1:]:
            d = np.maximum(d, c.depth(X, Y))
        return d

    def ramp(self, X, Y, width, erode=0.0):
        # complement-product union keeps the profile C^1 where shapes overlap
        prod = 1.0 - self.components[0].ramp(X, Y, width, erode)
        for c in self.components[1:]:
            prod = prod * (1.0 - c.ramp(X, Y, width, erode))
        return 1.0 - prod

    def contains(self, X, Y):
        return self.depth(X, Y) > 0.0


@dataclass(frozen=True)
class AbsorptionField:
    """sigma(x) >= 0 with its control companion chi and support region Sigma.

    By construction sigma equals ``amplitude`` on the interior of Sigma eroded
    by the smoothing width, vanishes outside Sigma, and transitions with a C^1
    mollified ramp.  chi has support strictly inside Sigma and satisfies
    chi <= kappa * sigma pointwise with the recorded constant kappa.  Sup
    norms on the grid are computed once and stored.
    """

    grid: GridSpec
    sigma: np.ndarray
    chi: np.ndarray
    region: SupportRegion | None
    smoothing_width: float
    amplitude: float
    chi_scale: float = 1.0
    certified: bool = True

    def __post_init__(self):
        n = self.grid.n_x
        if self.sigma.shape != (n, n) or self.chi.shape != (n, n):
            raise ConfigError("absorption field arrays must be n_x x n_x")
        if np.any(self.sigma < 0) or np.any(self.chi < 0):
            raise ConfigError("sigma and chi must be non-negative")
        object.__setattr__(self, "sigma", _freeze(self.sigma))
        object.__setattr__(self, "chi", _freeze(self.chi))

    # --- recorded sup norms (uniform grid, centered differences for grads)

    @property
    def sigma_sup(self) -> float:
        return float(np.max(self.sigma))

    @property
    def chi_sup(self) -> float:
        return float(np.max(self.chi))

    def _grad_sup(self, a) -> float:
        n = self.grid.n_x
        gx = (np.roll(a, -1, axis=0) - np.roll(a, 1, axis=0)) * (n / 2.0)
        gy = (np.roll(a, -1, axis=1) - np.roll(a, 1, axis=1)) * (n / 2.0)
        return float(np.max(np.sqrt(gx * gx + gy * gy)))

    @property
    def grad_chi_sup(self) -> float:
        return self._grad_sup(self.chi)

    @property
    def grad_sigma_sup(self) -> float:
        return self._grad_sup(self.sigma)

    @property
    def kappa(self) -> float:
        """Constant with chi <= kappa * sigma on the grid."""
        return self.chi_scale / self.amplitude

    def support_mask(self):
        """Sharp grid mask of Sigma (positive shape depth)."""
        X, Y = self.grid.meshgrid()
        if self.region is None:
            return self.sigma > 0.0
        return self.region.contains(X, Y)

    def eroded_mask(self):
        """Grid mask where sigma sits at its full amplitude plateau."""
        X, Y = self.grid.meshgrid()
        if self.region is None:
            return self.sigma >= 0.5 * self.sigma_sup
        return self.region.depth(X, Y) >= self.smoothing_width

    def with_chi_scaled(self, scale: float) -> "AbsorptionField":
        return AbsorptionField(
            grid=self.grid,
            sigma=self.sigma,
            chi=self.chi * scale,
            region=self.region,
            smoothing_width=self.smoothing_width,
            amplitude=self.amplitude,
            chi_scale=self.chi_scale * scale,
            certified=self.certified,
        )


def build_sigma(region: SupportRegion, smoothing_width: float, amplitude: float,
                grid: GridSpec) -> AbsorptionField:
    """Build sigma = amplitude * mollified indicator of Sigma, plus chi.

    chi is the same construction eroded by half the smoothing width, so its
    support is strictly inside Sigma and chi <= sigma/amplitude pointwise
    (before any later rescaling of chi).
    """
    if smoothing_width <= 0.0:
        raise ConfigError("smoothing_width must be positive")
    if smoothing_width > 0.5 * region.min_dimension:
        raise ConfigError(
            f"smoothing_width {smoothing_width} exceeds half the smallest "
            f"shape dimension {region.min_dimension}")
    if amplitude <= 0.0:
        raise ConfigError("amplitude must be positive")
    X, Y = grid.meshgrid()
    w = smoothing_width
    sigma = amplitude * region.ramp(X, Y, w)
    # eroded, narrower ramp: support {depth >= w/2}, plateau {depth >= w}
    chi = region.ramp(X, Y, w / 2.0, erode=w / 2.0)
    return AbsorptionField(grid=grid, sigma=sigma, chi=chi, region=region,
                           smoothing_width=w, amplitude=amplitude)


def absorption_from_raw(grid: GridSpec, sigma: np.ndarray) -> AbsorptionField:
    """Import a raw sigma matrix.  No smoothness certificate is attached.

    chi defaults to sigma normalized to unit sup, so supp chi = supp sigma.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (grid.n_x, grid.n_x):
        raise ConfigError("raw sigma must be n_x x n_x")
    if np.any(sigma < 0) or not np.all(np.isfinite(sigma)):
        raise ConfigError("raw sigma must be finite and non-negative")
    sup = float(np.max(sigma))
    if sup == 0.0:
        raise ConfigError("raw sigma is identically zero")
    # chi = sigma / sup is the canonical raw companion: chi_raw = sigma/amplitude
    return AbsorptionField(grid=grid, sigma=sigma, chi=sigma / sup, region=None,
                           smoothing_width=grid.dx, amplitude=sup,
                           chi_scale=1.0, certified=False)


def load_sigma_raw(path, grid: GridSpec) -> AbsorptionField:
    """Read sigma from a CSV matrix or a plain row-major float64 binary file."""
    path = str(path)
    if path.endswith(".csv"):
        sigma = np.loadtxt(path, delimiter=",")
    else:
        sigma = np.fromfile(path, dtype=np.float64).reshape(grid.n_x, grid.n_x)
    return absorption_from_raw(grid, sigma)


# ---------------------------------------------------------------------------
# Spectral transforms (exact discrete Fourier pair in all three directions)
# ---------------------------------------------------------------------------


def transform_forward(f: DensityField) -> np.ndarray:
    """Forward DFT normalized so the zero mode equals the mean of f."""
    return np.fft.fftn(f.values) / f.values.size


def transform_inverse(coeffs: np.ndarray, grid: GridSpec) -> DensityField:
    """Inverse of :func:`transform_forward`; imaginary residue is discarded."""
    n, m = grid.n_x, grid.n_theta
    if coeffs.shape != (n, n, m):
        raise ConfigError(f"coefficient shape {coeffs.shape} does not match grid")
    vals = np.fft.ifftn(coeffs * coeffs.size)
    return DensityField(grid, np.real(vals))


# ---------------------------------------------------------------------------
# Raw binary field format: int64 header (n_x, n_x, n_theta), row-major doubles
# ---------------------------------------------------------------------------


def write_field_raw(path, f: DensityField):
    with open(path, "wb") as fh:
        np.asarray(f.values.shape, dtype=np.int64).tofile(fh)
        f.values.tofile(fh)


def read_field_raw(path) -> DensityField:
    with open(path, "rb") as fh:
        shape = np.fromfile(fh, dtype=np.int64, count=3)
        n, _, m = (int(s) for s in shape)
        vals = np.fromfile(fh, dtype=np.float64).reshape(n, n, m)
    return DensityField(GridSpec(n, m), vals)
