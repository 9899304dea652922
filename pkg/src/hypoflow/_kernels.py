"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The expensive inner loops of the artifact are (a) quadrature of sigma or chi
along straight rays with periodic bilinear interpolation (GCC certification,
psi tabulation) and (b) the polar quadrature of the divergence-inverse kernel
over star-shaped meshes.  Both are compiled with numba when available.

Set the environment variable ``HYPOFLOW_NO_NUMBA=1`` to force the numpy
fallback path (used by the benchmark in ``benchmarks/bench_kernels.py`` and
by CI smoke tests).  Both paths produce the same values to roundoff and are
deterministic: every output element is written by exactly one loop iteration,
so thread scheduling cannot reorder reductions.
"""

from __future__ import annotations

import os
import numpy as np

_DISABLED = os.environ.get("HYPOFLOW_NO_NUMBA", "0").lower() in ("1", "true", "yes")

try:  # pragma: no cover - import guard
    if _DISABLED:
        raise ImportError("numba disabled by HYPOFLOW_NO_NUMBA")
    from numba import njit, prange
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore
        def wrap(fn):
            return fn
        if args and callable(args[0]):
            return args[0]
        return wrap

    prange = range  # type: ignore


# ---------------------------------------------------------------------------
# Ray quadrature of a periodic grid function (trapezoid along the ray).
#
# The integral is accumulated as t_star * (weighted mean), which makes a
# constant integrand integrate exactly to t_star * value in floating point.
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _bilin_periodic(a, n, x, y):
    fx = (x % 1.0) * n
    fy = (y % 1.0) * n
    ix = int(fx)
    iy = int(fy)
    tx = fx - ix
    ty = fy - iy
    ix0 = ix % n
    iy0 = iy % n
    ix1 = (ix0 + 1) % n
    iy1 = (iy0 + 1) % n
    return ((1.0 - tx) * (1.0 - ty) * a[ix0, iy0]
            + tx * (1.0 - ty) * a[ix1, iy0]
            + (1.0 - tx) * ty * a[ix0, iy1]
            + tx * ty * a[ix1, iy1])


@njit(cache=True, parallel=True)
def _ray_integrals_numba(sig, x0, y0, theta, t_star, n_quad):
    n = sig.shape[0]
    m = x0.shape[0]
    out = np.empty(m)
    for i in prange(m):
        cx = np.cos(theta[i])
        cy = np.sin(theta[i])
        xi = x0[i]
        yi = y0[i]
        dt = t_star / (n_quad - 1)
        acc = 0.5 * _bilin_periodic(sig, n, xi, yi)
        for k in range(1, n_quad - 1):
            t = k * dt
            acc += _bilin_periodic(sig, n, xi + t * cx, yi + t * cy)
        acc += 0.5 * _bilin_periodic(sig, n, xi + t_star * cx, yi + t_star * cy)
        out[i] = t_star * (acc / (n_quad - 1))
    return out


def _bilin_periodic_np(a, x, y):
    n = a.shape[0]
    fx = (x % 1.0) * n
    fy = (y % 1.0) * n
    ix = fx.astype(np.int64)
    iy = fy.astype(np.int64)
    tx = fx - ix
    ty = fy - iy
    ix0 = ix % n
    iy0 = iy % n
    ix1 = (ix0 + 1) % n
    iy1 = (iy0 + 1) % n
    return ((1 - tx) * (1 - ty) * a[ix0, iy0] + tx * (1 - ty) * a[ix1, iy0]
            + (1 - tx) * ty * a[ix0, iy1] + tx * ty * a[ix1, iy1])


def _ray_integrals_numpy(sig, x0, y0, theta, t_star, n_quad, chunk=4096):
    m = x0.shape[0]
    out = np.empty(m)
    ts = np.linspace(0.0, t_star, n_quad)
    w = np.ones(n_quad)
    w[0] = w[-1] = 0.5
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        cx = np.cos(theta[lo:hi])[:, None]
        cy = np.sin(theta[lo:hi])[:, None]
        px = x0[lo:hi, None] + ts[None, :] * cx
        py = y0[lo:hi, None] + ts[None, :] * cy
        vals = _bilin_periodic_np(sig, px, py)
        out[lo:hi] = t_star * (vals @ w) / (n_quad - 1)
    return out


def ray_integrals(sig, x0, y0, theta, t_star, n_quad):
    """Trapezoid integral of the gridded coefficient along each ray.

    ``x0, y0, theta`` are flat arrays of equal length; returns one integral
    per ray over the window [0, t_star] with ``n_quad`` nodes.
    """
    sig = np.ascontiguousarray(sig, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    y0 = np.ascontiguousarray(y0, dtype=np.float64)
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    if HAVE_NUMBA:
        return _ray_integrals_numba(sig, x0, y0, theta, float(t_star), int(n_quad))
    return _ray_integrals_numpy(sig, x0, y0, theta, float(t_star), int(n_quad))


# ---------------------------------------------------------------------------
# Divergence-inverse kernel on a star-shaped planar mesh (polar form).
#
# F(x) = int_theta e(theta) int_rho h(x - rho e) (A rho + B) drho dtheta with
# A(x,e) = int_0^inf w(x+ue) du and B(x,e) = int_0^inf u w(x+ue) du, where w
# is the polynomial bump (1-|p-b|^2/r^2)^4 (unit mass) on the star ball.  The
# ball line integrals are Gauss-Legendre and exact for the polynomial.
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _bilin_box(h, mask, n, x, y):
    # cell-centered grid on [0,1]^2; zero outside the box or the mask
    fx = x * n - 0.5
    fy = y * n - 0.5
    ix = int(np.floor(fx))
    iy = int(np.floor(fy))
    tx = fx - ix
    ty = fy - iy
    acc = 0.0
    for dx in range(2):
        for dy in range(2):
            i = ix + dx
            j = iy + dy
            if 0 <= i < n and 0 <= j < n and mask[i, j]:
                wgt = (tx if dx == 1 else 1.0 - tx) * (ty if dy == 1 else 1.0 - ty)
                acc += wgt * h[i, j]
    return acc


@njit(cache=True, parallel=True)
def _bogovskii_field_numba(h, mask, bx, by, br, n_ang, drho, rho_max, glx, glw):
    n = h.shape[0]
    F = np.zeros((n, n, 2))
    omega_c = 5.0 / (np.pi * br * br)
    n_rad = int(rho_max / drho)
    for idx in prange(n * n):
        i = idx // n
        j = idx % n
        if not mask[i, j]:
            continue
        x0 = (i + 0.5) / n
        y0 = (j + 0.5) / n
        fx = 0.0
        fy = 0.0
        for a in range(n_ang):
            th = 2.0 * np.pi * (a + 0.5) / n_ang
            ex = np.cos(th)
            ey = np.sin(th)
            # ball moments along the forward ray x0 + u e
            cx = x0 - bx
            cy = y0 - by
            bq = cx * ex + cy * ey
            cq = cx * cx + cy * cy - br * br
            disc = bq * bq - cq
            A = 0.0
            B = 0.0
            if disc > 0.0:
                root = np.sqrt(disc)
                u2 = -bq + root
                if u2 > 0.0:
                    u1 = -bq - root
                    lo = u1 if u1 > 0.0 else 0.0
                    half = 0.5 * (u2 - lo)
                    mid = 0.5 * (u2 + lo)
                    for q in range(glx.shape[0]):
                        u = mid + half * glx[q]
                        px = x0 + u * ex - bx
                        py = y0 + u * ey - by
                        s = 1.0 - (px * px + py * py) / (br * br)
                        if s > 0.0:
                            w = omega_c * s ** 4
                            A += glw[q] * half * w
                            B += glw[q] * half * w * u
            if A == 0.0 and B == 0.0:
                continue
            acc = 0.0
            for rr in range(n_rad):
                rho = (rr + 0.5) * drho
                hv = _bilin_box(h, mask, n, x0 - rho * ex, y0 - rho * ey)
                acc += hv * (A * rho + B)
            acc *= drho
            fx += ex * acc
            fy += ey * acc
        F[i, j, 0] = fx * (2.0 * np.pi / n_ang)
        F[i, j, 1] = fy * (2.0 * np.pi / n_ang)
    return F


def _bilin_box_np(h, mask, x, y):
    n = h.shape[0]
    hm = np.where(mask, h, 0.0)
    fx = x * n - 0.5
    fy = y * n - 0.5
    ix = np.floor(fx).astype(np.int64)
    iy = np.floor(fy).astype(np.int64)
    tx = fx - ix
    ty = fy - iy
    out = np.zeros_like(x)
    for dx in (0, 1):
        for dy in (0, 1):
            i = ix + dx
            j = iy + dy
            ok = (i >= 0) & (i < n) & (j >= 0) & (j < n)
            ic = np.clip(i, 0, n - 1)
            jc = np.clip(j, 0, n - 1)
            wgt = (tx if dx else 1 - tx) * (ty if dy else 1 - ty)
            out += np.where(ok, wgt * hm[ic, jc], 0.0)
    return out


def _bogovskii_field_numpy(h, mask, bx, by, br, n_ang, drho, rho_max, glx, glw):
    n = h.shape[0]
    F = np.zeros((n, n, 2))
    omega_c = 5.0 / (np.pi * br * br)
    ths = 2.0 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
    ex = np.cos(ths)
    ey = np.sin(ths)
    n_rad = int(rho_max / drho)
    rhos = (np.arange(n_rad) + 0.5) * drho
    targets = np.argwhere(mask)
    for i, j in targets:
        x0 = (i + 0.5) / n
        y0 = (j + 0.5) / n
        cx = x0 - bx
        cy = y0 - by
        bq = cx * ex + cy * ey
        disc = bq * bq - (cx * cx + cy * cy - br * br)
        A = np.zeros(n_ang)
        B = np.zeros(n_ang)
        hit = disc > 0.0
        root = np.sqrt(np.where(hit, disc, 0.0))
        u2 = -bq + root
        u1 = np.maximum(-bq - root, 0.0)
        use = hit & (u2 > 0.0)
        half = np.where(use, 0.5 * (u2 - u1), 0.0)
        mid = 0.5 * (u2 + u1)
        for q in range(len(glx)):
            u = mid + half * glx[q]
            px = x0 + u * ex - bx
            py = y0 + u * ey - by
            s = 1.0 - (px * px + py * py) / (br * br)
            w = np.where(use & (s > 0.0), omega_c * s ** 4, 0.0)
            A += glw[q] * half * w
            B += glw[q] * half * w * u
        px = x0 - rhos[None, :] * ex[:, None]
        py = y0 - rhos[None, :] * ey[:, None]
        hv = _bilin_box_np(h, mask, px, py)
        radial = drho * (hv * (A[:, None] * rhos[None, :] + B[:, None])).sum(axis=1)
        F[i, j, 0] = (ex * radial).sum() * (2.0 * np.pi / n_ang)
        F[i, j, 1] = (ey * radial).sum() * (2.0 * np.pi / n_ang)
    return F


def bogovskii_field(h, mask, ball_center, ball_radius, n_ang, drho, rho_max, gl_order=10):
    """Vector field F with div F = h (h zero-mean on the mask), F = 0 outside."""
    h = np.ascontiguousarray(h, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=bool)
    glx, glw = np.polynomial.legendre.leggauss(gl_order)
    args = (h, mask, float(ball_center[0]), float(ball_center[1]),
            float(ball_radius), int(n_ang), float(drho), float(rho_max), glx, glw)
    if HAVE_NUMBA:
        return _bogovskii_field_numba(*args)
    return _bogovskii_field_numpy(*args)
