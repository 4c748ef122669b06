"""Hot loops: the Φ_b contour quadrature and the log-scaled exponential sums.

Each kernel has a numba version and a numpy version with identical signatures.
The public selectors at the bottom pick one according to ``_accel.use_numba``.
Compiled kernels are serial and release the GIL; callers parallelize with
threads over independent rows.
"""
from __future__ import annotations

import cmath
import math

import numpy as np

from ._accel import njit, use_numba

QUARTER_PI = 0.25 * math.pi
TWO_PI = 2.0 * math.pi


# --------------------------------------------------------------------------
# Φ_b inside the reduced strip |Im z| <= (b + 1/b)/4
#
# log Φ_b(z) = ∫_C e^{-2izw} / (4 sinh(bw) sinh(w/b) w) dw.  The two real rays
# of C are rotated towards the steepest-descent direction of e^{-(Q ± 2iz)w}
# (clipped to ±π/4 so the poles on the imaginary axis stay far away) and the
# detour around w = 0 is a small arc.  For Re z >= 0 the arc passes below 0
# and the residue at the triple pole is added back, which keeps |e^{-2izw}|
# bounded on the arc for large |Re z|.
# --------------------------------------------------------------------------


@njit(cache=True)
def _expm1c(x):
    if abs(x) < 0.2:
        s = 0j
        term = 1.0 + 0j
        for k in range(1, 14):
            term = term * x / k
            s += term
        return s
    return cmath.exp(x) - 1.0


@njit(cache=True)
def _ray_nb(p, phi, b, r, gx, gw, n_uni, big_l):
    e = cmath.exp(1j * phi)
    kappa = (p * e).real
    width = 4.0 / kappa
    acc = 0j
    t0 = r
    # geometric panels until the panel width reaches 4 decay lengths
    while t0 < width:
        t1 = 2.0 * t0
        mid = 0.5 * (t0 + t1)
        half = 0.5 * (t1 - t0)
        for q in range(gx.shape[0]):
            w = (mid + half * gx[q]) * e
            den = w * _expm1c(-2.0 * b * w) * _expm1c(-2.0 * w / b)
            acc += half * gw[q] * cmath.exp(-p * w) / den
        t0 = t1
    stop = r + big_l / kappa
    n = n_uni
    k = 0
    while k < n and t0 < stop:
        t1 = t0 + width
        mid = 0.5 * (t0 + t1)
        half = 0.5 * width
        for q in range(gx.shape[0]):
            w = (mid + half * gx[q]) * e
            den = w * _expm1c(-2.0 * b * w) * _expm1c(-2.0 * w / b)
            acc += half * gw[q] * cmath.exp(-p * w) / den
        t0 = t1
        k += 1
    # the sign flips from (1 - e^{-x}) = -expm1(-x) cancel pairwise
    return acc * e


@njit(cache=True)
def _log_phi_one_nb(z, b, gx, gw, ax, aw, n_uni, big_l):
    q_sum = b + 1.0 / b
    r = min(1.0, 1.0 / (4.0 * q_sum))
    p_r = q_sum + 2j * z
    p_l = q_sum - 2j * z
    ph_r = min(QUARTER_PI, max(-QUARTER_PI, -cmath.phase(p_r)))
    ph_l = min(QUARTER_PI, max(-QUARTER_PI, -cmath.phase(p_l)))
    total = _ray_nb(p_r, ph_r, b, r, gx, gw, n_uni, big_l)
    total -= _ray_nb(p_l, ph_l, b, r, gx, gw, n_uni, big_l)
    lower = z.real >= 0.0
    th_a = math.pi + ph_l
    th_b = ph_r + (TWO_PI if lower else 0.0)
    mid = 0.5 * (th_a + th_b)
    half = 0.5 * (th_b - th_a)
    for q in range(ax.shape[0]):
        w = r * cmath.exp(1j * (mid + half * ax[q]))
        val = 1j * cmath.exp(-2j * z * w) / (4.0 * cmath.sinh(b * w) * cmath.sinh(w / b))
        total += half * aw[q] * val
    if lower:
        total += 1j * math.pi * z * z + 1j * math.pi * (b * b + 1.0 / (b * b)) / 12.0
    return total


@njit(cache=True, nogil=True)
def log_phi_strip_numba(z, b, gx, gw, ax, aw, n_uni, big_l):
    out = np.empty(z.shape[0], dtype=np.complex128)
    for m in range(z.shape[0]):
        out[m] = _log_phi_one_nb(z[m], b, gx, gw, ax, aw, n_uni, big_l)
    return out


def _ray_numpy(p, phi, b, r, gx, gw, n_uni, big_l):
    e = np.exp(1j * phi)
    kappa = (p * e).real
    width = 4.0 / kappa
    # number of doublings needed per point; pad to the batch maximum
    kz = np.maximum(0, np.ceil(np.log2(np.maximum(width / r, 1.0)))).astype(int)
    n_geo = int(kz.max()) if kz.size else 0
    kk = np.arange(n_geo + 1)
    geo = r * 2.0 ** np.minimum(kk[None, :], kz[:, None])
    t_s = geo[:, -1]
    # uniform panels, cut off at r + L/kappa like the compiled loop
    stop = r + big_l / kappa
    n_need = np.clip(np.ceil((stop - t_s) / width), 0, n_uni)
    jj = np.arange(1, n_uni + 1)
    uni = t_s[:, None] + width[:, None] * np.minimum(jj[None, :], n_need[:, None])
    edges = np.concatenate([geo, uni], axis=1)
    lo, hi = edges[:, :-1], edges[:, 1:]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    t = mid[:, :, None] + half[:, :, None] * gx[None, None, :]
    w = t * e[:, None, None]
    den = w * np.expm1(-2.0 * b * w) * np.expm1(-2.0 * w / b)
    val = np.exp(-p[:, None, None] * w) / den
    acc = np.sum(half[:, :, None] * gw[None, None, :] * val, axis=(1, 2))
    return acc * e


def log_phi_strip_numpy(z, b, gx, gw, ax, aw, n_uni, big_l):
    z = np.asarray(z, dtype=np.complex128)
    q_sum = b + 1.0 / b
    r = min(1.0, 1.0 / (4.0 * q_sum))
    p_r = q_sum + 2j * z
    p_l = q_sum - 2j * z
    ph_r = np.clip(-np.angle(p_r), -QUARTER_PI, QUARTER_PI)
    ph_l = np.clip(-np.angle(p_l), -QUARTER_PI, QUARTER_PI)
    total = _ray_numpy(p_r, ph_r, b, r, gx, gw, n_uni, big_l)
    total = total - _ray_numpy(p_l, ph_l, b, r, gx, gw, n_uni, big_l)
    lower = z.real >= 0.0
    th_a = np.pi + ph_l
    th_b = ph_r + np.where(lower, TWO_PI, 0.0)
    mid = 0.5 * (th_a + th_b)
    half = 0.5 * (th_b - th_a)
    w = r * np.exp(1j * (mid[:, None] + half[:, None] * ax[None, :]))
    val = 1j * np.exp(-2j * z[:, None] * w) / (4.0 * np.sinh(b * w) * np.sinh(w / b))
    total = total + np.sum(half[:, None] * aw[None, :] * val, axis=1)
    resid = 1j * np.pi * z * z + 1j * np.pi * (b * b + 1.0 / (b * b)) / 12.0
    return np.where(lower, total + resid, total)


# --------------------------------------------------------------------------
# log-scaled exponential sums
#
#   row j:  sum_i exp(lg[i] + sgn * 2πi * f[j] * x[i])
#
# returned as (m_j, s_j) with the row sum equal to exp(m_j) * s_j, so that
# individual factors may be far outside the double range.
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def expsum_numba(lg, x, f, sgn):
    n = f.shape[0]
    m_out = np.empty(n)
    s_out = np.empty(n, dtype=np.complex128)
    c = sgn * 2j * math.pi
    for j in range(n):
        fj = f[j]
        mx = -np.inf
        for i in range(x.shape[0]):
            v = (lg[i] + c * fj * x[i]).real
            if v > mx:
                mx = v
        acc = 0j
        for i in range(x.shape[0]):
            acc += cmath.exp(lg[i] + c * fj * x[i] - mx)
        m_out[j] = mx
        s_out[j] = acc
    return m_out, s_out


def expsum_numpy(lg, x, f, sgn, chunk=512):
    n = f.shape[0]
    m_out = np.empty(n)
    s_out = np.empty(n, dtype=np.complex128)
    c = sgn * 2j * np.pi
    for j0 in range(0, n, chunk):
        e = lg[None, :] + c * f[j0:j0 + chunk, None] * x[None, :]
        mx = e.real.max(axis=1)
        m_out[j0:j0 + chunk] = mx
        s_out[j0:j0 + chunk] = np.exp(e - mx[:, None]).sum(axis=1)
    return m_out, s_out


# --------------------------------------------------------------------------
# Toeplitz-coupled double sum on uniform grids
#
#   row i:  sum_k exp(gx[i] + gy[k] + pd[i - k + ny - 1])
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def toeplitz_rows_numba(gx, gy, pd):
    nx = gx.shape[0]
    ny = gy.shape[0]
    m_out = np.empty(nx)
    s_out = np.empty(nx, dtype=np.complex128)
    for i in range(nx):
        mx = -np.inf
        for k in range(ny):
            v = (gx[i] + gy[k] + pd[i - k + ny - 1]).real
            if v > mx:
                mx = v
        acc = 0j
        for k in range(ny):
            acc += cmath.exp(gx[i] + gy[k] + pd[i - k + ny - 1] - mx)
        m_out[i] = mx
        s_out[i] = acc
    return m_out, s_out


def toeplitz_rows_numpy(gx, gy, pd, chunk=256):
    nx = gx.shape[0]
    ny = gy.shape[0]
    m_out = np.empty(nx)
    s_out = np.empty(nx, dtype=np.complex128)
    kk = np.arange(ny)
    for i0 in range(0, nx, chunk):
        ii = np.arange(i0, min(nx, i0 + chunk))
        e = gx[ii, None] + gy[None, :] + pd[ii[:, None] - kk[None, :] + ny - 1]
        mx = e.real.max(axis=1)
        m_out[ii] = mx
        s_out[ii] = np.exp(e - mx[:, None]).sum(axis=1)
    return m_out, s_out


def log_phi_strip(z, b, gx, gw, ax, aw, n_uni, big_l, backend=None):
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    z = np.ascontiguousarray(z, dtype=np.complex128)
    if backend == "numba":
        return log_phi_strip_numba(z, float(b), gx, gw, ax, aw, int(n_uni), float(big_l))
    return log_phi_strip_numpy(z, float(b), gx, gw, ax, aw, int(n_uni), float(big_l))


def expsum(lg, x, f, sgn, backend=None):
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    args = (
        np.ascontiguousarray(lg, dtype=np.complex128),
        np.ascontiguousarray(x, dtype=np.complex128),
        np.ascontiguousarray(f, dtype=np.complex128),
        float(sgn),
    )
    if backend == "numba":
        return expsum_numba(*args)
    return expsum_numpy(*args)


def toeplitz_rows(gx, gy, pd, backend=None):
    if backend is None:
        backend = "numba" if use_numba() else "numpy"
    args = tuple(np.ascontiguousarray(a, dtype=np.complex128) for a in (gx, gy, pd))
    if backend == "numba":
        return toeplitz_rows_numba(*args)
    return toeplitz_rows_numpy(*args)
