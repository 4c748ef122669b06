"""Contour quadrature of the 7₃ state integrals, the ħ-sweep and the saddle estimate.

All integrands are assembled in the log domain.  The 3-dimensional integrands
are separable except for one bilinear coupling ``2πi·C·(s₁X₁ + s₂X₂)``, so the
triple sum collapses into two exponential sums per node of the coupling axis.
The 2-dimensional integrand couples through Φ_b(x − y − c_b), which on equal-step
uniform grids is a Toeplitz matrix.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from ._accel import chunked_map, thread_count
from .complex_geometry import Q_MATRIX, W_VEC, SaddleReport
from .specfun import CouplingConstant, PrecisionConfig, log_faddeev
from .triangulation import ShapeStructure

TWO_PI = 2.0 * math.pi
DECAY_LOG = 12.0 * math.log(10.0)  # certificate: |F(edge)|/max|F| < 1e-12
_START_PANEL = 0.5  # widest Gauss panel at the first refinement level

# Unit factor on 1/√det Hess.  The Gaussian integral needs √det(−Hess), which is
# ±i·√det Hess in three dimensions; the sign was fixed once by matching the
# phase of the estimate against direct quadrature at b = 0.5.
SADDLE_SQRT_BRANCH = 1j


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ContourSpec:
    """Horizontal contour: axis k is ℝ + i·offsets[k].

    ``half_width`` fixes a symmetric box [-R, R] per axis; ``None`` selects the
    box from the decay scan.  ``points_per_axis`` is the starting node count.
    """

    offsets: tuple[float, ...]
    half_width: float | None = None
    points_per_axis: int = 64

    def __post_init__(self):
        if len(self.offsets) not in (2, 3):
            raise ValueError("contours are 2- or 3-dimensional")
        if self.half_width is not None and not self.half_width > 0:
            raise ValueError("half_width must be positive")
        if self.points_per_axis < 16:
            raise ValueError("points_per_axis must be at least 16")


def contour_from_angles(cc: CouplingConstant, alpha: ShapeStructure, dims: int = 3,
                        **kw) -> ContourSpec:
    a1, a2, a3 = alpha[0].a, alpha[1].a, alpha[2].a
    s = 0.5 * cc.q  # 1/(2√ħ)
    if dims == 3:
        off = (-(1 - 2 * a1) * s, (1 - 2 * a2) * s, -(1 - 2 * a3) * s)
    elif dims == 2:
        if not 0 < a1 - a3 < 0.5:
            raise ValueError("2d contour needs 0 < a1 - a3 < 1/2")
        off = (-(1 - 2 * a1) * s, -(1 - 2 * a3) * s)
    else:
        raise ValueError("dims must be 2 or 3")
    return ContourSpec(off, **kw)


@dataclass
class IntegralResult:
    value: complex
    log_abs: float
    err_abs: float  # |I_n - I_{n/2}| at the last refinement
    levels: list[int] = field(default_factory=list)
    box: list[tuple[float, float]] = field(default_factory=list)
    decay_ratio: float = 0.0

    @property
    def rel_err(self) -> float:
        return self.err_abs / abs(self.value) if self.value != 0 else math.inf


def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _panel_nodes(lo: float, hi: float, n_panels: int, q: int = 16):
    x, w = _gauss(q)
    edges = np.linspace(lo, hi, n_panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
    weights = (half[:, None] * w[None, :]).reshape(-1)
    return nodes, weights


def _log_reduce(ell: np.ndarray, s: np.ndarray, ordered: bool = True) -> tuple[complex, float]:
    """Σ exp(ell_j)·s_j as (value, log|value|) with an exact-rounded final sum."""
    keep = np.isfinite(ell)
    ell, s = ell[keep], s[keep]
    if ell.size == 0:
        return 0j, -math.inf
    top = float(np.max(ell))
    t = np.exp(ell - top) * s
    if ordered:
        tot = complex(math.fsum(t.real), math.fsum(t.imag))
    else:
        tot = complex(np.sum(t))
    if tot == 0:
        return 0j, -math.inf
    log_abs = top + math.log(abs(tot))
    val = cmath.exp(top) * tot if top < 700 else complex("nan")
    return val, log_abs


# ------------------------------------------------------ separable 3d engine

@dataclass
class _Separable3D:
    """I = ∫ e^{g1(X1) + gc(C) + g2(X2) + 2πi C (s1 X1 + s2 X2)} over three lines."""

    cc: CouplingConstant
    offsets: tuple[float, float, float]  # (X1, C, X2)
    signs: tuple[float, float]
    axis_logs: object  # callable(axis, complex array) -> complex array
    prec: PrecisionConfig

    def points(self, axis: int, u: np.ndarray) -> np.ndarray:
        return u + 1j * self.offsets[axis]

    def logs(self, axis: int, u: np.ndarray) -> np.ndarray:
        return self.axis_logs(axis, self.points(axis, u))

    def log_abs_grid(self, u: Sequence[np.ndarray]) -> np.ndarray:
        x1, c, x2 = (self.points(k, u[k]) for k in range(3))
        g1, gc, g2 = (self.logs(k, u[k]).real for k in range(3))
        s1, s2 = self.signs
        cpl = (2j * np.pi * c[None, :, None] * (s1 * x1[:, None, None] + s2 * x2[None, None, :])).real
        return g1[:, None, None] + gc[None, :, None] + g2[None, None, :] + cpl

    def quad(self, nodes, weights, workers: int, backend=None, ordered=True):
        x1, c, x2 = (self.points(k, nodes[k]) for k in range(3))
        g1 = self.logs(0, nodes[0]) + np.log(weights[0])
        gc = self.logs(1, nodes[1]) + np.log(weights[1])
        g2 = self.logs(2, nodes[2]) + np.log(weights[2])
        s1, s2 = self.signs

        def rows(lo, hi):
            m1, t1 = _kernels.expsum(g1, x1, c[lo:hi], s1, backend=backend)
            m2, t2 = _kernels.expsum(g2, x2, c[lo:hi], s2, backend=backend)
            return gc[lo:hi].real + m1 + m2, np.exp(1j * gc[lo:hi].imag) * t1 * t2

        parts = chunked_map(rows, c.shape[0], workers, min_chunk=64)
        ell = np.concatenate([p[0] for p in parts])
        s = np.concatenate([p[1] for p in parts])
        return _log_reduce(ell, s, ordered)


def _find_box_3d(eng: _Separable3D, half_width: float | None):
    if half_width is not None:
        u = [np.linspace(-half_width, half_width, 61) for _ in range(3)]
        la = eng.log_abs_grid(u)
        return [(-half_width, half_width)] * 3, _face_ratio(la)
    r = 4.0
    for _ in range(12):
        u = [np.linspace(-r, r, 97) for _ in range(3)]
        la = eng.log_abs_grid(u)
        if _face_ratio(la) < math.exp(-DECAY_LOG - 6.0):
            break
        r *= 1.5
    else:
        raise IntegrationError("integrand does not decay on this contour")
    top = float(np.max(la))
    box = []
    for k in range(3):
        prof = np.max(np.moveaxis(la, k, 0).reshape(la.shape[k], -1), axis=1)
        idx = np.nonzero(prof > top - DECAY_LOG - 4.0)[0]
        step = u[k][1] - u[k][0]
        box.append((float(u[k][idx[0]] - step), float(u[k][idx[-1]] + step)))
    ub = [np.linspace(lo, hi, 61) for lo, hi in box]
    return box, _face_ratio(eng.log_abs_grid(ub), top)


def _face_ratio(la: np.ndarray, top: float | None = None) -> float:
    if top is None:
        top = float(np.max(la))
    faces = []
    for k in range(la.ndim):
        sl = np.moveaxis(la, k, 0)
        faces += [np.max(sl[0]), np.max(sl[-1])]
    return math.exp(max(faces) - top)


def _refine_3d(eng: _Separable3D, contour: ContourSpec, tol: float, workers, backend,
               max_levels: int = 7) -> IntegralResult:
    box, ratio = _find_box_3d(eng, contour.half_width)
    if ratio > 1e-12:
        raise IntegrationError(f"truncation certificate failed: edge/max = {ratio:.2e}")
    q = 16
    lengths = [hi - lo for lo, hi in box]
    longest = max(lengths)
    n_pan = max(contour.points_per_axis // q, int(math.ceil(longest / _START_PANEL)))
    prev = None
    levels = []
    for _ in range(max_levels):
        nodes, weights = [], []
        for (lo, hi), ln in zip(box, lengths):
            npk = max(1, int(math.ceil(n_pan * ln / longest)))
            x, w = _panel_nodes(lo, hi, npk, q)
            nodes.append(x)
            weights.append(w)
        val, la = eng.quad(nodes, weights, workers, backend)
        levels.append(int(max(len(x) for x in nodes)))
        if prev is not None:
            err = abs(val - prev)
            if err <= tol * abs(val):
                return IntegralResult(val, la, err, levels, box, ratio)
        prev = val
        n_pan *= 2
    raise IntegrationError(f"quadrature did not converge (last change {err / abs(val):.2e})")


def _jx_axis_logs(cc: CouplingConstant, prec: PrecisionConfig):
    inv_sqrt = cc.q  # 1/√ħ

    def logs(axis, z):
        lf = log_faddeev(z, cc, prec)
        if axis == 0:  # Y
            return 2j * np.pi * z * z - np.pi * inv_sqrt * z - lf
        if axis == 1:  # Z
            return lf
        return 1j * np.pi * z * z + np.pi * inv_sqrt * z - 3.0 * lf  # W

    return logs


def integrate_JX_3d(cc: CouplingConstant, contour: ContourSpec, tol: float = 1e-8,
                    prec: PrecisionConfig = PrecisionConfig(), workers: int | None = None,
                    backend=None) -> IntegralResult:
    """J_X(ħ, 0) as a 3-dimensional contour integral in the variables (Y′, Z′, W′)."""
    if len(contour.offsets) != 3:
        raise ValueError("3d integral needs a 3-axis contour")
    oy, oz, ow = contour.offsets
    eng = _Separable3D(cc, (oy, oz, ow), (-1.0, 1.0), _jx_axis_logs(cc, prec), prec)
    return _refine_3d(eng, contour, tol, thread_count(workers), backend)


def integrate_H_limit(cc: CouplingConstant, tau: ShapeStructure, tol: float = 1e-8,
                      prec: PrecisionConfig = PrecisionConfig(), workers: int | None = None,
                      backend=None, half_width: float | None = None) -> IntegralResult:
    """The (A, B, D) integral of the H-triangulation limit, without its unit-modulus prefactors."""
    if len(tau) != 6:
        raise ValueError("tau must be a 6-tetrahedron structure")
    s = 0.5 * cc.q
    oa = -(1 - 2 * tau[1].a) * s
    ob = -(1 - 2 * tau[3].a) * s
    od = -(1 - 2 * tau[2].a) * s
    inv_sqrt = cc.q

    def logs(axis, z):
        lf = log_faddeev(z, cc, prec)
        if axis == 0:  # A
            return 2j * np.pi * z * z - np.pi * inv_sqrt * z - lf
        if axis == 1:  # D
            return 1j * np.pi * z * z - lf
        return 1j * np.pi * z * z + np.pi * inv_sqrt * z - 3.0 * lf  # B

    eng = _Separable3D(cc, (oa, od, ob), (1.0, -1.0), logs, prec)
    contour = ContourSpec((oa, od, ob), half_width)
    return _refine_3d(eng, contour, tol, thread_count(workers), backend)


# --------------------------------------------------------------- 2d integral

def _twod_logs(cc: CouplingConstant, contour: ContourSpec, prec: PrecisionConfig):
    ox, oy = contour.offsets
    c_b = cc.c_b

    def gx(u):
        x = u + 1j * ox
        return 2j * np.pi * x * x - log_faddeev(x, cc, prec)

    def gy(u):
        y = u + 1j * oy
        return 1j * np.pi * y * y - 3.0 * log_faddeev(y, cc, prec)

    def pd(d):
        return -log_faddeev(d + 1j * (ox - oy) - c_b, cc, prec)

    return gx, gy, pd


def _toeplitz_sum(gxv, gyv, pdv, h, workers, backend, ordered=True):
    lw = 2.0 * math.log(h)
    ny = gyv.shape[0]

    def rows(lo, hi):
        # rows lo..hi need pd indices (i - k + ny - 1) for i in [lo, hi)
        return _kernels.toeplitz_rows(gxv[lo:hi] + lw, gyv, pdv[lo:lo + (hi - lo) + ny - 1],
                                      backend=backend)

    parts = chunked_map(rows, gxv.shape[0], workers, min_chunk=64)
    m = np.concatenate([p[0] for p in parts])
    s = np.concatenate([p[1] for p in parts])
    return _log_reduce(m, s, ordered)


def integrate_JX_2d(cc: CouplingConstant, contour: ContourSpec, tol: float = 1e-8,
                    prec: PrecisionConfig = PrecisionConfig(), workers: int | None = None,
                    backend=None, max_levels: int = 6) -> IntegralResult:
    """∫∫ e^{iπ(2x²+y²)} / (Φ_b(x) Φ_b(x−y−c_b) Φ_b(y)³) on a 2-axis contour (trapezoidal rule)."""
    if len(contour.offsets) != 2:
        raise ValueError("2d integral needs a 2-axis contour")
    workers = thread_count(workers)
    gx, gy, pd = _twod_logs(cc, contour, prec)

    def grids(lo_x, lo_y, nx, ny, h):
        ux = lo_x + h * np.arange(nx)
        uy = lo_y + h * np.arange(ny)
        d = (lo_x - lo_y) + h * np.arange(-(ny - 1), nx)
        return gx(ux), gy(uy), pd(d)

    # decay scan on a coarse uniform grid
    r = 4.0
    for _ in range(12):
        n = 161
        h = 2 * r / (n - 1)
        a, bb, p = grids(-r, -r, n, n, h)
        ii = np.arange(n)
        la = (a.real[:, None] + bb.real[None, :] + p.real[ii[:, None] - ii[None, :] + n - 1])
        if _face_ratio(la) < math.exp(-DECAY_LOG - 6.0):
            break
        r *= 1.5
    else:
        raise IntegrationError("integrand does not decay on this contour")
    top = float(np.max(la))
    u = -r + h * np.arange(n)
    box = []
    for k in range(2):
        prof = np.max(la if k == 0 else la.T, axis=1)
        idx = np.nonzero(prof > top - DECAY_LOG - 4.0)[0]
        box.append((float(u[idx[0]] - h), float(u[idx[-1]] + h)))
    if contour.half_width is not None:
        box = [(-contour.half_width, contour.half_width)] * 2
    ratio = _face_ratio(la[np.ix_(*[(u >= lo - 1e-12) & (u <= hi + 1e-12) for lo, hi in box])], top)
    if ratio > 1e-12:
        raise IntegrationError(f"truncation certificate failed: edge/max = {ratio:.2e}")
    longest = max(hi - lo for lo, hi in box)
    h = longest / contour.points_per_axis
    prev = None
    levels = []
    for _ in range(max_levels):
        nx = int(math.ceil((box[0][1] - box[0][0]) / h)) + 1
        ny = int(math.ceil((box[1][1] - box[1][0]) / h)) + 1
        a, bb, p = grids(box[0][0], box[1][0], nx, ny, h)
        val, la_v = _toeplitz_sum(a, bb, p, h, workers, backend)
        levels.append(max(nx, ny))
        if prev is not None:
            err = abs(val - prev)
            if err <= tol * abs(val):
                return IntegralResult(val, la_v, err, levels, box, ratio)
        prev = val
        h *= 0.5
    raise IntegrationError(f"quadrature did not converge (last change {err / abs(val):.2e})")


# ------------------------------------------------------------ saddle estimate

def saddle_estimate(cc: CouplingConstant, report: SaddleReport) -> complex:
    """ρ′ ħ^{3/2} e^{S(y⁰)/(2πħ)}: leading term of ∫ e^{S/(2πħ)} dy over 𝒴⁰."""
    if report.det_hessian == 0:
        raise IntegrationError("zero Hessian determinant")
    hb = cc.hbar
    rho_p = SADDLE_SQRT_BRANCH * report.rho * TWO_PI**1.5
    return rho_p * hb**1.5 * cmath.exp(report.S_value / (TWO_PI * hb))


def saddle_prefactor_log(cc: CouplingConstant, report: SaddleReport) -> float:
    """log|ρ′ ħ^{3/2}|, the part of log|saddle_estimate| beyond Re S(y⁰)/(2πħ)."""
    return math.log(abs(report.rho) * TWO_PI**1.5) + 1.5 * math.log(cc.hbar)


def saddle_estimate_J(cc: CouplingConstant, report: SaddleReport, amplitude: bool = True,
                      prec: PrecisionConfig = PrecisionConfig()) -> complex:
    """Saddle estimate of J_X(ħ, 0) in the primed variables.

    With ``amplitude`` the exact Φ_b factors at y⁰ replace their dilogarithm
    limits in the exponent (the leading amplitude of the saddle expansion).
    """
    hb = cc.hbar
    est = saddle_estimate(cc, report) / (TWO_PI * math.sqrt(hb)) ** 3
    if not amplitude:
        return est
    y = np.asarray(report.y0)
    yp = y / (TWO_PI * math.sqrt(hb))
    lf = log_faddeev(yp, cc, prec)
    exact = (1j * (y @ Q_MATRIX @ y) + y @ W_VEC) / (TWO_PI * hb) + lf[1] - lf[0] - 3.0 * lf[2]
    return est * cmath.exp(exact - report.S_value / (TWO_PI * hb))


# --------------------------------------------------------------------- sweep

@dataclass
class SweepRow:
    b: float
    hbar: float
    log_abs_J: float
    volume_estimate: float
    err_bound: float  # relative error estimate of |J|


@dataclass
class SweepTable:
    rows: list[SweepRow]
    method: str
    extrapolated_volume: float
    fit_coeffs: tuple[float, float, float]

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "rows": [vars(r) for r in self.rows],
            "extrapolated_volume": self.extrapolated_volume,
            "fit": {"v0": self.fit_coeffs[0], "c1": self.fit_coeffs[1], "c2": self.fit_coeffs[2]},
        }


def extrapolate(hbar: Sequence[float], vol: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares fit v = v0 + c1 ħ log ħ + c2 ħ; returns (v0, c1, c2)."""
    h = np.asarray(hbar, dtype=float)
    v = np.asarray(vol, dtype=float)
    if h.size < 3:
        raise ValueError("need at least three sweep rows to extrapolate")
    A = np.column_stack([np.ones_like(h), h * np.log(h), h])
    coef, *_ = np.linalg.lstsq(A, v, rcond=None)
    return float(coef[0]), float(coef[1]), float(coef[2])


def sweep_volume_limit(b_list: Sequence[float], method: str = "2d", alpha: ShapeStructure | None = None,
                       tol: float = 1e-8, prec: PrecisionConfig = PrecisionConfig(),
                       workers: int | None = None) -> SweepTable:
    if method not in ("2d", "3d"):
        raise ValueError("method must be '2d' or '3d'")
    b_list = [float(b) for b in b_list]
    hb = [CouplingConstant(b).hbar for b in b_list]
    if any(h2 >= h1 for h1, h2 in zip(hb, hb[1:])):
        raise ValueError("b_list must give strictly decreasing hbar")
    if alpha is None:
        from .angle_opt import maximize_volume
        from .triangulation import builtin_ideal_73

        alpha = maximize_volume(builtin_ideal_73())
    rows = []
    for b in b_list:
        cc = CouplingConstant(b)
        if method == "3d":
            res = integrate_JX_3d(cc, contour_from_angles(cc, alpha, 3), tol, prec, workers)
        else:
            res = integrate_JX_2d(cc, contour_from_angles(cc, alpha, 2), tol, prec, workers)
        rows.append(SweepRow(b, cc.hbar, res.log_abs, TWO_PI * cc.hbar * res.log_abs, res.rel_err))
    fit = extrapolate([r.hbar for r in rows], [r.volume_estimate for r in rows])
    return SweepTable(rows, method, fit[0], fit)


# ------------------------------------------------------- H-triangulation check

def tau_from_alpha(alpha: ShapeStructure, b1: float = 0.25) -> ShapeStructure:
    """Extended H-structure τ with τ₁ = (0, b1, 1/2 − b1) and τ_{k+1} = α_k."""
    if not 0 <= b1 <= 0.5:
        raise ValueError("b1 must lie in [0, 1/2]")
    from .triangulation import TetShape

    return ShapeStructure((TetShape(0.0, b1, 0.5 - b1),) + tuple(alpha.shapes))


def h_triangulation_cross_check(cc: CouplingConstant, alpha: ShapeStructure | None = None,
                                b1: float = 0.25, tol: float = 1e-8,
                                prec: PrecisionConfig = PrecisionConfig(),
                                workers: int | None = None) -> tuple[float, float]:
    """(|H-limit integral|, |J_X(ħ,0)|) for the τ built from ``alpha`` (default α⁰)."""
    from .triangulation import builtin_h_73, is_angle_structure

    if alpha is None:
        from .angle_opt import maximize_volume
        from .triangulation import builtin_ideal_73

        alpha = maximize_volume(builtin_ideal_73())
    tau = tau_from_alpha(alpha, b1)
    h = builtin_h_73()
    target = {e.id: (0.0 if e.id == h.knot_edge else TWO_PI) for e in h.edges}
    if not is_angle_structure(h, tau, target, extended=True, tol=1e-8):
        raise ValueError("alpha does not induce an admissible tau (need a3 = a4 = c5)")
    lim = integrate_H_limit(cc, tau, tol, prec, workers)
    jx = integrate_JX_3d(cc, contour_from_angles(cc, alpha, 3), tol, prec, workers)
    return math.exp(lim.log_abs), math.exp(jx.log_abs)


def h_compatible_alpha(alpha: ShapeStructure, direction: np.ndarray | None = None,
                       step: float = 0.01) -> ShapeStructure:
    """Move ``alpha`` inside the polytope while keeping a₃ = a₄ = c₅ (needed for τ)."""
    from .angle_opt import AnglePolytope, _renormalize
    from scipy.linalg import null_space
    from .triangulation import builtin_ideal_73

    poly = AnglePolytope.from_triangulation(builtin_ideal_73())
    extra = np.zeros((2, 15))
    extra[0, 6], extra[0, 9] = 1.0, -1.0  # a3 - a4
    extra[1, 9], extra[1, 14] = 1.0, -1.0  # a4 - c5
    basis = null_space(np.vstack([poly.A, extra]))
    if basis.shape[1] == 0:
        return alpha
    d = np.ones(basis.shape[1]) if direction is None else np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    v = alpha.vector() + step * basis @ d
    if np.any(v <= 0) or np.any(v >= 0.5):
        raise ValueError("step leaves the open polytope")
    return ShapeStructure.from_vector(_renormalize(v))
