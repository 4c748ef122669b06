"""Special functions: Li₂, Bloch-Wigner D, Lobachevsky Λ and Faddeev's Φ_b."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from ._accel import chunked_map, thread_count

PI2_6 = math.pi**2 / 6.0


class DomainError(ValueError):
    """Argument lies on a branch cut or outside the function's domain."""


class PoleError(ValueError):
    """Argument is (numerically) a pole or zero of Φ_b."""


@dataclass(frozen=True)
class CouplingConstant:
    b: float

    def __post_init__(self):
        if not (self.b > 0 and math.isfinite(self.b)):
            raise ValueError(f"b must be a positive real, got {self.b!r}")

    @property
    def q(self) -> float:
        """b + 1/b."""
        return self.b + 1.0 / self.b

    @property
    def hbar(self) -> float:
        return self.q**-2

    @property
    def c_b(self) -> complex:
        return 0.5j * self.q

    @classmethod
    def from_hbar(cls, hbar: float) -> "CouplingConstant":
        # smaller root of b + 1/b = hbar^(-1/2)
        s = hbar**-0.5
        if s < 2.0:
            raise ValueError("hbar must lie in (0, 1/4]")
        return cls(0.5 * (s - math.sqrt(s * s - 4.0)))


@dataclass(frozen=True)
class PrecisionConfig:
    abs_tol: float = 1e-12
    contour_truncation: float = 40.0  # decay lengths kept on each rotated ray
    quad_points: int = 16  # Gauss-Legendre nodes per ray panel

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.contour_truncation > 0:
            raise ValueError("contour_truncation must be positive")
        if self.quad_points < 4:
            raise ValueError("quad_points must be at least 4")

    @property
    def decay_lengths(self) -> float:
        return max(self.contour_truncation, math.log(10.0 / self.abs_tol) + 5.0)


DEFAULT_PRECISION = PrecisionConfig()


# ---------------------------------------------------------------- dilogarithm

def _bernoulli_coeffs(n_terms: int = 30) -> np.ndarray:
    # Li2(z) = sum_n B_n u^(n+1)/(n+1)!, u = -log(1-z)
    from fractions import Fraction

    b = [Fraction(1)]
    for m in range(1, 2 * n_terms + 2):
        s = sum(math.comb(m + 1, k) * b[k] for k in range(m))
        b.append(-s / (m + 1))
    coeffs = [(1, 1.0), (2, -0.25)]
    for n in range(2, 2 * n_terms + 1, 2):
        coeffs.append((n + 1, float(b[n] / math.factorial(n + 1))))
    return np.array(coeffs)


_BERN = _bernoulli_coeffs()


def _li2_series(w: np.ndarray) -> np.ndarray:
    """Bernoulli series, valid where |log(1-w)| is well below 2π."""
    u = -np.log1p(-w)
    u2 = u * u
    # odd powers from u^3 upward via Horner in u^2
    acc = np.zeros_like(u)
    for _, c in _BERN[:1:-1]:
        acc = acc * u2 + c
    return u - 0.25 * u2 + u * u2 * acc


def _dilog_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.complex128)
    out = np.empty_like(z)
    az = np.abs(z)
    one = z == 1.0
    big = (az > 1.0) & ~one
    near = (~big) & (z.real > 0.5) & ~one
    small = ~big & ~near & ~one
    if small.any():
        out[small] = _li2_series(z[small])
    if near.any():
        zn = z[near]
        out[near] = PI2_6 - np.log(zn) * np.log1p(-zn) - _li2_series(1.0 - zn)
    if big.any():
        zb = z[big]
        inv = 1.0 / zb
        # 1/z lies in the unit disc; reuse the two regimes above
        li = np.where(inv.real > 0.5,
                      PI2_6 - np.log(inv) * np.log1p(-inv) - _li2_series(1.0 - inv),
                      _li2_series(inv))
        lmz = np.log(-zb)
        out[big] = -li - PI2_6 - 0.5 * lmz * lmz
    out[one] = PI2_6
    return out


def _on_cut(z: np.ndarray) -> np.ndarray:
    return (z.imag == 0.0) & (z.real > 1.0)


def dilog(z):
    """Principal-branch Li₂(z).  Raises DomainError on the cut (1, ∞)."""
    arr = np.asarray(z, dtype=np.complex128)
    if np.any(_on_cut(arr)):
        raise DomainError("dilog: argument on the branch cut [1, inf)")
    if not np.all(np.isfinite(arr)):
        raise DomainError("dilog: non-finite argument")
    out = _dilog_array(arr.reshape(-1)).reshape(arr.shape)
    return complex(out) if out.ndim == 0 else out


def dilog_on_cut(x: float, side: str) -> complex:
    """Boundary value Li₂(x ± i0) for real x > 1; side is 'above' or 'below'."""
    if x <= 1.0:
        return complex(dilog(complex(x)))
    re = math.pi**2 / 3.0 - 0.5 * math.log(x) ** 2 - dilog(1.0 / x).real
    im = math.pi * math.log(x)
    if side == "above":
        return complex(re, im)
    if side == "below":
        return complex(re, -im)
    raise ValueError("side must be 'above' or 'below'")


def bloch_wigner(z):
    """D(z) = Im Li₂(z) + arg(1−z) log|z|; exactly 0 for real z."""
    arr = np.asarray(z, dtype=np.complex128)
    flat = arr.reshape(-1)
    out = np.zeros(flat.shape)
    nz = flat.imag != 0.0
    if nz.any():
        w = flat[nz]
        out[nz] = _dilog_array(w).imag + np.angle(1.0 - w) * np.log(np.abs(w))
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def lobachevsky(x):
    """Λ(x) = −∫₀ˣ log|2 sin t| dt, computed as Im Li₂(e^{2ix})/2."""
    arr = np.asarray(x, dtype=np.float64)
    red = np.remainder(arr, np.pi)
    red = np.where(red > 0.5 * np.pi, red - np.pi, red)  # odd, in (-π/2, π/2]
    sign = np.sign(red)
    t = np.abs(red)
    out = np.zeros_like(t)
    nz = t > 0
    if np.any(nz):
        out[nz] = 0.5 * _dilog_array(np.exp(2j * t[nz])).imag
    out = sign * out
    return float(out) if out.ndim == 0 else out


def lobachevsky_prime(x):
    return -np.log(np.abs(2.0 * np.sin(x)))


# ------------------------------------------------------------- Faddeev's Φ_b

@lru_cache(maxsize=8)
def _gauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


_ARC_POINTS = 48
_MAX_UNIFORM_PANELS = 16


def _log1pexp(u: np.ndarray) -> np.ndarray:
    """Principal Log(1 + e^u) without overflow."""
    pos = u.real > 0
    out = np.empty_like(u)
    up = u[pos]
    wrapped = up.real + 1j * (up.imag - 2 * np.pi * np.round(up.imag / (2 * np.pi)))
    out[pos] = wrapped + np.log1p(np.exp(-up))
    out[~pos] = np.log1p(np.exp(u[~pos]))
    return out


def _check_poles(z: np.ndarray, cc: CouplingConstant, guard: float) -> None:
    b, q = cc.b, cc.q
    cand = (np.abs(z.real) < guard) & (np.abs(z.imag) > 0.5 * q - guard)
    for zz in z[cand]:
        h = abs(zz.imag) - 0.5 * q
        for m in range(int(h / b) + 2):
            rest = h - m * b
            n = round(rest * b)
            if n >= 0 and abs(complex(zz.real, rest - n / b)) < guard:
                kind = "pole" if zz.imag > 0 else "zero"
                raise PoleError(f"Phi_b has a {kind} within {guard:g} of {zz!r}")


def _log_faddeev_array(z: np.ndarray, cc: CouplingConstant, prec: PrecisionConfig,
                       backend=None) -> np.ndarray:
    b = cc.b
    q = cc.q
    _check_poles(z, cc, 1e3 * prec.abs_tol)
    lim = 0.25 * q
    shifted = z.copy()
    corr = np.zeros_like(z)
    steps = np.array(sorted({b, 1.0 / b}))
    # walk towards the real axis with the shift that lands closest to it
    for _ in range(10000):
        im = shifted.imag
        todo = np.abs(im) > lim
        if not todo.any():
            break
        a = np.abs(im[todo])
        cand = np.abs(a[:, None] - steps[None, :])
        ok = steps[None, :] < 2 * a[:, None]
        cand = np.where(ok, cand, np.inf)
        s = steps[np.argmin(cand, axis=1)]
        zz = shifted[todo]
        up = zz.imag > 0
        # Φ(w) = Φ(w - is)/(1 + e^{2πs(w - is/2)})   (going down)
        # Φ(w) = Φ(w + is)(1 + e^{2πs(w + is/2)})    (going up)
        u = 2 * np.pi * s * (zz + np.where(up, -0.5j, 0.5j) * s)
        lg = _log1pexp(u)
        corr[todo] += np.where(up, -lg, lg)
        shifted[todo] = zz + np.where(up, -1j, 1j) * s
    else:  # pragma: no cover
        raise RuntimeError("strip reduction did not terminate")
    gx, gw = _gauss(prec.quad_points)
    ax, aw = _gauss(_ARC_POINTS)
    parts = chunked_map(
        lambda lo, hi: _kernels.log_phi_strip(shifted[lo:hi], b, gx, gw, ax, aw, _MAX_UNIFORM_PANELS,
                                              prec.decay_lengths, backend=backend),
        shifted.shape[0], thread_count())
    core = np.concatenate(parts) if parts else np.zeros(0, dtype=complex)
    out = core + corr
    if not np.all(np.isfinite(out)):
        raise PoleError("Phi_b evaluation produced a non-finite value")
    return out


def log_faddeev(z, cc: CouplingConstant, prec: PrecisionConfig = DEFAULT_PRECISION,
                backend=None):
    """Log Φ_b(z), on the branch that tends to 0 as Re z → −∞.

    Accepts scalars or arrays.  The branch is continuous along horizontal lines.
    """
    arr = np.asarray(z, dtype=np.complex128)
    out = _log_faddeev_array(arr.reshape(-1), cc, prec, backend).reshape(arr.shape)
    return complex(out) if out.ndim == 0 else out


def faddeev(z, cc: CouplingConstant, prec: PrecisionConfig = DEFAULT_PRECISION,
            backend=None):
    """Faddeev's quantum dilogarithm Φ_b(z) (meromorphic continuation)."""
    out = np.exp(log_faddeev(z, cc, prec, backend))
    return complex(out) if np.ndim(out) == 0 else out


def semiclassical_log_faddeev(y, cc: CouplingConstant):
    """Li₂(−e^y)/(2πi b²), the leading term of log Φ_b(y/(2πb))."""
    arr = np.asarray(y, dtype=np.complex128)
    if np.any(np.abs(arr.imag) >= np.pi):
        raise DomainError("semiclassical_log_faddeev: need |Im y| < pi")
    out = dilog(-np.exp(arr)) / (2j * np.pi * cc.b**2)
    return complex(out) if np.ndim(out) == 0 else out
