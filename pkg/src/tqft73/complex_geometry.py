"""Complex shapes, the potential S and its critical point, and the reduced 2-variable analysis."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .specfun import DomainError, bloch_wigner, dilog
from .triangulation import ShapeStructure

TWO_PI = 2.0 * math.pi
IPI = 1j * math.pi

Q_MATRIX = np.array([[1.0, -0.5, 0.0], [-0.5, 0.0, 0.5], [0.0, 0.5, 0.5]])
W_VEC = np.array([-math.pi, 0.0, math.pi])
# orientation signs of the three tetrahedra whose shapes parametrize S
PSI_SIGNS = (1, -1, 1)


class GluingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ComplexShape:
    z: complex

    def __post_init__(self):
        if not self.z.imag > 0:
            raise ValueError(f"shape parameter must have Im z > 0, got {self.z!r}")

    @property
    def z_prime(self) -> complex:
        return 1.0 / (1.0 - self.z)

    @property
    def z_dprime(self) -> complex:
        return (self.z - 1.0) / self.z

    def logs(self) -> tuple[complex, complex, complex]:
        return cmath.log(self.z), cmath.log(self.z_prime), cmath.log(self.z_dprime)


def shapes_from_angles(alpha: ShapeStructure, signs: Sequence[int]) -> list[ComplexShape]:
    """Shape parameter per tetrahedron from its dihedral angles.

    arg z = 2πa in both cases; |z| = sin2πc/sin2πb for sign +1 and the
    reciprocal for sign −1.
    """
    if len(signs) != len(alpha):
        raise ValueError("one sign per tetrahedron required")
    out = []
    for s, eps in zip(alpha.shapes, signs):
        sb, sc = math.sin(TWO_PI * s.b), math.sin(TWO_PI * s.c)
        if min(s.a, s.b, s.c) <= 0 or max(s.a, s.b, s.c) >= 0.5 or sb <= 0 or sc <= 0:
            raise ValueError("flat or degenerate tetrahedron")
        y = math.log(sc / sb) - eps * IPI * (1.0 - 2.0 * s.a)
        out.append(ComplexShape(-cmath.exp(eps * y)))
    return out


def psi(z: complex, sign: int) -> complex:
    return sign * (cmath.log(z) - IPI)


def psi_inverse(y: complex, sign: int) -> complex:
    return -cmath.exp(sign * y)


def gluing_residual(z1: ComplexShape, z2: ComplexShape, z3: ComplexShape) -> np.ndarray:
    l1, _, l1pp = z1.logs()
    _, l2p, l2pp = z2.logs()
    l3, l3p, _ = z3.logs()
    return np.array([
        l3 - l1pp - l2p,
        l3 - l1 + l2pp,
        l1 + l2p + 3.0 * l3p - 2.0 * IPI,
    ])


# --------------------------------------------------------------- potential S

def in_U(y: Sequence[complex]) -> bool:
    y = np.asarray(y, dtype=complex)
    return bool(-math.pi < y[0].imag < 0 and 0 < y[1].imag < math.pi and -math.pi < y[2].imag < 0)


def _check_U(y):
    if not in_U(y):
        raise DomainError(f"y = {y} is outside U")


def potential_S(y: Sequence[complex]) -> complex:
    y = np.asarray(y, dtype=complex)
    _check_U(y)
    li = dilog(-np.exp(y))
    return complex(1j * (y @ Q_MATRIX @ y) + y @ W_VEC + 1j * li[0] + 3j * li[2] - 1j * li[1])


def potential_S_rewritten(y: Sequence[complex]) -> complex:
    """Equivalent form of S with Li₂(−e^{−y₂}); used as an identity check."""
    y = np.asarray(y, dtype=complex)
    _check_U(y)
    li1 = dilog(-cmath.exp(y[0]))
    li2 = dilog(-cmath.exp(-y[1]))
    li3 = dilog(-cmath.exp(y[2]))
    return complex(1j * li1 + 1j * li2 + 3j * li3 + 1j * (y @ Q_MATRIX @ y)
                   + 0.5j * y[1] ** 2 + y @ W_VEC + 1j * math.pi**2 / 6.0)


def grad_S(y: Sequence[complex]) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    lg = np.log1p(np.exp(y))
    return 2j * (Q_MATRIX @ y) + W_VEC + 1j * np.array([-lg[0], lg[1], -3.0 * lg[2]])


def hess_S(y: Sequence[complex]) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    s = 1.0 / (1.0 + np.exp(-y))
    return 2j * Q_MATRIX + 1j * np.diag([-s[0], s[1], -3.0 * s[2]])


@dataclass
class SaddleReport:
    y0: np.ndarray
    z0: tuple[ComplexShape, ...]  # z1..z5 with z4 = z3 and z5 = z3''
    S_value: complex
    hessian: np.ndarray
    det_hessian: complex
    rho: complex
    volume: float
    grad_norm: float
    newton_iters: int

    def to_json(self) -> dict:
        c = lambda v: [float(np.real(v)), float(np.imag(v))]  # noqa: E731
        return {
            "y0": [c(v) for v in self.y0],
            "z0": [c(s.z) for s in self.z0],
            "S": c(self.S_value),
            "volume": self.volume,
            "hessian": [[c(v) for v in row] for row in self.hessian],
            "det": c(self.det_hessian),
            "rho": c(self.rho),
            "grad_norm": self.grad_norm,
            "newton_iters": self.newton_iters,
        }


def seed_from_angles(alpha: ShapeStructure, signs: Sequence[int] = (1, -1, 1, 1, 1)) -> np.ndarray:
    shapes = shapes_from_angles(alpha, signs)
    return np.array([psi(shapes[k].z, PSI_SIGNS[k]) for k in range(3)])


def solve_gluing(seed: ShapeStructure, tol: float = 1e-13, max_iters: int = 50) -> SaddleReport:
    """Newton iteration on ∇S = 0 started from ψ(shapes of the seed)."""
    y = seed_from_angles(seed)
    _check_U(y)
    g = grad_S(y)
    gn = float(np.linalg.norm(g))
    it = 0
    while gn >= tol:
        if it >= max_iters:
            raise GluingError(f"Newton did not converge (|grad S| = {gn:.3e})")
        step = np.linalg.solve(hess_S(y), -g)
        t = 1.0
        while True:
            cand = y + t * step
            if in_U(cand):
                gc = grad_S(cand)
                if np.linalg.norm(gc) < gn or t < 1e-3:
                    break
            t *= 0.5
            if t < 1e-12:
                raise GluingError("Newton step cannot stay inside U")
        y, g = cand, gc
        new_gn = float(np.linalg.norm(g))
        it += 1
        if new_gn >= gn and gn < 1e-11:
            break  # rounding floor reached
        gn = new_gn
    gn = float(np.linalg.norm(grad_S(y)))
    z1, z2, z3 = (ComplexShape(psi_inverse(y[k], PSI_SIGNS[k])) for k in range(3))
    z5 = ComplexShape(z3.z_dprime)
    H = hess_S(y)
    det = complex(np.linalg.det(H))
    if det == 0:
        raise GluingError("degenerate Hessian at the critical point")
    rho = (TWO_PI**1.5) / cmath.sqrt(det)
    S0 = potential_S(y)
    return SaddleReport(y, (z1, z2, z3, z3, z5), S0, H, det, rho, -S0.real, gn, it)


def bloch_wigner_volume(report: SaddleReport) -> float:
    z1, z2, z3 = (s.z for s in report.z0[:3])
    return float(bloch_wigner(z1) + bloch_wigner(z2) + 3.0 * bloch_wigner(z3))


# ------------------------------------------------------- reduced potential V

def reduced_potential_V(x: complex, y: complex) -> complex:
    exy = cmath.exp(x - y)
    if exy.imag == 0 and exy.real >= 1:
        raise DomainError("e^(x-y) on the dilogarithm cut")
    return complex(-dilog(-cmath.exp(x)) - dilog(exy) - 3.0 * dilog(-cmath.exp(y)) - x * x - 0.5 * y * y)


def grad_V(x: complex, y: complex) -> tuple[complex, complex]:
    l1 = cmath.log(1.0 + cmath.exp(x))
    l2 = cmath.log(1.0 - cmath.exp(x - y))
    l3 = cmath.log(1.0 + cmath.exp(y))
    return l1 + l2 - 2.0 * x, -l2 + 3.0 * l3 - y


def saddle_polynomial() -> np.ndarray:
    """Coefficients (highest degree first) of t³(t²−t−1)² − (1+2t)³."""
    p = np.polymul([1, 0, 0, 0], np.polymul([1, -1, -1], [1, -1, -1]))
    return np.polysub(p, np.polymul([2, 1], np.polymul([2, 1], [2, 1]))).astype(float)


def saddle_polynomial_roots() -> list[complex]:
    coeffs = saddle_polynomial()
    roots = np.roots(coeffs)  # companion-matrix eigenvalues
    dcoeffs = np.polyder(coeffs)
    polished = []
    for r in roots:
        r = complex(r)
        for _ in range(50):
            f = np.polyval(coeffs, r)
            if abs(f) < 1e-15:
                break
            dr = f / np.polyval(dcoeffs, r)
            r = complex(r - dr)
            if abs(dr) < 1e-16 * max(1.0, abs(r)):
                break
        if abs(r.imag) < 1e-12:
            r = complex(r.real, 0.0)
        polished.append(complex(r))
    return sorted(polished, key=lambda z: (round(z.real, 9), z.imag))


# printed approximations, used only to attach the conventional labels t0..t6
_LABEL_HINTS = (-1.0, -0.566231, 2.712568, -0.446038 - 0.121232j, -0.446038 + 0.121232j,
                0.872869 - 1.511780j, 0.872869 + 1.511780j)


def labeled_roots() -> list[complex]:
    """Roots in the conventional order t0..t6 (reals first, then conjugate pairs)."""
    roots = saddle_polynomial_roots()
    out = []
    for hint in _LABEL_HINTS:
        out.append(min(roots, key=lambda r: abs(r - hint)))
    if len(set(out)) != 7:
        raise RuntimeError("root labelling is ambiguous")
    return out


def _exp_y_of_t(t: complex) -> complex:
    den = t * t - t - 1.0
    if den == 0:
        raise DomainError("t is a root of t^2 - t - 1")
    return -(t * t + t) / den


def f_of_t(t: complex) -> complex:
    t = complex(t)
    if t == 0 or t == -1:
        raise DomainError("f is undefined at t = 0, -1")
    u = (-1.0 - t) / (-1.0 - 1.0 / t + t)
    lt = cmath.log(t)
    lu = cmath.log(u)
    return complex(-lt * lt - 0.5 * lu * lu - dilog(-t) - dilog((1.0 + t - t * t) / (1.0 + t))
                   - 3.0 * dilog((1.0 + t) / (-1.0 - 1.0 / t + t)))


def xy_of_t(t: complex) -> tuple[complex, complex]:
    """Point (x, y) with e^x = t and e^y from the stationarity relations."""
    ey = _exp_y_of_t(t)
    if ey == 0:
        raise DomainError("e^y = 0: there is no y for this t")
    return cmath.log(t), cmath.log(ey)


@dataclass
class SaddleClass:
    t: complex
    exp_y: complex
    exp_x_minus_y: complex
    h: complex
    i: complex
    j: complex
    eigenvalues: tuple[float, float]

    @property
    def admissible(self) -> bool:
        return self.eigenvalues[0] < 0 and self.eigenvalues[1] < 0


def classify_saddle(t: complex) -> SaddleClass:
    t = complex(t)
    ey = _exp_y_of_t(t)
    if abs(ey) < 1e-14:
        raise DomainError("e^y = 0 (t = -1): there is no such complex solution y")
    exy = -(t * t - t - 1.0) / (t + 1.0)
    r = exy / (1.0 - exy)
    h = t / (1.0 + t) - r - 2.0
    i = -r + 3.0 * ey / (1.0 + ey) - 1.0
    j = r
    m = np.array([[h.imag, j.imag], [j.imag, i.imag]])
    ev = np.linalg.eigvalsh(m)[::-1]
    return SaddleClass(t, ey, exy, h, i, j, (float(ev[0]), float(ev[1])))
