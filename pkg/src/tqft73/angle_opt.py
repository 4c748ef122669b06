"""Volume maximization over the angle-structure polytope."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .specfun import lobachevsky
from .triangulation import NONEMPTY_POINT, ShapeStructure, Triangulation, is_angle_structure

TWO_PI = 2.0 * math.pi


class OptimizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    grad_tol: float = 1e-10
    max_iters: int = 200
    barrier_schedule: tuple[float, ...] = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12)

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if any(b <= 0 for b in self.barrier_schedule):
            raise ValueError("barrier weights must be positive")
        if list(self.barrier_schedule) != sorted(self.barrier_schedule, reverse=True):
            raise ValueError("barrier schedule must be decreasing")


@dataclass
class AnglePolytope:
    """Equality constraints ``A v = rhs`` on the 15 turn fractions, plus v > 0."""

    A: np.ndarray
    rhs: np.ndarray
    basis: np.ndarray = field(init=False)

    def __post_init__(self):
        self.basis = null_space(self.A)

    @classmethod
    def from_triangulation(cls, t: Triangulation) -> "AnglePolytope":
        n = t.n_tets
        per_tet = np.kron(np.eye(n), np.ones((1, 3)))
        w = t.weight_matrix()
        A = np.vstack([per_tet, w])
        rhs = np.concatenate([np.full(n, 0.5), np.ones(len(t.edges))])
        # drop dependent rows so the system has full row rank
        q, r, piv = _qr_rank(A)
        return cls(A[piv], rhs[piv])

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def residual(self, v: np.ndarray) -> float:
        return float(np.max(np.abs(self.A @ v - self.rhs)))


def _qr_rank(A: np.ndarray, tol: float = 1e-10):
    from scipy.linalg import qr

    q, r, p = qr(A.T, pivoting=True)
    rank = int(np.sum(np.abs(np.diag(r)) > tol))
    return q, r, np.sort(p[:rank])


def volume_functional(alpha) -> float:
    """Σ Λ(2π·angle) over all angles of a shape structure (or raw angle vector)."""
    v = alpha.vector() if isinstance(alpha, ShapeStructure) else np.asarray(alpha, dtype=float)
    if np.any(v < -1e-14) or np.any(v > 0.5 + 1e-14):
        raise ValueError("angles must lie in [0, 1/2]")
    return float(np.sum(lobachevsky(TWO_PI * v)))


def volume_gradient(v: np.ndarray) -> np.ndarray:
    return -TWO_PI * np.log(np.abs(2.0 * np.sin(TWO_PI * v)))


def volume_hessian_diag(v: np.ndarray) -> np.ndarray:
    return -(TWO_PI**2) / np.tan(TWO_PI * v)


@dataclass
class VolumeMaximum:
    alpha: ShapeStructure
    volume: float
    grad_norm: float
    iterations: int

    def to_json(self) -> dict:
        return {
            "angles": [list(s.as_tuple()) for s in self.alpha.shapes],
            "volume": self.volume,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
        }


def _newton_phase(v, basis, mu, cfg, tol, counter):
    def merit(x):
        return volume_functional(x) + mu * float(np.sum(np.log(x)))

    for _ in range(cfg.max_iters):
        g = basis.T @ (volume_gradient(v) + mu / v)
        if np.linalg.norm(g) < tol:
            return v
        h = basis.T @ ((volume_hessian_diag(v) - mu / v**2)[:, None] * basis)
        step = basis @ np.linalg.solve(h, -g)
        # stay strictly inside the positive orthant, then backtrack
        neg = step < 0
        t = 1.0
        if np.any(neg):
            t = min(1.0, 0.99 * float(np.min(-v[neg] / step[neg])))
        f0 = merit(v)
        slope = float(g @ np.linalg.solve(h, -g))
        while t > 1e-14:
            cand = v + t * step
            if np.all(cand > 0) and np.all(cand < 0.5) and merit(cand) >= f0 + 1e-4 * t * slope - 1e-15:
                break
            t *= 0.5
        else:
            raise OptimizationError("line search failed")
        v = v + t * step
        counter[0] += 1
    raise OptimizationError(f"no convergence within {cfg.max_iters} Newton steps (mu={mu:g})")


def maximize_volume_report(t: Triangulation, cfg: OptimizerConfig = OptimizerConfig(),
                           start: ShapeStructure | None = None) -> VolumeMaximum:
    poly = AnglePolytope.from_triangulation(t)
    if start is None:
        if t.n_tets != 5:
            raise OptimizationError("no default starting point for this triangulation")
        start = NONEMPTY_POINT
    v = start.vector().astype(float)
    if poly.residual(v) > 1e-9 or np.any(v <= 0):
        raise OptimizationError("starting point is not an interior angle structure")
    counter = [0]
    for mu in cfg.barrier_schedule:
        v = _newton_phase(v, poly.basis, mu, cfg, max(cfg.grad_tol, 10 * mu), counter)
    # the maximizer is interior, so finish with plain Newton on the volume
    v = _newton_phase(v, poly.basis, 0.0, cfg, cfg.grad_tol, counter)
    g = float(np.linalg.norm(poly.basis.T @ volume_gradient(v)))
    alpha = ShapeStructure.from_vector(_renormalize(v))
    if not is_angle_structure(t, alpha):
        raise OptimizationError("optimizer left the angle-structure polytope")
    return VolumeMaximum(alpha, volume_functional(alpha), g, counter[0])


def _renormalize(v: np.ndarray) -> np.ndarray:
    # remove rounding drift in the per-tetrahedron sums
    v = v.reshape(-1, 3).copy()
    v -= (v.sum(axis=1, keepdims=True) - 0.5) / 3.0
    return v.reshape(-1)


def maximize_volume(t: Triangulation, cfg: OptimizerConfig = OptimizerConfig(),
                    start: ShapeStructure | None = None) -> ShapeStructure:
    return maximize_volume_report(t, cfg, start).alpha


def random_angle_structure(t: Triangulation, rng: np.random.Generator,
                           around: ShapeStructure | None = None, scale: float = 0.05) -> ShapeStructure:
    """Random interior point of the polytope near ``around`` (default: NONEMPTY_POINT)."""
    poly = AnglePolytope.from_triangulation(t)
    base = (around or NONEMPTY_POINT).vector()
    for _ in range(1000):
        v = base + poly.basis @ rng.normal(scale=scale, size=poly.dim)
        if np.all(v > 1e-3) and np.all(v < 0.5 - 1e-3):
            return ShapeStructure.from_vector(_renormalize(v))
        scale *= 0.8
    raise OptimizationError("could not sample an interior point")
