import math

import numpy as np
import pytest

from tqft73.angle_opt import (AnglePolytope, OptimizationError, OptimizerConfig, maximize_volume,
                              maximize_volume_report, random_angle_structure, volume_functional,
                              volume_gradient)
from tqft73.specfun import lobachevsky
from tqft73.triangulation import NONEMPTY_POINT, ShapeStructure, is_angle_structure
from scipy.integrate import quad

from conftest import VOLUME


def test_polytope_shape(ideal):
    poly = AnglePolytope.from_triangulation(ideal)
    assert np.linalg.matrix_rank(poly.A) == poly.A.shape[0]
    assert poly.residual(NONEMPTY_POINT.vector()) < 1e-15
    assert poly.dim == 15 - poly.A.shape[0]


def test_taut_structure_has_zero_volume():
    taut = ShapeStructure.from_vector([0.5, 0, 0, 0, 0.5, 0, 0, 0, 0.5, 0.5, 0, 0, 0, 0.5, 0])
    assert volume_functional(taut) == pytest.approx(0.0, abs=1e-14)


def test_volume_at_nonempty_point_by_quadrature():
    def lam(x):
        if x == 0:
            return 0.0
        return quad(lambda t: -math.log(abs(2 * math.sin(t))), 0, x, limit=200)[0]

    ref = sum(lam(2 * math.pi * v) for v in NONEMPTY_POINT.vector())
    got = volume_functional(NONEMPTY_POINT)
    assert got == pytest.approx(ref, abs=1e-10)
    assert got > 0


def test_volume_rejects_out_of_range():
    with pytest.raises(ValueError):
        volume_functional(np.array([0.6, -0.1, 0.0]))


def test_maximum_value(opt_report):
    assert opt_report.volume == pytest.approx(VOLUME, abs=1e-6)
    assert opt_report.grad_norm < 1e-10


def test_maximizer_interior_and_balanced(ideal, alpha0):
    v = alpha0.vector()
    assert np.all((v > 0) & (v < 0.5))
    assert is_angle_structure(ideal, alpha0)


def test_maximizer_symmetry(alpha0):
    assert alpha0[2].a == pytest.approx(alpha0[3].a, abs=1e-10)
    t4, t5 = alpha0[3], alpha0[4]
    assert (t4.a, t4.b, t4.c) == pytest.approx((t5.c, t5.a, t5.b), abs=1e-10)


def test_kkt(ideal, alpha0):
    poly = AnglePolytope.from_triangulation(ideal)
    assert np.linalg.norm(poly.basis.T @ volume_gradient(alpha0.vector())) < 1e-10


def test_start_independence(ideal, alpha0):
    rng = np.random.default_rng(21)
    for _ in range(2):
        start = random_angle_structure(ideal, rng)
        other = maximize_volume(ideal, start=start)
        assert np.max(np.abs(other.vector() - alpha0.vector())) < 1e-8


def test_gradient_matches_fd():
    rng = np.random.default_rng(1)
    for _ in range(20):
        v = rng.uniform(0.05, 0.45, 15)
        d = rng.normal(size=15)
        h = 1e-6
        fd = (np.sum(lobachevsky(2 * np.pi * (v + h * d))) - np.sum(lobachevsky(2 * np.pi * (v - h * d)))) / (2 * h)
        assert fd == pytest.approx(volume_gradient(v) @ d, rel=1e-6, abs=1e-6)


def test_concavity_probe(ideal):
    rng = np.random.default_rng(9)
    fails = 0
    for _ in range(1000):
        a = random_angle_structure(ideal, rng, scale=0.05)
        b = random_angle_structure(ideal, rng, scale=0.05)
        s = rng.uniform()
        mid = s * a.vector() + (1 - s) * b.vector()
        lhs = volume_functional(mid)
        rhs = s * volume_functional(a) + (1 - s) * volume_functional(b)
        fails += lhs < rhs - 1e-10
    assert fails == 0


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizerConfig(grad_tol=0)
    with pytest.raises(ValueError):
        OptimizerConfig(barrier_schedule=(1e-4, 1e-2))


def test_infeasible_start(ideal):
    with pytest.raises(OptimizationError):
        maximize_volume(ideal, start=ShapeStructure.from_vector([1 / 6] * 15))


def test_too_few_iterations(ideal):
    with pytest.raises(OptimizationError):
        maximize_volume(ideal, OptimizerConfig(max_iters=1))


def test_report_json(opt_report):
    doc = opt_report.to_json()
    assert len(doc["angles"]) == 5 and doc["iterations"] > 0
