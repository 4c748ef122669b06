import cmath
import math

import numpy as np
import pytest

from tqft73 import integrator as itg
from tqft73.angle_opt import random_angle_structure
from tqft73.integrator import (ContourSpec, IntegrationError, contour_from_angles, extrapolate,
                               h_compatible_alpha, h_triangulation_cross_check, integrate_H_limit,
                               integrate_JX_2d, integrate_JX_3d, saddle_estimate, saddle_estimate_J,
                               saddle_prefactor_log, sweep_volume_limit, tau_from_alpha)
from tqft73.specfun import CouplingConstant, PrecisionConfig
from tqft73.triangulation import NONEMPTY_POINT

from conftest import VOLUME

TOL = 1e-8
CC5 = CouplingConstant(0.5)


def two_to_three_phase(cc):
    # J_3d = e^{-iπ(1 + 1/ħ)/12} · I_2d after integrating out the middle variable
    return cmath.exp(-1j * math.pi * (1 + 1 / cc.hbar) / 12)


@pytest.fixture(scope="module")
def j3(alpha0):
    return integrate_JX_3d(CC5, contour_from_angles(CC5, alpha0, 3), TOL)


@pytest.fixture(scope="module")
def sweep(alpha0):
    return sweep_volume_limit((0.5, 0.42, 0.35, 0.3, 0.25), "2d", alpha0, TOL)


# ------------------------------------------------------------ contours


def test_contour_offsets(alpha0):
    c3 = contour_from_angles(CC5, alpha0, 3)
    s = 0.5 * CC5.q
    assert c3.offsets == pytest.approx((-(1 - 2 * alpha0[0].a) * s, (1 - 2 * alpha0[1].a) * s,
                                        -(1 - 2 * alpha0[2].a) * s))
    c2 = contour_from_angles(CC5, alpha0, 2)
    assert c2.offsets == (c3.offsets[0], c3.offsets[2])


def test_two_d_admissibility(alpha0):
    assert alpha0[0].a - alpha0[2].a == pytest.approx(alpha0[1].c, abs=1e-12)
    assert 0 < alpha0[1].c < 0.5


def test_contour_validation():
    with pytest.raises(ValueError):
        ContourSpec((0.1,))
    with pytest.raises(ValueError):
        ContourSpec((0.1, 0.2), half_width=-1)
    with pytest.raises(ValueError):
        ContourSpec((0.1, 0.2), points_per_axis=8)
    with pytest.raises(ValueError):
        contour_from_angles(CC5, NONEMPTY_POINT, 4)


def test_short_box_fails_certificate(alpha0):
    c = contour_from_angles(CC5, alpha0, 3, half_width=1.0)
    with pytest.raises(IntegrationError):
        integrate_JX_3d(CC5, c, TOL)


# ----------------------------------------------------------- 3d integral


def test_3d_converged_and_certified(j3):
    assert j3.rel_err < TOL
    assert j3.decay_ratio < 1e-12
    assert len(j3.levels) >= 2


def test_3d_matches_2d(j3, alpha0):
    i2 = integrate_JX_2d(CC5, contour_from_angles(CC5, alpha0, 2), TOL)
    assert abs(j3.value - two_to_three_phase(CC5) * i2.value) < 10 * TOL * abs(j3.value)


def test_factorized_sum_matches_brute_force(alpha0):
    # the collapsed triple sum against the plain tensor product on a small grid
    c = contour_from_angles(CC5, alpha0, 3)
    eng = itg._Separable3D(CC5, c.offsets, (-1.0, 1.0), itg._jx_axis_logs(CC5, PrecisionConfig()),
                           PrecisionConfig())
    nodes, weights = zip(*[itg._panel_nodes(-3, 3, 2) for _ in range(3)])
    val, _ = eng.quad(list(nodes), list(weights), 1)
    y, z, w = (nodes[k] + 1j * c.offsets[k] for k in range(3))
    g = [eng.logs(k, nodes[k]) + np.log(weights[k]) for k in range(3)]
    tot = 0j
    for j in range(len(z)):
        e = g[0][:, None] + g[1][j] + g[2][None, :] + 2j * np.pi * z[j] * (w[None, :] - y[:, None])
        tot += np.exp(e).sum()
    assert abs(val - tot) < 1e-12 * abs(tot)


def test_contour_invariance(j3, ideal):
    tries = [NONEMPTY_POINT, random_angle_structure(ideal, np.random.default_rng(7))]
    for a in tries:
        other = integrate_JX_3d(CC5, contour_from_angles(CC5, a, 3), TOL)
        assert abs(other.value - j3.value) < 10 * TOL * abs(j3.value)


def test_parallel_determinism(alpha0):
    c = contour_from_angles(CC5, alpha0, 3)
    a = integrate_JX_3d(CC5, c, 1e-6, workers=1)
    b = integrate_JX_3d(CC5, c, 1e-6, workers=4)
    assert a.value == b.value  # bit-for-bit
    c2 = contour_from_angles(CC5, alpha0, 2)
    assert integrate_JX_2d(CC5, c2, 1e-6, workers=1).value == integrate_JX_2d(CC5, c2, 1e-6, workers=3).value


def test_unordered_reduction_close():
    rng = np.random.default_rng(0)
    ell = rng.uniform(-5, 5, 5000)
    s = np.exp(1j * rng.uniform(0, 2 * np.pi, 5000))
    ref, _ = itg._log_reduce(ell, s, ordered=True)
    perm = rng.permutation(5000)
    shuffled, _ = itg._log_reduce(ell[perm], s[perm], ordered=False)
    assert abs(shuffled - ref) <= 1e-12 * abs(ref)
    again, _ = itg._log_reduce(ell[perm], s[perm], ordered=True)
    assert again == ref


def test_backends_agree_on_2d(alpha0):
    c = contour_from_angles(CC5, alpha0, 2)
    a = integrate_JX_2d(CC5, c, 1e-6, backend="numba")
    b = integrate_JX_2d(CC5, c, 1e-6, backend="numpy")
    assert abs(a.value - b.value) < 1e-12 * abs(a.value)


# -------------------------------------------------------- saddle estimate


def test_saddle_vs_quadrature(j3, saddle):
    est = saddle_estimate_J(CC5, saddle)
    assert abs(j3.value - est) / abs(j3.value) < 0.5


def test_saddle_ratio_tends_to_one(saddle, alpha0):
    gaps = []
    for b in (0.5, 0.35, 0.25):
        cc = CouplingConstant(b)
        j = two_to_three_phase(cc) * integrate_JX_2d(cc, contour_from_angles(cc, alpha0, 2), TOL).value
        gaps.append(abs(j - saddle_estimate_J(cc, saddle)) / abs(j))
    assert gaps[0] > gaps[1] > gaps[2]


def test_saddle_leading_exponent(saddle):
    for b in (0.5, 0.25, 0.1):
        cc = CouplingConstant(b)
        est = saddle_estimate(cc, saddle)
        corrected = 2 * math.pi * cc.hbar * (math.log(abs(est)) - saddle_prefactor_log(cc, saddle))
        assert corrected == pytest.approx(-VOLUME, abs=1e-8)


def test_saddle_scaling_under_halving(saddle):
    c1, c2 = CouplingConstant.from_hbar(0.1), CouplingConstant.from_hbar(0.05)
    d = math.log(abs(saddle_estimate(c2, saddle))) - math.log(abs(saddle_estimate(c1, saddle)))
    lead = saddle.S_value.real / (2 * math.pi) * (1 / 0.05 - 1 / 0.1)
    assert d == pytest.approx(lead + 1.5 * math.log(0.5), abs=1e-10)


def test_rho_nonzero(saddle):
    assert 0 < abs(saddle.rho) < math.inf


# ------------------------------------------------------------------ sweep


def test_sweep_extrapolation(sweep):
    assert abs(sweep.extrapolated_volume + VOLUME) < 0.05


def test_sweep_monotone(sweep):
    vols = [r.volume_estimate for r in sweep.rows]
    assert all(v2 < v1 for v1, v2 in zip(vols[1:], vols[2:]))
    assert all(-VOLUME < v < 0 for v in vols)
    hb = [r.hbar for r in sweep.rows]
    assert hb == sorted(hb, reverse=True)


def test_sweep_error_bounds(sweep):
    assert all(r.err_bound < TOL for r in sweep.rows)


def test_sweep_json(sweep):
    doc = sweep.to_json()
    assert len(doc["rows"]) == 5 and doc["method"] == "2d"


def test_sweep_2d_vs_3d_at_b04(alpha0):
    cc = CouplingConstant(0.4)
    r2 = integrate_JX_2d(cc, contour_from_angles(cc, alpha0, 2), TOL)
    r3 = integrate_JX_3d(cc, contour_from_angles(cc, alpha0, 3), TOL)
    assert abs(2 * math.pi * cc.hbar * (r3.log_abs - r2.log_abs)) < 1e-8


def test_sweep_rejects_bad_order():
    with pytest.raises(ValueError):
        sweep_volume_limit((0.3, 0.5, 0.4))
    with pytest.raises(ValueError):
        sweep_volume_limit((0.5, 0.4), method="4d")


def test_extrapolate_recovers_model():
    h = np.array([0.16, 0.12, 0.09, 0.07, 0.05])
    v = -4.6 + 0.3 * h * np.log(h) - 2.0 * h
    assert extrapolate(h, v) == pytest.approx((-4.6, 0.3, -2.0), abs=1e-10)
    with pytest.raises(ValueError):
        extrapolate([0.1, 0.2], [1, 2])


# ---------------------------------------------------- H-triangulation limit


@pytest.mark.parametrize("b", [0.5, 0.4])
def test_h_modulus_identity(b, alpha0):
    h_abs, j_abs = h_triangulation_cross_check(CouplingConstant(b), alpha0, 0.25, TOL)
    assert abs(h_abs - j_abs) < 4 * TOL * j_abs


def test_h_modulus_second_tau(alpha0):
    a1 = h_compatible_alpha(alpha0, step=0.02)
    assert abs(a1.vector() - alpha0.vector()).max() > 1e-3
    h_abs, j_abs = h_triangulation_cross_check(CC5, a1, 0.1, TOL)
    h0, _ = h_triangulation_cross_check(CC5, alpha0, 0.25, TOL)
    assert abs(h_abs - j_abs) < 4 * TOL * j_abs
    assert abs(h_abs - h0) < 4 * TOL * h0


def test_tau_structure(alpha0, htri):
    tau = tau_from_alpha(alpha0, 0.3)
    assert tau[0].as_tuple() == (0.0, 0.3, 0.5 - 0.3)
    assert tau[3] == alpha0[2]
    with pytest.raises(ValueError):
        tau_from_alpha(alpha0, 0.7)


def test_h_check_rejects_asymmetric_alpha():
    with pytest.raises(ValueError):
        h_triangulation_cross_check(CC5, NONEMPTY_POINT)


def test_h_limit_needs_six_shapes(alpha0):
    with pytest.raises(ValueError):
        integrate_H_limit(CC5, alpha0)
