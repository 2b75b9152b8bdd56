import math
import time
from fractions import Fraction

import numpy as np
import pytest

from spherepart.constants import (
    B_RESIDUAL_TOL,
    beta_p,
    constants_for,
    constants_report,
    extrinsic_cap_lower_bound,
    extrinsic_constants,
    extrinsic_h,
    extrinsic_h_inverse,
    h_lower_bound,
    h_lower_bound_inverse,
    intrinsic_constants,
    rho_p,
    theta,
)
from spherepart.geometry import cap_lower_bound, cap_measure, sphere_area


def test_rho_p_exact_for_p_two():
    # rho_2(i) = 1/sqrt(i) - 1/i peaks at i = 4 with value 1/4
    assert rho_p(2, 4) == 0.25
    assert rho_p(2, 1) == 0.0


def test_intrinsic_constants_p_two():
    c = intrinsic_constants(3, 2.0)
    assert c.I_p + 1 == 4
    assert Fraction(c.a_p).limit_denominator(1000) == Fraction(1, 16)
    assert c.a_p == 0.0625


def test_intrinsic_alpha_value_n3_p2():
    c = intrinsic_constants(3, 2.0)
    a = 1 / 16
    inner = sphere_area(1) / 2 * (math.sin(a * math.pi) / (a * math.pi))
    assert np.isclose(c.alpha_np, (2 / a) * inner ** (-1 / 4))
    assert np.isclose(c.alpha_np, 24.08, atol=0.01)
    assert np.isclose(c.alpha_np_normalized, c.alpha_np * (4 * math.pi) ** 0.25)


@pytest.mark.parametrize('p', [1.1, 1.5, 2.0, 3.0, 10.0])
def test_intrinsic_index_maximizes_rho(p):
    c = intrinsic_constants(3, p)
    best = rho_p(p, c.I_p + 1)
    for i in range(1, 5 * (c.I_p + 2)):
        assert rho_p(p, i) <= best + 1e-15
    assert 0.0 < c.a_p < 0.25


def test_extrinsic_constants_p_two():
    start = time.perf_counter()
    c = extrinsic_constants(3, 2.0)
    assert c.J_p == 4
    assert np.isclose(beta_p(2.0, 1 / 5), 0.10451, atol=1e-5)
    target = 1 / (c.J_p + 1)
    residual = abs(target - (math.sin(math.pi / (2 * (c.J_p + 1))) + 4 * c.b_p) ** 2)
    assert residual < B_RESIDUAL_TOL
    assert np.isclose(c.b_p, (math.sqrt(0.2) - math.sin(math.pi / 10)) / 4, rtol=1e-12)
    assert np.isclose(c.b_p, 0.034549, atol=1e-6)
    assert time.perf_counter() - start < 1.0


@pytest.mark.parametrize('p', [1.5, 2.0, 3.0, 8.0, 64.0])
def test_extrinsic_index_maximizes_beta(p):
    c = extrinsic_constants(3, p)
    j_star = c.J_p + 1
    best = beta_p(p, 1 / j_star)
    assert best > 0.0
    for j in range(2, 4 * j_star + 10):
        assert beta_p(p, 1 / j) <= best + 1e-15
    assert 0.0 < c.b_p < 0.25
    assert c.b_residual < B_RESIDUAL_TOL


def test_extrinsic_large_p():
    c = extrinsic_constants(3, 64.0)
    assert c.J_p + 1 == 2
    assert np.isclose(c.b_p, 0.0705, atol=5e-4)


def test_constants_reject_bad_arguments():
    with pytest.raises(ValueError):
        intrinsic_constants(3, 1.0)
    with pytest.raises(ValueError):
        extrinsic_constants(1, 2.0)
    with pytest.raises(ValueError):
        constants_for('manhattan', 3, 2.0)


def test_constants_are_cached():
    assert intrinsic_constants(4, 2.5) is intrinsic_constants(4, 2.5)


def test_normalization_factor_for_small_n():
    for n in (2, 3, 4, 5):
        c = intrinsic_constants(n, 2.0)
        assert c.alpha_np_normalized >= c.alpha_np
        e = extrinsic_constants(n, 2.0)
        assert e.prefactor_normalized >= e.prefactor_printed


def test_h_lower_bound_dominates_closed_form():
    n, p, a = 3, 2.0, 1 / 16
    for t in np.linspace(0.0, math.pi, 30):
        r = a * t
        closed = cap_lower_bound(n, a, r) * r ** p
        assert h_lower_bound(n, p, a, t) >= closed - 1e-18


def test_h_lower_bound_matches_cap_measure():
    assert np.isclose(h_lower_bound(4, 3.0, 0.1, 2.0), cap_measure(4, 0.2) * 0.2 ** 3)


@pytest.mark.parametrize('t', [0.0, 0.3, 1.7, 3.0])
def test_h_inverse_round_trip(t):
    n, p, a = 3, 2.0, 1 / 16
    value = h_lower_bound(n, p, a, t)
    assert np.isclose(h_lower_bound_inverse(n, p, a, value), t, atol=1e-9)


def test_h_inverse_saturates_at_pi():
    assert h_lower_bound_inverse(3, 2.0, 1 / 16, 1.0) == math.pi


def test_extrinsic_h_and_inverse():
    c = extrinsic_constants(3, 2.0)
    value = extrinsic_h(3, 2.0, c.b_p, 1.3)
    assert np.isclose(extrinsic_h_inverse(3, 2.0, c.b_p, value), 1.3, atol=1e-9)
    assert extrinsic_h_inverse(3, 2.0, c.b_p, 10.0) == 2.0


def test_extrinsic_cap_lower_bound_below_cap():
    b = extrinsic_constants(4, 2.0).b_p
    for r in np.linspace(0.0, 2 * math.asin(b), 15):
        assert extrinsic_cap_lower_bound(4, b, r) <= cap_measure(4, r) + 1e-15


THETA_GRID = np.linspace(0.01, math.pi / 2, 100)
T_GRID = np.linspace(0.005, 0.5, 100)


def test_theta_is_bounded_by_sine():
    for t in T_GRID:
        bound = math.sin(math.pi * t / 2)
        for theta_val in THETA_GRID:
            value = theta(theta_val, t)
            assert 0.0 < value <= bound + 1e-12


def test_theta_is_increasing_in_theta():
    for t in T_GRID:
        values = np.array([theta(theta_val, t) for theta_val in THETA_GRID])
        assert np.all(np.diff(values) > 0.0)


def test_constants_report_fields():
    report = constants_report(3, 2.0)
    assert report['n'] == 3
    assert report['intrinsic']['I_p'] == 3
    assert report['extrinsic']['J_p'] == 4
    assert report['intrinsic']['a_p_residual'] == 0.0
    assert report['intrinsic']['normalization_factor'] >= 1.0
