import math

import numpy as np
import pytest
from scipy import stats

from heavytail_ccp.distributions import BetaPrime, SqrtBetaPrime, StudentT, quantile_numeric
from heavytail_ccp.dynamics import CwhParams, LtiModel, concat, cwh_planar_attitude
from heavytail_ccp.exceptions import DegenerateScaleError
from heavytail_ccp.reformulate import (CONVEX, REVERSE, CollisionSpec, TargetSetSpec, block_scale,
                                       lambda_max, position_selector, reform_collision,
                                       reform_collision_pair, reform_collision_static,
                                       reform_target)
from heavytail_ccp.validate import conservatism_audit


def identity_system(n, N=1):
    return concat(LtiModel(np.eye(n), np.eye(n)), N)


def test_unit_row_gives_unit_scale():
    sys = identity_system(3)
    spec = TargetSetSpec(0, 1, np.array([[0.0, 1.0, 0.0]]), np.array([2.0]))
    (c,) = reform_target(spec, sys, np.eye(3), 5.0, np.zeros(3))
    assert c.g == pytest.approx(1.0)
    assert c.sense == CONVEX and isinstance(c.dist, StudentT) and c.dist.nu == 5.0


def test_scalar_target_expansion():
    sigma2, x0, b = 0.25, 0.3, 2.0
    sys = identity_system(1)
    spec = TargetSetSpec(0, 1, np.array([[1.0]]), np.array([b]))
    (c,) = reform_target(spec, sys, np.array([[sigma2]]), 4.0, np.array([x0]))
    assert c.g == pytest.approx(math.sqrt(sigma2))
    assert c.c == b
    u = np.array([0.7])
    assert c.f_value([u]) == pytest.approx(x0 + 0.7)


def test_box_rows_share_target_pool():
    model = cwh_planar_attitude(CwhParams())
    sys = concat(model, 4)
    P = np.array([[1.0, 0, 0, 0, 0, 0], [-1.0, 0, 0, 0, 0, 0],
                  [0, 1.0, 0, 0, 0, 0], [0, -1.0, 0, 0, 0, 0]])
    spec = TargetSetSpec(0, 2, P, np.ones(4))
    out = reform_target(spec, sys, block_scale(np.eye(6) * 1e-4, 4), 4.0, np.zeros(6))
    assert len(out) == 4
    assert {c.pool for c in out} == {"alpha_T"}
    assert all(c.k == 2 for c in out)


def test_target_noise_free_row_is_deterministic():
    sys = identity_system(2)
    spec = TargetSetSpec(0, 1, np.array([[1.0, 0.0]]), np.array([1.0]))
    (c,) = reform_target(spec, sys, np.diag([0.0, 1.0]), 4.0, np.zeros(2))
    assert c.deterministic and c.g == 0.0


def test_pair_scale_and_law():
    sys = identity_system(2)
    psi = np.diag([2.0, 3.0])
    nu = 6.0
    spec = CollisionSpec("pair", (0, 1), 1.0, np.eye(2), (1,), "alpha_r")
    (c,) = reform_collision_pair(spec, sys, psi, nu, [np.zeros(2), np.ones(2)])
    assert c.g == pytest.approx(math.sqrt(6 * nu))
    assert c.sense == REVERSE and c.norm
    sys3 = identity_system(3)
    spec3 = CollisionSpec("pair", (0, 1), 1.0, np.eye(3), (1,), "alpha_r")
    (c3,) = reform_collision(spec3, sys3, np.eye(3), 20.0, [np.zeros(3), np.ones(3)])
    assert c3.dist.base.gamma == pytest.approx(3.380952, abs=1e-6)
    assert c3.dist.base.delta == pytest.approx(11.142857, abs=1e-6)


def test_pair_with_coincident_means_has_zero_f():
    sys = identity_system(2)
    spec = CollisionSpec("pair", (0, 1), 1.0, np.eye(2), (1,), "alpha_r")
    (c,) = reform_collision_pair(spec, sys, np.eye(2), 20.0, [np.ones(2), np.ones(2)])
    u = np.array([0.4, -0.2])
    assert c.f_value([u, u]) == 0.0


def test_static_law_and_scale():
    sys = identity_system(2)
    spec = CollisionSpec("obstacle", (0,), 8.0, np.eye(2), (1,), "alpha_o")
    (c,) = reform_collision_static(spec, sys, np.eye(2), 4.0, [np.array([3.0, 4.0])])
    assert c.g == pytest.approx(2.0)
    assert isinstance(c.dist, SqrtBetaPrime)
    assert (c.dist.base.gamma, c.dist.base.delta) == (1.0, 2.0)
    assert c.dist.median() == pytest.approx(0.643594, abs=1e-6)
    assert c.f_value([np.zeros(2)]) == pytest.approx(5.0)


def test_static_obstacle_offset():
    sys = concat(cwh_planar_attitude(CwhParams()), 2)
    S = position_selector(2, 6)
    o = np.array([1.0, -2.0])
    spec = CollisionSpec("obstacle", (0,), 1.0, S, (1, 2), "alpha_o", obstacle=o)
    x0 = np.array([4.0, 5.0, 0.3, 0, 0, 0])
    out = reform_collision_static(spec, sys, block_scale(np.eye(6), 2), 4.0, [x0])
    assert len(out) == 2
    U = np.zeros(6)
    for c in out:
        mean = sys.A_powers[c.k] @ x0
        assert c.f_value([U]) == pytest.approx(np.linalg.norm(S @ mean - o), rel=1e-12)


def test_zero_noise_collision_rejected():
    sys = identity_system(2)
    spec = CollisionSpec("obstacle", (0,), 1.0, np.eye(2), (1,), "alpha_o")
    with pytest.raises(DegenerateScaleError):
        reform_collision_static(spec, sys, np.zeros((2, 2)), 4.0, [np.ones(2)])


def test_collision_spec_validation():
    with pytest.raises(ValueError):
        CollisionSpec("pair", (0, 0), 1.0, np.eye(2), (1,), "alpha_r")
    with pytest.raises(ValueError):
        CollisionSpec("ring", (0,), 1.0, np.eye(2), (1,), "alpha_o")
    with pytest.raises(ValueError):
        CollisionSpec("obstacle", (0,), 0.0, np.eye(2), (1,), "alpha_o")


def test_lambda_max(rng):
    assert lambda_max(np.diag([2.0, 3.0])) == pytest.approx(3.0)
    v = rng.standard_normal(5)
    assert lambda_max(np.outer(v, v)) == pytest.approx(v @ v, rel=1e-12)
    X = rng.standard_normal((6, 6))
    M = X + X.T
    lam = lambda_max(M)
    w, V = np.linalg.eigh(M)
    vec = V[:, -1]
    assert np.linalg.norm(M @ vec - lam * vec) <= 1e-9 * np.linalg.norm(M)
    with pytest.raises(ValueError):
        lambda_max(X)


def test_scale_invariant_under_rotation(rng):
    sys = identity_system(2)
    L = rng.standard_normal((2, 2))
    psi = L @ L.T
    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    x0s = [np.zeros(2), np.ones(2)]
    a = CollisionSpec("pair", (0, 1), 1.0, np.eye(2), (1,), "alpha_r")
    b = CollisionSpec("pair", (0, 1), 1.0, R, (1,), "alpha_r")
    (ca,) = reform_collision_pair(a, sys, psi, 5.0, x0s)
    (cb,) = reform_collision_pair(b, sys, psi, 5.0, x0s)
    assert ca.g == pytest.approx(cb.g, rel=1e-12)


def test_scalar_target_probability_is_exact():
    # P(x0 + u + w <= b) with w ~ sigma t(nu) equals the t cdf at (b - x0 - u) / sigma
    sigma, nu, b = 0.5, 4.0, 1.0
    sys = identity_system(1)
    (c,) = reform_target(TargetSetSpec(0, 1, np.array([[1.0]]), np.array([b])),
                         sys, np.array([[sigma ** 2]]), nu, np.zeros(1))
    eta = 0.1
    u = b - c.g * quantile_numeric(StudentT(nu), 1 - eta)
    rng = np.random.Generator(np.random.Philox(5))
    w = sigma * rng.standard_t(nu, 200_000)
    ok = u + w <= b
    p = ok.mean()
    se = math.sqrt(p * (1 - p) / ok.size)
    assert abs(p - (1 - eta)) <= 3 * se


def test_collision_bound_is_conservative(rng):
    model = LtiModel(np.eye(4) + 0.1 * np.diag(np.ones(3), 1), np.eye(4)[:, :2])
    sys = concat(model, 2)
    S = position_selector(2, 4)
    L = rng.standard_normal((4, 4)) * 0.3
    sigma = L @ L.T + 0.05 * np.eye(4)
    psi = block_scale(sigma, 2)
    x0s = [np.array([2.0, 0.0, 0, 0]), np.array([-1.0, 1.0, 0, 0])]
    spec = CollisionSpec("pair", (0, 1), 1.5, S, (2,), "alpha_r")
    (c,) = reform_collision_pair(spec, sys, psi, 5.0, x0s)
    controls = [rng.standard_normal(4) * 0.2, rng.standard_normal(4) * 0.2]
    res = conservatism_audit(c, sys, psi, 5.0, S, controls, 20_000, seed=3)
    assert res.original >= res.surrogate_pathwise
    assert res.original >= res.surrogate_law - 3 * res.std_error
