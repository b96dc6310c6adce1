import math

import numpy as np
import pytest

from cofloat.delta import (CAL_DR, CAL_Z_OFF, DeltaParams, calibrate,
                           default_params, fk, ik, jacobian,
                           workspace_clearance, wrist_stiffness)

K_JOINT = 60.1
HOME_DEG = 36.6


@pytest.fixture(scope="module")
def params():
    return default_params()


@pytest.fixture(scope="module")
def home(params):
    return np.full(3, params.home_theta)


def test_calibrate_reproduces_frozen_defaults():
    dr, z_off = calibrate(0.200, 0.368, math.radians(HOME_DEG), 0.420,
                          2000.0, K_JOINT)
    assert dr == pytest.approx(CAL_DR, abs=1e-12)
    assert z_off == pytest.approx(CAL_Z_OFF, abs=1e-12)
    # in the ranges the bisection was expected to land in
    assert 0.10 < dr < 0.14
    assert 0.04 < z_off < 0.08


def test_calibrate_infeasible_targets():
    with pytest.raises(ValueError, match="calibration infeasible"):
        calibrate(0.200, 0.368, math.radians(HOME_DEG), 0.420, 1e9, K_JOINT)


def test_fk_home_position(params, home):
    x = fk(home, params)
    assert np.allclose(x, [0.0, 0.0, 0.420], atol=1e-12)


def test_fk_symmetric_theta_on_axis(params):
    for ang_deg in (10.0, 25.0, 50.0, 70.0):
        x = fk(np.full(3, math.radians(ang_deg)), params)
        assert abs(x[0]) < 1e-12 and abs(x[1]) < 1e-12


def test_fk_rejects_unreachable():
    # the shipped geometry always intersects within its limits; a wider
    # base circle with short distal links cannot close for spread elbows
    wide = DeltaParams(L1=0.30, L2=0.32, dr=0.28, theta_min=-2.0,
                       theta_max=3.0, home_theta=0.5)
    with pytest.raises(ValueError, match="unreachable|singular"):
        fk(np.array([0.0, -1.5, 2.8]), wide, check_limits=False)


def test_fk_limits_enforced(params):
    with pytest.raises(ValueError, match="joint limit"):
        fk(np.full(3, params.theta_max + 0.1), params)


def test_ik_home(params):
    th = ik(np.array([0.0, 0.0, 0.420]), params)
    assert np.allclose(np.degrees(th), HOME_DEG, atol=1e-9)


def test_ik_axis_points_symmetric(params):
    th = ik(np.array([0.0, 0.0, 0.35]), params)
    assert np.allclose(th, th[0])


def test_ik_out_of_reach(params):
    with pytest.raises(ValueError, match="unreachable"):
        ik(np.array([1.5, 0.0, 0.42]), params)


def test_ik_limit_violation(params):
    # bottom-outer rim of the sphere exceeds the -15 deg proximal limit
    with pytest.raises(ValueError, match="joint limit"):
        ik(params.home_position + np.array([-0.044, -0.077, -0.121]), params)


def test_round_trip_over_workspace(params):
    rng = np.random.default_rng(11)
    home_x = params.home_position
    worst_pos = 0.0
    worst_ang = 0.0
    for _ in range(1000):
        v = rng.normal(size=3)
        v *= rng.uniform(0.0, params.workspace_radius) / np.linalg.norm(v)
        x = home_x + v
        # kinematic closure over the whole sphere; the sphere's lower rim
        # pokes ~1 deg past the proximal limit for this geometry, so the
        # limit check is exercised separately
        th = ik(x, params, check_limits=False)
        worst_pos = max(worst_pos, float(np.abs(
            fk(th, params, check_limits=False) - x).max()))
        x2 = fk(th, params, check_limits=False)
        th2 = ik(x2, params, check_limits=False)
        worst_ang = max(worst_ang, float(np.abs(th2 - th).max()))
    assert worst_pos < 1e-9
    assert worst_ang < 1e-9


def _fd_jacobian(theta, params, h=1e-6):
    J = np.zeros((3, 3))
    for i in range(3):
        dp = theta.copy()
        dm = theta.copy()
        dp[i] += h
        dm[i] -= h
        J[:, i] = (fk(dp, params, check_limits=False)
                   - fk(dm, params, check_limits=False)) / (2 * h)
    return J


def test_jacobian_matches_finite_differences(params):
    rng = np.random.default_rng(12)
    home_x = params.home_position
    for _ in range(50):
        v = rng.normal(size=3)
        v *= rng.uniform(0.0, params.workspace_radius) / np.linalg.norm(v)
        th = ik(home_x + v, params)
        J = jacobian(th, params)
        J_fd = _fd_jacobian(th, params)
        assert np.abs(J - J_fd).max() < 1e-6
        assert np.abs(J - J_fd).max() / np.abs(J).max() < 1e-5


def test_jacobian_home_symmetry(params, home):
    J = jacobian(home, params)
    norms = np.linalg.norm(J, axis=0)
    assert np.allclose(norms, norms[0], rtol=1e-12)
    # cyclic leg permutation composed with a 120 degree rotation about z
    c, s = math.cos(2 * math.pi / 3), math.sin(2 * math.pi / 3)
    Rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    P = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    assert np.abs(Rz @ J - J @ P).max() < 1e-12


def test_jacobian_home_vertical_gain(params, home):
    # 9 Nm per joint supporting 90 N implies dz/dtheta ~ 0.1001 m/rad
    J = jacobian(home, params)
    assert np.allclose(J[2, :], 0.1001, atol=2e-4)
    assert 3 * 9.0 / (3 * J[2, 0]) == pytest.approx(90.0, rel=0.05)


def test_wrist_stiffness_home_diagonal(params, home):
    K = wrist_stiffness(home, K_JOINT, params)
    assert K[2, 2] == pytest.approx(2000.0, rel=1e-6)   # fitted
    assert K[0, 0] == pytest.approx(1400.0, rel=0.05)   # cross-validated
    assert K[1, 1] == pytest.approx(1400.0, rel=0.05)
    assert np.abs(K - K.T).max() / np.abs(K).max() < 1e-9


def test_wrist_stiffness_matches_energy_oracle(params):
    # energy of constrained joint springs under a prescribed wrist
    # displacement: E(dx) = 0.5 k |ik(x+dx) - ik(x)|^2, Hessian equals K
    rng = np.random.default_rng(13)
    x0 = params.home_position + np.array([0.03, -0.02, -0.04])
    th0 = ik(x0, params)

    def energy(dx):
        dth = ik(x0 + dx, params) - th0
        return 0.5 * K_JOINT * float(dth @ dth)

    h = 1e-5
    H = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            ei = np.zeros(3)
            ej = np.zeros(3)
            ei[i] = h
            ej[j] = h
            H[i, j] = (energy(ei + ej) - energy(ei - ej)
                       - energy(-ei + ej) + energy(-ei - ej)) / (4 * h * h)
    K = wrist_stiffness(ik(x0, params), K_JOINT, params)
    assert np.abs(H - K).max() / np.abs(K).max() < 1e-4


def test_wrist_stiffness_positive_definite_in_workspace(params):
    rng = np.random.default_rng(14)
    home_x = params.home_position
    for _ in range(200):
        v = rng.normal(size=3)
        v *= rng.uniform(0.0, params.workspace_radius) / np.linalg.norm(v)
        th = ik(home_x + v, params)
        w = np.linalg.eigvalsh(wrist_stiffness(th, K_JOINT, params))
        assert w.min() > 0.0


def test_workspace_clearance(params):
    home_x = params.home_position
    assert workspace_clearance(home_x, params) == pytest.approx(0.15)
    edge = home_x + np.array([0.15, 0.0, 0.0])
    assert workspace_clearance(edge, params) == pytest.approx(0.0, abs=1e-12)
    inside = home_x + np.array([0.0, 0.14, 0.0])
    assert workspace_clearance(inside, params) == pytest.approx(0.01)
    outside = home_x + np.array([0.0, 0.0, -0.2])
    assert workspace_clearance(outside, params) == pytest.approx(-0.05)


def test_resolution_figures_within_factor_two(params, home):
    J = jacobian(home, params)
    step = 2.0 * math.pi / 2 ** 23
    pos_res = np.linalg.norm(J, 2) * step
    assert 0.5 < 0.3e-6 / pos_res < 2.0
    torque_res = K_JOINT * step          # one encoder step of deflection
    assert torque_res == pytest.approx(45e-6, rel=0.02)
    force_res = torque_res / J[2, 0]
    assert 0.5 < 500e-6 / force_res < 2.0


def test_param_validation():
    with pytest.raises(ValueError):
        DeltaParams(L1=-1.0)
    with pytest.raises(ValueError):
        DeltaParams(dr=0.5)          # |dr| >= L2
    with pytest.raises(ValueError):
        DeltaParams(home_theta=math.radians(120.0))
