import numpy as np
import pytest
import scipy.linalg

from cofloat.spatial import (Pose, Wrench, adjoint, aggregate_stiffness,
                             linear_stiffness, skew, transform_stiffness)
from cofloat.delta import default_params, wrist_stiffness

from conftest import random_pose, random_rotation


def test_adjoint_identity():
    assert np.allclose(adjoint(Pose()), np.eye(6))


def test_adjoint_pure_rotation_is_block_diagonal():
    rng = np.random.default_rng(1)
    R = random_rotation(rng)
    ad = adjoint(Pose(R, np.zeros(3)))
    assert np.allclose(ad[:3, :3], R)
    assert np.allclose(ad[3:, 3:], R)
    assert np.allclose(ad[3:, :3], 0.0)
    assert np.allclose(ad[:3, 3:], 0.0)


def test_adjoint_translation_block():
    ad = adjoint(Pose(np.eye(3), np.array([1.0, 0.0, 0.0])))
    assert np.allclose(ad[3:, :3], skew([1.0, 0.0, 0.0]))


def test_adjoint_composition_rule():
    rng = np.random.default_rng(2)
    for _ in range(100):
        T1, T2 = random_pose(rng), random_pose(rng)
        lhs = adjoint(T1 @ T2)
        rhs = adjoint(T1) @ adjoint(T2)
        assert np.abs(lhs - rhs).max() < 1e-12


def test_adjoint_inverse_property():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        T = random_pose(rng)
        err = np.abs(adjoint(T.inverse()) - np.linalg.inv(adjoint(T))).max()
        worst = max(worst, err)
    assert worst < 1e-9


def test_pose_composition_associative():
    rng = np.random.default_rng(4)
    A, B, C = (random_pose(rng) for _ in range(3))
    P = (A @ B) @ C
    Q = A @ (B @ C)
    assert np.allclose(P.rotation, Q.rotation)
    assert np.allclose(P.translation, Q.translation)


def test_wrench_frame_mismatch_raises():
    a = Wrench(np.zeros(3), np.ones(3), frame="a")
    b = Wrench(np.zeros(3), np.ones(3), frame="b")
    with pytest.raises(ValueError, match="frame"):
        a + b
    c = a + Wrench(np.ones(3), np.zeros(3), frame="a")
    assert np.allclose(c.force, 1.0)
    assert np.allclose(c.moment, 1.0)


def test_transform_stiffness_identity():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(6, 6))
    K = A @ A.T
    assert np.allclose(transform_stiffness(K, Pose()), K)


def test_transform_stiffness_translation_couples_rotation():
    # pure linear stiffness k about a point offset d along x: rotating the
    # payload about y or z stretches the spring, rotational stiffness k d^2
    k, d = 1000.0, 0.3
    K = linear_stiffness(np.diag([k, k, k]))
    T = Pose(np.eye(3), np.array([d, 0.0, 0.0]))
    Kp = transform_stiffness(K, T)
    assert Kp[1, 1] == pytest.approx(k * d * d, rel=1e-12)
    assert Kp[2, 2] == pytest.approx(k * d * d, rel=1e-12)
    assert Kp[0, 0] == pytest.approx(0.0, abs=1e-9)


def test_transform_preserves_eigenvalue_signs():
    rng = np.random.default_rng(6)
    for _ in range(20):
        A = rng.normal(size=(6, 6))
        K = A @ A.T          # strictly positive definite
        T = random_pose(rng)
        w = np.linalg.eigvalsh(transform_stiffness(K, T))
        assert np.all(w > 0.0)


def _line_energy(K_list, T_list, dX):
    """Total elastic energy for a finite payload displacement dX (exp coords).

    Independent of the adjoint code path: each end-effector displacement is
    recovered with a matrix log of the conjugated transform.
    """
    Xi = np.zeros((4, 4))
    Xi[:3, :3] = skew(dX[:3])
    Xi[:3, 3] = dX[3:]
    E = scipy.linalg.expm(Xi)
    total = 0.0
    for K_i, T_ip in zip(K_list, T_list):
        M = np.eye(4)
        M[:3, :3] = T_ip.rotation
        M[:3, 3] = T_ip.translation
        conj = M @ E @ np.linalg.inv(M)
        L = scipy.linalg.logm(conj)
        dXi = np.concatenate(([L[2, 1], L[0, 2], L[1, 0]], L[:3, 3]))
        total += 0.5 * dXi @ K_i @ dXi
    return total.real


def _fd_hessian(f, n=6, h=1e-4):
    H = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            fpp = f(ei + ej)
            fpm = f(ei - ej)
            fmp = f(-ei + ej)
            fmm = f(-ei - ej)
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4 * h * h)
    return H


def test_aggregate_single_identity_grasp():
    rng = np.random.default_rng(7)
    A = rng.normal(size=(6, 6))
    K = A @ A.T
    assert np.allclose(aggregate_stiffness([(K, Pose())]), K)


def test_aggregate_empty_raises():
    with pytest.raises(ValueError, match="no grasps"):
        aggregate_stiffness([])


def test_aggregate_symmetric_pair_cancels_coupling():
    k = 800.0
    K = linear_stiffness(np.diag([k, k, k]))
    d = 0.4
    Tp = Pose(np.eye(3), np.array([d, 0.0, 0.0]))
    Tm = Pose(np.eye(3), np.array([-d, 0.0, 0.0]))
    Kt = aggregate_stiffness([(K, Tp), (K, Tm)])
    # odd (rotation-translation) coupling blocks cancel by symmetry
    assert np.abs(Kt[:3, 3:]).max() < 1e-9


def test_aggregate_permutation_invariant_and_additive():
    rng = np.random.default_rng(8)
    grasps = []
    for _ in range(3):
        A = rng.normal(size=(6, 6))
        grasps.append((A @ A.T, random_pose(rng)))
    K1 = aggregate_stiffness(grasps)
    K2 = aggregate_stiffness(grasps[::-1])
    assert np.allclose(K1, K2)
    parts = sum(aggregate_stiffness([g]) for g in grasps)
    assert np.allclose(K1, parts)


def test_aggregate_matches_energy_hessian_for_home_team():
    # three wrist stiffnesses at the vertices of an equilateral triangle,
    # embedded with zero rotational block (the wrist passes no torque)
    params = default_params()
    K3 = wrist_stiffness(np.full(3, params.home_theta), 60.1, params)
    K6 = linear_stiffness(K3)
    T_list = []
    for ang in (0.0, 2.0 * np.pi / 3.0, 4.0 * np.pi / 3.0):
        p = 0.8 * np.array([np.cos(ang), np.sin(ang), 0.0])
        # payload frame seen from the end-effector frame
        T_list.append(Pose(np.eye(3), -p))
    K_list = [K6] * 3
    K = aggregate_stiffness(list(zip(K_list, T_list)))
    H = _fd_hessian(lambda dx: _line_energy(K_list, T_list, dx))
    scale = np.abs(K).max()
    assert np.abs(H - K).max() / scale < 1e-6
