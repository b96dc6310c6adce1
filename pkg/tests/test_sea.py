import math

import numpy as np
import pytest

from cofloat.sea import (SeaJoint, SeaParams, SeaState, bandwidth_3db,
                         blocked_freq_response, blocked_step_response,
                         joint_torque, rise_time, step_sea)


@pytest.fixture(scope="module")
def params():
    return SeaParams()


def test_joint_torque_zero_deflection(params):
    assert joint_torque(SeaState(beta=0.2, theta=0.2), params) == 0.0


def test_joint_torque_linear_in_deflection(params):
    st = SeaState(beta=0.1, theta=0.0)
    assert joint_torque(st, params) == pytest.approx(6.01, rel=1e-12)
    # linearity by construction
    for d in (0.01, 0.05, -0.03):
        assert joint_torque(SeaState(beta=d), params) == pytest.approx(
            params.k * d, rel=1e-12)


def test_torque_quantization_step(params):
    step = 2.0 * math.pi / 2 ** 23
    assert params.torque_resolution == pytest.approx(params.k * 2 * step)
    assert params.torque_resolution == pytest.approx(9e-5, rel=0.05)
    assert params.k * step == pytest.approx(45e-6, rel=0.05)
    qp = SeaParams(quantize=True)
    st = SeaState(beta=0.4999 * step, theta=0.0)
    assert joint_torque(st, qp) == 0.0
    st = SeaState(beta=0.5001 * step, theta=0.0)
    assert joint_torque(st, qp) == pytest.approx(params.k * step, rel=1e-9)


def test_step_sea_equilibrium(params):
    st = SeaState()
    dt = 1.0 / params.physics_rate
    for _ in range(100):
        st = step_sea(st, 0.0, 0.0, dt, params)
    assert st.beta == 0.0
    assert st.beta_dot == 0.0


def test_step_sea_rejects_nan(params):
    with pytest.raises(FloatingPointError):
        step_sea(SeaState(), float("nan"), 0.0, 1 / 4000.0, params)


def test_blocked_step_settles_fast(params):
    settle, overshoot = blocked_step_response(params, 5.0)
    assert settle < 0.1
    assert overshoot < 0.5


def test_blocked_step_zero_command(params):
    assert blocked_step_response(params, 0.0) == (0.0, 0.0)


def test_unstable_gains_detected():
    with pytest.raises(ValueError, match="unstable torque loop"):
        blocked_step_response(SeaParams(kp=400.0, ki=0.0, kd=0.0), 5.0)


def test_kp_doubling_monotone_rise_time(params):
    times = [rise_time(SeaParams(kp=k, ki=params.ki, kd=params.kd), 5.0)
             for k in (1.25, 2.5, 5.0, 10.0)]
    assert all(a > b for a, b in zip(times, times[1:]))


def test_spring_energy_matches_work_integral(params):
    # trapezoidal work done by the motor torque on beta minus damping loss
    # accounts for kinetic plus spring energy
    joint = SeaJoint(params)
    dt = 1.0 / params.physics_rate
    work = 0.0
    dissipated = 0.0
    prev_bd = 0.0
    for _ in range(4000):
        st = joint.step(5.0, 0.0, dt)
        mid = 0.5 * (prev_bd + st.beta_dot)
        work += dt * st.tau_motor * mid
        dissipated += dt * params.motor_damping * mid * mid
        prev_bd = st.beta_dot
    stored = joint.spring_energy() + joint.kinetic_energy()
    assert stored > 0.1
    assert stored == pytest.approx(work - dissipated, rel=1e-4)


def test_freq_response_low_frequency_unity(params):
    (mag, phase), = blocked_freq_response(params, [1.0])
    assert abs(mag) < 0.5
    assert -15.0 < phase < 0.0


def test_freq_response_dc_exact(params):
    (mag, _), = blocked_freq_response(params, [0.0])
    assert mag == pytest.approx(0.0, abs=1e-9)


def test_bandwidth_in_published_interval(params):
    bw = bandwidth_3db(params)
    assert 20.0 <= bw <= 30.0


def test_freq_response_rejects_coarse_sampling(params):
    with pytest.raises(ValueError, match="fewer than 20 samples"):
        blocked_freq_response(params, [50.0])


def test_passivity_unpowered(params):
    # commanded torque zero with the controller off: spring + motor energy
    # can only decay
    quiet = SeaParams(kp=0.0, ki=0.0, kd=0.0)
    joint = SeaJoint(quiet, SeaState(beta=0.3))
    dt = 1.0 / quiet.physics_rate
    prev = joint.spring_energy() + joint.kinetic_energy()
    for _ in range(8000):
        joint.step(0.0, 0.0, dt)
        e = joint.spring_energy() + joint.kinetic_energy()
        assert e <= prev + 1e-12
        prev = e
    assert prev < 0.05


def test_motor_command_clamped():
    p = SeaParams(motor_tau_max=7.0)
    joint = SeaJoint(p)
    dt = 1.0 / p.physics_rate
    worst = 0.0
    for _ in range(2000):
        st = joint.step(9.0, 0.0, dt)
        worst = max(worst, abs(st.tau_motor))
    assert worst <= 7.0 + 1e-12


def test_command_clamped_to_continuous_rating(params):
    # tau_cmd far above tau_max settles at the rating, not above it
    joint = SeaJoint(params)
    dt = 1.0 / params.physics_rate
    for _ in range(int(0.5 * params.physics_rate)):
        st = joint.step(50.0, 0.0, dt)
    assert params.k * (st.beta - st.theta) == pytest.approx(
        params.tau_max, rel=1e-6)
