"""Series-elastic joint: spring torque sensing and the 800 Hz torque loop.

The motor, gearhead and belt stages are lumped into a single reflected
inertia with viscous damping on the joint side of the transmission.  Joint
torque is the spring deflection times the spring constant; the PID loop
drives that estimate to the commanded torque.  The plant parameters and
gains are fit to the published closed-loop step/frequency behavior, not
measured hardware values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

TWO_PI = 2.0 * math.pi
ENCODER_STEP_BITS = 23  # absolute encoders on both sides of the spring


@dataclass
class SeaParams:
    """Spring, motor and torque-loop configuration for one joint."""

    k: float = 60.1                 # spring stiffness, N*m/rad
    tau_max: float = 9.0            # continuous torque command limit, N*m
    motor_inertia: float = 0.02     # reflected inertia at joint side, kg*m^2
    motor_damping: float = 0.05     # viscous coefficient, N*m*s/rad
    kp: float = 5.0
    ki: float = 150.0
    kd: float = 0.05
    rate: float = 800.0             # torque-loop rate, Hz
    physics_rate: float = 4000.0    # inner integration rate, Hz
    motor_tau_max: float = 40.0     # saturation of the raw motor command
    encoder_bits: int = ENCODER_STEP_BITS
    quantize: bool = False          # encoder quantization stage, off by default

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("spring stiffness must be positive")
        if self.physics_rate % self.rate != 0:
            raise ValueError("physics rate must be a multiple of the loop rate")

    @property
    def encoder_step(self) -> float:
        return TWO_PI / (1 << self.encoder_bits)

    @property
    def torque_resolution(self) -> float:
        """Smallest resolvable torque change with both encoders moving."""
        return self.k * 2.0 * self.encoder_step


@dataclass
class SeaState:
    """Motor angle/velocity, joint angle and controller memory."""

    beta: float = 0.0
    beta_dot: float = 0.0
    theta: float = 0.0
    integ: float = 0.0
    tau_motor: float = 0.0
    prev_est: float = 0.0
    tick: int = 0


def joint_torque(state: SeaState, params: SeaParams) -> float:
    """Estimated joint torque k*(beta - theta), optionally quantized."""
    if params.quantize:
        step = params.encoder_step
        beta = round(state.beta / step) * step
        theta = round(state.theta / step) * step
        return params.k * (beta - theta)
    return params.k * (state.beta - state.theta)


def pid_motor_torque(state: SeaState, tau_cmd: float, params: SeaParams) -> SeaState:
    """One torque-loop update: PID on torque error, derivative on measurement.

    The integral state is clamped so its contribution alone cannot exceed
    the motor saturation (anti-windup), and the final command is clamped to
    +-motor_tau_max.
    """
    dt = 1.0 / params.rate
    est = joint_torque(state, params)
    err = tau_cmd - est
    integ = state.integ + err * dt
    if params.ki > 0.0:
        lim = params.motor_tau_max / params.ki
        integ = min(max(integ, -lim), lim)
    d_meas = (est - state.prev_est) / dt
    tau_m = params.kp * err + params.ki * integ - params.kd * d_meas
    tau_m = min(max(tau_m, -params.motor_tau_max), params.motor_tau_max)
    return replace(state, integ=integ, tau_motor=tau_m, prev_est=est)


def step_sea(
    state: SeaState,
    tau_cmd: float,
    theta_external: float,
    dt: float,
    params: SeaParams,
) -> SeaState:
    """Advance one physics step of dt = 1/physics_rate.

    tau_cmd is clamped to the continuous rating.  The torque loop fires on
    the ticks that land on its own (slower) rate; between updates the motor
    command is held.  theta_external is the joint angle produced by the
    outer multibody solve (or a blocked fixture).  The motor side is
    integrated semi-implicitly (velocity first).
    """
    if not (
        math.isfinite(tau_cmd)
        and math.isfinite(theta_external)
        and math.isfinite(state.beta)
        and math.isfinite(state.beta_dot)
    ):
        raise FloatingPointError("sea fault: non-finite input")
    p = params
    tau_cmd = min(max(tau_cmd, -p.tau_max), p.tau_max)
    s = replace(state, theta=theta_external)
    if s.tick % int(round(p.physics_rate / p.rate)) == 0:
        s = pid_motor_torque(s, tau_cmd, p)
    spring = p.k * (s.beta - s.theta)
    acc = (s.tau_motor - p.motor_damping * s.beta_dot - spring) / p.motor_inertia
    beta_dot = s.beta_dot + dt * acc
    beta = s.beta + dt * beta_dot
    return replace(s, beta=beta, beta_dot=beta_dot, tick=s.tick + 1)


class SeaJoint:
    """A single joint stepped against an externally supplied theta."""

    def __init__(self, params: SeaParams, state: SeaState | None = None):
        self.params = params
        self.state = state if state is not None else SeaState()

    def step(self, tau_cmd: float, theta_external: float, dt: float) -> SeaState:
        self.state = step_sea(self.state, tau_cmd, theta_external, dt, self.params)
        return self.state

    def spring_energy(self) -> float:
        d = self.state.beta - self.state.theta
        return 0.5 * self.params.k * d * d

    def kinetic_energy(self) -> float:
        return 0.5 * self.params.motor_inertia * self.state.beta_dot ** 2


def _simulate_blocked(params: SeaParams, tau_cmd_fn, duration: float):
    """Run a blocked-joint (theta = 0) simulation, sampling every step."""
    dt = 1.0 / params.physics_rate
    n = int(round(duration * params.physics_rate))
    joint = SeaJoint(params)
    t = np.arange(n) * dt
    cmd = np.empty(n)
    est = np.empty(n)
    for i in range(n):
        c = tau_cmd_fn(t[i])
        st = joint.step(c, 0.0, dt)
        cmd[i] = c
        est[i] = params.k * (st.beta - st.theta)
    return t, cmd, est


def blocked_step_response(
    params: SeaParams, tau_step: float, duration: float = 1.0
) -> tuple[float, float]:
    """Settling time (2 percent band, s) and overshoot fraction of a step.

    Raises if the loop diverges (amplitude growing past a sane multiple of
    the command).
    """
    if tau_step == 0.0:
        return 0.0, 0.0
    t, _, est = _simulate_blocked(params, lambda _: tau_step, duration)
    if np.abs(est).max() > 10.0 * abs(tau_step) or not np.isfinite(est).all():
        raise ValueError("unstable torque loop")
    final = tau_step
    band = 0.02 * abs(final)
    outside = np.nonzero(np.abs(est - final) > band)[0]
    settle = 0.0 if outside.size == 0 else float(t[outside[-1] + 1]) if outside[-1] + 1 < t.size else float("inf")
    if not math.isfinite(settle):
        raise ValueError("unstable torque loop")
    overshoot = max(0.0, (est.max() if tau_step > 0 else -est.min()) / abs(final) - 1.0)
    return settle, overshoot


def rise_time(params: SeaParams, tau_step: float, duration: float = 1.0) -> float:
    """10-90 percent rise time of the blocked step response."""
    t, _, est = _simulate_blocked(params, lambda _: tau_step, duration)
    sig = est / tau_step
    i10 = int(np.argmax(sig >= 0.1))
    i90 = int(np.argmax(sig >= 0.9))
    return float(t[i90] - t[i10])


def blocked_freq_response(
    params: SeaParams,
    freqs,
    amplitude: float = 1.0,
    offset: float = 5.0,
    discard_cycles: int = 10,
    measure_cycles: int = 10,
) -> list[tuple[float, float]]:
    """Magnitude (dB) and phase (deg) of the blocked torque loop.

    Drives tau_cmd = offset + amplitude*sin(2 pi f t) and extracts the
    response at the excitation frequency by single-bin correlation over an
    integer number of cycles, after discarding the settling cycles.  A
    frequency of 0 returns the DC operating point check (0 dB by integral
    action).
    """
    out = []
    for f in freqs:
        if f == 0.0:
            t, _, est = _simulate_blocked(params, lambda _: offset, 1.0)
            mag = est[-1] / offset if offset else 1.0
            out.append((20.0 * math.log10(abs(mag)), 0.0))
            continue
        if params.rate / f < 20.0:
            raise ValueError(
                f"dt too coarse for {f} Hz: fewer than 20 samples per cycle"
            )
        duration = (discard_cycles + measure_cycles) / f
        t, _, est = _simulate_blocked(
            params, lambda tt: offset + amplitude * math.sin(TWO_PI * f * tt), duration
        )
        n_meas = int(round(measure_cycles / f * params.physics_rate))
        tm = t[-n_meas:]
        ym = est[-n_meas:] - np.mean(est[-n_meas:])
        s = math.fsum(ym * np.sin(TWO_PI * f * tm)) * 2.0 / n_meas
        c = math.fsum(ym * np.cos(TWO_PI * f * tm)) * 2.0 / n_meas
        amp = math.hypot(s, c)
        phase = math.degrees(math.atan2(c, s))
        out.append((20.0 * math.log10(amp / amplitude), phase))
    return out


def bandwidth_3db(params: SeaParams, f_lo: float = 5.0, f_hi: float = 40.0) -> float:
    """First -3 dB crossing of the blocked frequency response, by bisection."""

    def mag(f):
        return blocked_freq_response(params, [f])[0][0]

    lo, hi = f_lo, f_hi
    if mag(lo) < -3.0 or mag(hi) > -3.0:
        raise ValueError("no -3 dB crossing in the probed range")
    for _ in range(24):
        mid = 0.5 * (lo + hi)
        if mag(mid) > -3.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
