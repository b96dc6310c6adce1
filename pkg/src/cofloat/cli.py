"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 simulation fault.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import yaml

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAULT = 3


def _load_params_yaml(path: str, default_name: str) -> dict:
    from .scenario import ConfigError, preset_path
    if path == "default":
        path = preset_path(default_name)
    if not os.path.exists(path):
        cand = preset_path(path)
        if os.path.exists(cand):
            path = cand
        else:
            raise ConfigError(f"no such parameter file: {path}")
    with open(path) as f:
        d = yaml.safe_load(f)
    if not isinstance(d, dict):
        raise ConfigError("parameter file must be a mapping")
    return d


def cmd_run(args) -> int:
    from .scenario import ConfigError, load_scenario, run
    cfg = load_scenario(args.config)
    if args.serve:
        from .bridge import serve
        serve(cfg, port=args.port, out_dir=args.out, duration=args.duration)
        return EXIT_OK
    report = run(cfg, out_dir=args.out, duration=args.duration,
                 seed=args.seed, full_rate=args.full_rate or None)
    print(f"{report.name}: {'ok' if report.ok else 'FAULT: ' + str(report.fault)}")
    print(f"  sim time            {report.sim_time:.3f} s ({report.ticks} ticks)")
    print(f"  peak human force    {report.peak_human_force:.3f} N")
    print(f"  payload moved       {report.payload_displacement:.4f} m")
    print(f"  max residual        {report.max_pos_residual:.3e} m")
    print(f"  torque saturations  {report.torque_saturation_count}")
    if args.out:
        print(f"  telemetry           {args.out}/")
    return EXIT_OK if report.ok else EXIT_FAULT


def cmd_rank(args) -> int:
    from .scenario import format_rank_report, load_scenario, rank_report
    cfg = load_scenario(args.config)
    rows = rank_report(cfg)
    print(format_rank_report(rows))
    return EXIT_OK


def _sea_params(d):
    from .sea import SeaParams
    return SeaParams(
        k=d.get("k", 60.1), tau_max=d.get("tau_max", 9.0),
        motor_inertia=d.get("motor_inertia", 0.02),
        motor_damping=d.get("motor_damping", 0.05),
        kp=d.get("kp", 5.0), ki=d.get("ki", 150.0), kd=d.get("kd", 0.05),
        rate=d.get("rate_hz", 800.0),
        physics_rate=d.get("physics_hz", 4000.0),
        motor_tau_max=d.get("motor_tau_max", 40.0),
        encoder_bits=d.get("encoder_bits", 23),
        quantize=d.get("quantize", False))


def cmd_sea_step(args) -> int:
    from .sea import SeaJoint, blocked_step_response
    p = _sea_params(_load_params_yaml(args.params, "sea_default"))
    settle, overshoot = blocked_step_response(p, args.tau, args.duration)
    print(f"step {args.tau} N*m: settling (2% band) {settle * 1e3:.1f} ms, "
          f"overshoot {overshoot:.1%}")
    if args.out:
        joint = SeaJoint(p)
        dt = 1.0 / p.physics_rate
        n = int(round(args.duration * p.physics_rate))
        with open(args.out, "w") as f:
            f.write("t,command,estimate,beta,theta\n")
            for i in range(n):
                st = joint.step(args.tau, 0.0, dt)
                est = p.k * (st.beta - st.theta)
                f.write(f"{repr(i * dt)},{repr(float(args.tau))},"
                        f"{repr(float(est))},{repr(float(st.beta))},"
                        f"{repr(float(st.theta))}\n")
        print(f"trace written to {args.out}")
    return EXIT_OK


def cmd_sea_freq(args) -> int:
    from .sea import blocked_freq_response
    p = _sea_params(_load_params_yaml(args.params, "sea_default"))
    freqs = [float(x) for x in args.freqs.split(",")]
    rows = blocked_freq_response(p, freqs)
    print("freq_hz,magnitude_db,phase_deg")
    lines = []
    for f, (mag, ph) in zip(freqs, rows):
        line = f"{f},{mag:.4f},{ph:.3f}"
        lines.append(line)
        print(line)
    if args.out:
        with open(args.out, "w") as fo:
            fo.write("freq_hz,magnitude_db,phase_deg\n")
            fo.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    import numpy as np
    from .delta import DeltaParams, calibrate, fk, jacobian, wrist_stiffness
    d = _load_params_yaml(args.params, "calibrate_default")
    L1, L2 = d["L1"], d["L2"]
    home_theta = math.radians(d["home_theta_deg"])
    dr, z_off = calibrate(L1, L2, home_theta, d["home_z"], d["K_zz"],
                          d["k_joint"])
    params = DeltaParams(L1=L1, L2=L2, dr=dr, z_off=z_off,
                         home_theta=home_theta)
    th = np.full(3, home_theta)
    K = wrist_stiffness(th, d["k_joint"], params)
    J = jacobian(th, params)
    x = fk(th, params)
    print(f"dr      {dr:.6f} m")
    print(f"z_off   {z_off:.6f} m")
    print(f"home    ({x[0]:.4f}, {x[1]:.4f}, {x[2]:.4f}) m")
    print(f"K diag  ({K[0, 0]:.1f}, {K[1, 1]:.1f}, {K[2, 2]:.1f}) N/m")
    print(f"Fz max  {9.0 / J[2, 0]:.1f} N at 9 N*m per joint")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="cofloat",
        description="Cooperative payload-float simulator and controllers")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run a scenario to completion")
    p.add_argument("config", help="scenario file or preset name")
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--out", default=None, help="telemetry directory")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--full-rate", action="store_true",
                   help="log at the physics rate instead of 100 Hz")
    p.add_argument("--serve", action="store_true",
                   help="step in real time and serve the cockpit bridge")
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("COFLOAT_PORT", "8700")))
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("rank", help="payload manipulability report")
    p.add_argument("config")
    p.set_defaults(fn=cmd_rank)

    p = sub.add_parser("sea-step", help="blocked-joint torque step response")
    p.add_argument("params", help="SEA parameter file or 'default'")
    p.add_argument("--tau", type=float, default=5.0)
    p.add_argument("--duration", type=float, default=1.0)
    p.add_argument("--out", default=None, help="CSV trace path")
    p.set_defaults(fn=cmd_sea_step)

    p = sub.add_parser("sea-freq", help="blocked-joint frequency response")
    p.add_argument("params", help="SEA parameter file or 'default'")
    p.add_argument("--freqs", required=True,
                   help="comma-separated frequencies in Hz")
    p.add_argument("--out", default=None, help="CSV path")
    p.set_defaults(fn=cmd_sea_freq)

    p = sub.add_parser("calibrate", help="fit manipulator geometry to targets")
    p.add_argument("params", help="target file or 'default'")
    p.set_defaults(fn=cmd_calibrate)

    args = ap.parse_args(argv)
    from .multibody import SimulationFault
    from .scenario import ConfigError
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (SimulationFault, FloatingPointError) as e:
        print(f"simulation fault: {e}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
