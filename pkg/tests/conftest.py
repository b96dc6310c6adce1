import math

import numpy as np
import pytest

from cofloat.delta import DeltaParams, default_params
from cofloat.manip_ctrl import ManipModel, Mode, TeamGeometry, startup_calibration
from cofloat.mobase import BaseParams
from cofloat.multibody import PayloadBody, PayloadModel, RobotSpec, World
from cofloat.sea import SeaParams
from cofloat.spatial import Pose


def triangle_points(radius=0.8, n=3):
    return [np.array([radius * math.cos(2 * math.pi * i / n + math.pi / 2),
                      radius * math.sin(2 * math.pi * i / n + math.pi / 2),
                      0.0]) for i in range(n)]


def make_team_world(n_robots=3, mass=15.6, inertia=(1.0, 1.0, 1.8),
                    radius=0.8, points=None, gravity=9.81, **world_kw):
    """A rigid payload held by n robots at its COM height, in equilibrium."""
    dp = default_params()
    home_z = dp.home_position[2]
    pm = PayloadModel([PayloadBody(mass, np.diag(inertia))])
    poses = [Pose(np.eye(3), np.array([0.0, 0.0, home_z]))]
    pts = points if points is not None else triangle_points(radius, n_robots)
    specs = []
    for i in range(n_robots):
        a = np.asarray(pts[i], dtype=float)
        pm.attachments.append((i, 0, a))
        specs.append(RobotSpec(
            delta=dp, sea=SeaParams(), manip=ManipModel(delta=dp),
            base=BaseParams(), base_pose=np.array([a[0], a[1], 0.0])))
    return World(specs, pm, payload_poses=poses, gravity=gravity, **world_kw)


def activate_float(world, mode=Mode.FLOAT, hold_s=0.6):
    """Startup hold, calibration and mode engagement for every robot."""
    if hold_s:
        world.run(hold_s)
    snap = world.system_state()
    states = [startup_calibration(snap, i, r.spec.manip, r.spec.sea.k)
              for i, r in enumerate(world.robots)]
    attached = [i for i, r in enumerate(world.robots) if r.attach is not None]
    team = None
    if attached:
        offsets = np.stack([world.robots[i].attach[1] for i in attached])
        f0 = np.stack([states[i].f_pay_nominal for i in attached])
        team = TeamGeometry(offsets=offsets, f0=f0, weight=f0.sum(axis=0))
    for i, (r, s) in enumerate(zip(world.robots, states)):
        s.mode = mode
        r.controller.state = s
        if team is not None and r.attach is not None:
            r.controller.team = team
            r.controller.index = attached.index(i)
        r.hold_tau = None
    return team


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def random_pose(rng, scale=1.0):
    return Pose(random_rotation(rng), rng.normal(scale=scale, size=3))
