"""Approximate float mode: drag the payload down to a new set height.

Pushing one wrist down beyond the drag threshold re-anchors its set
height; releasing leaves the payload floating at the new level, like
dragging an object across a surface with a spring.
"""

import numpy as np

from cofloat.delta import fk
from cofloat.scenario import (ScenarioConfig, _canonical, attach_humans,
                              build_world, commission)

cfg = ScenarioConfig(_canonical({
    "name": "drag_demo",
    "duration": 14.0,
    "robots": [
        {"base_pose": [0.55, 0.05, 0.0], "mode": "approx_float"},
        {"base_pose": [-0.5, 0.4, 0.0], "mode": "approx_float"},
        {"base_pose": [-0.3, -0.5, 0.0], "mode": "approx_float"},
    ],
    "payload": {
        "bodies": [{"mass": 12.0, "inertia": [0.8, 0.8, 1.2]}],
        "attachments": [
            {"robot": 0, "body": 0, "point": [0.55, 0.05, 0.0]},
            {"robot": 1, "body": 0, "point": [-0.5, 0.4, 0.0]},
            {"robot": 2, "body": 0, "point": [-0.3, -0.5, 0.0]},
        ],
        "grips": {"push": {"body": 0, "point": [0.55, 0.05, 0.0]}},
        "initial_poses": [{"position": [0.0, 0.0, 0.42]}],
    },
    "humans": [{"grip": "push", "profile": {"kind": "piecewise", "points": [
        [0.0, 0, 0, 0, 0, 0, 0], [2.0, 0, 0, 0, 0, 0, 0],
        [5.0, 0, 0, -30.0, 0, 0, 0], [5.5, 0, 0, 0, 0, 0, 0],
        [14.0, 0, 0, 0, 0, 0, 0]]}}],
}))

world = build_world(cfg)
attach_humans(world, cfg)
commission(world, cfg)
print("pushing wrist 0 down with up to 30 N...")
for k in range(int(14.0 * world.physics_hz)):
    world.step()
    if k % 8000 == 7999:
        z = fk(world.robots[0].theta, world.robots[0].spec.delta,
               check_limits=False)[2]
        z0 = world.robots[0].controller.state.z0
        print(f"  t={world.t:5.1f} s   wrist z={z:.3f} m   set height z0={z0:.3f} m")
events = [e for e in world.events if e["kind"] == "reanchored"]
print(f"re-anchor episodes: {len(events)} (the push); the payload now floats "
      f"{0.42 - world.robots[0].controller.state.z0:.3f} m lower")
