"""Aggregate three wrist stiffnesses into the payload-frame 6x6 stiffness.

Each wrist passes force but no torque, so its 6x6 has an empty rotational
block; held at the corners of a triangle the team still resists payload
rotation, purely through the moment arms.
"""

import numpy as np

from cofloat import Pose, aggregate_stiffness, linear_stiffness, wrist_stiffness
from cofloat.delta import default_params

params = default_params()
K3 = wrist_stiffness(np.full(3, params.home_theta), 60.1, params)
K6 = linear_stiffness(K3)

grasps = []
for ang in (0.0, 2 * np.pi / 3, 4 * np.pi / 3):
    attach = 0.8 * np.array([np.cos(ang), np.sin(ang), 0.0])
    grasps.append((K6, Pose(np.eye(3), -attach)))   # payload seen from the wrist

K = aggregate_stiffness(grasps)
np.set_printoptions(precision=1, suppress=True)
print("payload-frame stiffness (moment/rotation block first):")
print(K)
w = np.linalg.eigvalsh(K)
print("\neigenvalues:", np.round(w, 1))
print("-> translational stiffness ~%.0f N/m each axis," % K[3, 3],
      "rotational stiffness appears entirely from the grasp geometry")
