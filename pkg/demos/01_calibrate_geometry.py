"""Fit the manipulator geometry to its data-sheet targets and cross-check.

The data sheet pins the home height and the vertical end-effector
stiffness; the effective radius offset dr and the platform-to-gimbal
offset z_off are the two free parameters. Everything else (lateral
stiffness, force capability, resolutions) then has to come out right on
its own.
"""

import math

import numpy as np

from cofloat import DeltaParams, calibrate, fk, jacobian, wrist_stiffness

L1, L2 = 0.200, 0.368
HOME = math.radians(36.6)
K_JOINT = 60.1

dr, z_off = calibrate(L1, L2, HOME, home_z=0.420, K_zz_target=2000.0,
                      k_joint=K_JOINT)
print(f"fitted geometry: dr = {dr:.6f} m, z_off = {z_off:.6f} m")

params = DeltaParams(L1=L1, L2=L2, dr=dr, z_off=z_off, home_theta=HOME)
home = np.full(3, HOME)
x = fk(home, params)
K = wrist_stiffness(home, K_JOINT, params)
J = jacobian(home, params)
step = 2 * math.pi / 2 ** 23

print(f"home position            ({x[0]:.4f}, {x[1]:.4f}, {x[2]:.4f}) m")
print(f"stiffness diagonal       ({K[0,0]:.0f}, {K[1,1]:.0f}, {K[2,2]:.0f}) N/m"
      f"   [targets 1400, 1400, 2000]")
print(f"max vertical force       {9.0 / J[2,0]:.1f} N at 9 N*m per joint"
      f"   [target 90 N]")
print(f"position resolution      {np.linalg.norm(J, 2) * step * 1e6:.2f} um"
      f"   [sheet: 0.3 um]")
print(f"force resolution         {K_JOINT * step / J[2,0] * 1e6:.0f} uN"
      f"   [sheet: 500 uN]")
