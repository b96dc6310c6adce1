"""Deterministic simulator and controllers for teams of omnidirectional
cobots with series-elastic delta arms that render shared payloads
weightless for human co-manipulation."""

__version__ = "0.1.0"

from .delta import DeltaParams, calibrate, default_params, fk, ik, jacobian, wrist_stiffness, workspace_clearance
from .manip_ctrl import (FloatController, FloatState, ManipModel, Mode,
                         TeamGeometry, boundary_restoring, float_command,
                         approx_float_command, gravity_comp_force,
                         payload_share_force, startup_calibration)
from .mobase import BaseParams, BaseState, recentering_twist, step_base, twist_from_wheels, wheel_speeds
from .multibody import (Hinge, PayloadBody, PayloadModel, RobotSpec,
                        SimulationFault, SystemMatrices, SystemState, World,
                        assemble, constrained_accel, control_map,
                        gimbal_angles, manipulability, step)
from .scenario import (ConfigError, RunReport, ScenarioConfig, WrenchProfile,
                       build_world, human_wrench, load_scenario, rank_report,
                       run)
from .sea import SeaJoint, SeaParams, SeaState, blocked_freq_response, blocked_step_response, joint_torque, step_sea
from .spatial import Pose, Wrench, adjoint, aggregate_stiffness, linear_stiffness, transform_stiffness
