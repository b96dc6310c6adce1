"""Payload manipulability as the team grows, including the collinear
degenerate arrangement and an articulated payload."""

from cofloat import load_scenario, rank_report
from cofloat.scenario import format_rank_report

print("rigid 15.6 kg payload:")
print(format_rank_report(rank_report(load_scenario("pvc_float"))))
print()
print("hinged two-bar payload:")
print(format_rank_report(rank_report(load_scenario("hinged_two_humans"))))
print()
print("a rigid body needs rank 6; one hinge adds one internal freedom (7);")
print("collinear wrists cannot torque about their common line (drops to 5)")
