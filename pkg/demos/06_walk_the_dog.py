"""One robot, no payload: gravity compensation plus base recentering lets
a 2 N push walk the whole robot across the floor."""

import csv
import io

import numpy as np

from cofloat import load_scenario, run

rep = run(load_scenario("walk_the_dog"))
rows = list(csv.DictReader(io.StringIO(rep.telemetry["robots.csv"])))
t = np.array([float(r["t"]) for r in rows])
x = np.array([float(r["base_x"]) for r in rows])
v = np.array([float(r["tw_vx"]) for r in rows])
print(f"push phase: base cruises at {v[np.searchsorted(t, 6.0)]:.2f} m/s "
      f"under a 2 N fingertip push")
print(f"total travel: {x[np.searchsorted(t, 8.0)]:.1f} m")
print(f"2 s after release the base speed is "
      f"{abs(v[np.searchsorted(t, 10.0):]).max()*1e3:.1f} mm/s")
