"""Blocked-joint behavior of the series-elastic torque loop.

Reproduces the published closed-loop behavior: a 5 N*m step settles within
a tenth of a second and the small-signal bandwidth sits between 20 and
30 Hz.
"""

import numpy as np

from cofloat import SeaParams, blocked_freq_response, blocked_step_response
from cofloat.sea import bandwidth_3db

params = SeaParams()
settle, overshoot = blocked_step_response(params, 5.0)
print(f"5 N*m step: settles (2% band) in {settle*1e3:.0f} ms, "
      f"overshoot {overshoot:.0%}")

freqs = [0.5, 1, 2, 5, 10, 15, 20, 25, 30, 35, 40]
rows = blocked_freq_response(params, freqs)
print("\n  f (Hz)   mag (dB)   phase (deg)")
for f, (mag, ph) in zip(freqs, rows):
    print(f"  {f:6.1f}   {mag:+7.2f}    {ph:+8.1f}")
print(f"\n-3 dB bandwidth: {bandwidth_3db(params):.1f} Hz  [published: 20-30 Hz]")
