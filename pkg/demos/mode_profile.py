"""Solve the HE11 mode of the default nanofiber and look at its evanescent tail.

    python3 demos/mode_profile.py
"""

import numpy as np

from nanofiber.fiber_mode import FiberSpec, evanescent_power_fraction, intensity_profile, solve_he11

mode = solve_he11(FiberSpec())
a = mode.fiber.radius
print(f"V = {mode.v_number:.4f}  n_eff = {mode.effective_index:.6f}  1/q = {mode.decay_length * 1e9:.1f} nm")

# intensity per nanowatt of guided power, stepping away from the surface
for d in (0, 50, 100, 200, 370, 500):
    i = intensity_profile(mode, 1e-9, a + d * 1e-9)
    print(f"  r - a = {d:4d} nm   I = {float(i):9.2f} W/m^2")

# how much of the exterior power sits close to the glass
for d in (100e-9, 370e-9, 1e-6):
    print(f"  evanescent power within {d * 1e9:5.0f} nm: {evanescent_power_fraction(mode, d):.3f}")
