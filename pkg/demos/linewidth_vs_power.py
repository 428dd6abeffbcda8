"""Linewidth of the full and the reduced model against probe power.

The reduced model power-broadens like a free atom.  In the full model the
dipole force and surface losses empty the region of strongest saturation,
so the line stays much narrower at high power.  Writes linewidth.csv.

    python3 demos/linewidth_vs_power.py [n_trajectories]
"""

import csv
import sys

import numpy as np

from nanofiber.fiber_mode import FiberSpec, solve_he11
from nanofiber.light_atom import Physics
from nanofiber.spectroscopy import linewidth_sweep
from nanofiber.trajectory_mc import CloudSpec, McConfig

n = int(sys.argv[1]) if len(sys.argv) > 1 else 5_000
physics = Physics(solve_he11(FiberSpec()))
powers = np.geomspace(1e-12, 1e-9, 4)
detunings = np.arange(-16e6, 16e6 + 1, 0.5e6)

rows = linewidth_sweep(powers, detunings, CloudSpec(), physics, McConfig(n_trajectories=n))
with open("linewidth.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(("power_w", "fwhm_hz_full", "fwhm_hz_reduced"))
    for full, red in rows:
        w.writerow((full.power, full.fwhm, red.fwhm))
        print(f"P = {full.power:8.2e} W   full {full.fwhm / 1e6:6.2f} MHz   reduced {red.fwhm / 1e6:6.2f} MHz")
