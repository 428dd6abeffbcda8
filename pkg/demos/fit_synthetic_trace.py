"""Fit atom number and frequency offset to a noisy synthetic transmission trace.

    python3 demos/fit_synthetic_trace.py
"""

import numpy as np

from nanofiber.fiber_mode import FiberSpec, solve_he11
from nanofiber.fit_io import MeasuredTrace, fit_spectrum
from nanofiber.light_atom import Physics
from nanofiber.spectroscopy import REDUCED, synthesize_spectrum
from nanofiber.trajectory_mc import CloudSpec

physics = Physics(solve_he11(FiberSpec()))
cloud = CloudSpec()
model = synthesize_spectrum(np.arange(-25e6, 25e6 + 1, 0.1e6), 6e-12, cloud, REDUCED, physics)

# the "measurement": 80% of the model atoms, shifted by +0.6 MHz, 5% noise
rng = np.random.default_rng(7)
x = np.linspace(-15e6, 15e6, 121)
truth = 0.8 * np.interp(x - 0.6e6, model.detunings, model.absorbance)
trace = MeasuredTrace.from_absorbance(x, truth * (1 + 0.05 * rng.standard_normal(x.size)).clip(0))

res = fit_spectrum(trace, model, cloud=cloud)
print(f"n0     = {res.n0:.4g} +- {res.n0_stderr:.2g}   (true {0.8 * cloud.n0:.4g})")
print(f"offset = {res.offset / 1e6:+.3f} +- {res.offset_stderr / 1e6:.3f} MHz   (true +0.600)")
print(f"peak density = {res.peak_density * 1e-6:.3g} atoms/cm^3")
