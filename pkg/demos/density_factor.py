"""Relative atom density near the fiber at 1 nW for three probe detunings.

Red detuning pulls atoms in, blue pushes them out and surface adsorption
removes atoms in every case.  Integrated over the first 370 nm the
resonant probe sees the most atoms.

    python3 demos/density_factor.py [n_trajectories]
"""

import sys

from nanofiber.fiber_mode import FiberSpec, solve_he11
from nanofiber.light_atom import Physics
from nanofiber.trajectory_mc import CloudSpec, McConfig, density_factor

n = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
physics = Physics(solve_he11(FiberSpec()))
cfg = McConfig(n_trajectories=n)
a = physics.radius

runs = {d: density_factor(d, 1e-9, CloudSpec(), cfg, physics) for d in (-3e6, 0.0, 3e6)}
print("detuning   f(<100 nm)  f(<370 nm)  adsorbed")
for d, f in runs.items():
    print(f"{d / 1e6:+5.1f} MHz   {f.integrated(a, 100e-9):9.3f}  {f.integrated(a, 370e-9):9.3f}"
          f"  {f.outcomes['adsorbed']:8d}")

f0 = runs[0.0]
print("\nr - a (nm)   f        stderr")
for r, v, e in list(zip(f0.bin_centers, f0.f_values, f0.statistical_error))[:20]:
    print(f"{(r - a) * 1e9:9.1f}  {v:7.3f}  {e:7.3f}")
