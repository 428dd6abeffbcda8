"""Absorption spectroscopy of cold atoms around a tapered optical nanofiber.

Modules, bottom-up: fiber_mode (HE11 field), atom_surface (van der Waals and
decay-rate enhancement), light_atom (saturated coupling and forces),
trajectory_mc (Monte Carlo density factor), spectroscopy (absorbance, FWHM,
effective atom number), fit_io (traces and fitting), config/cli.
"""

__version__ = "0.1.0"
