"""Saturated two-level coupling in the evanescent field.

All detunings are stored in Hz; :func:`angular` is the single place where
they are converted to rad/s.  The local detuning seen by an atom at radius r
is the probe detuning minus the van der Waals shift of its transition, so a
red-shifted transition moves the absorption line to negative detunings.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .atom_surface import (
    AtomSpecies, SurfaceModel, gamma_total, gamma_total_gradient,
    vdw_potential, vdw_potential_gradient, vdw_shift, vdw_shift_gradient,
)
from .constants import HBAR
from .errors import ConfigError, DomainError
from .fiber_mode import ModeSolution, intensity_gradient, intensity_profile


def angular(freq_hz):
    """Hz -> rad/s."""
    return 2 * np.pi * np.asarray(freq_hz, dtype=float)


@dataclass(frozen=True)
class ProbeSpec:
    power: float
    detuning: float = 0.0
    frequency_offset: float = 0.0
    omega: float | None = None

    def __post_init__(self):
        if self.power < 0:
            raise ConfigError("probe power must be non-negative")
        if self.omega is not None and not self.omega > 0:
            raise ConfigError("probe angular frequency must be positive")


@dataclass(frozen=True)
class LocalField:
    """Intensity (W/m^2), local decay rate (rad/s) and effective detuning (Hz)."""

    intensity: np.ndarray | float
    gamma_local: np.ndarray | float
    delta_effective: np.ndarray | float


def _isat(f, atom, scale_isat_with_gamma):
    if scale_isat_with_gamma:
        return atom.i_sat_free * (np.asarray(f.gamma_local) / atom.gamma_0) ** 2
    return atom.i_sat_free


def saturation_parameter(f: LocalField, atom: AtomSpecies, scale_isat_with_gamma=False):
    """Detuning-reduced saturation parameter s = (I/Isat) / (1 + (2 Delta/gamma)^2)."""
    s0 = np.asarray(f.intensity) / _isat(f, atom, scale_isat_with_gamma)
    x = 2 * angular(f.delta_effective) / np.asarray(f.gamma_local)
    return s0 / (1 + x ** 2)


def scattering_rate(f: LocalField, atom: AtomSpecies, scale_isat_with_gamma=False):
    """Photon scattering rate in events/s."""
    s0 = np.asarray(f.intensity) / _isat(f, atom, scale_isat_with_gamma)
    g = np.asarray(f.gamma_local)
    x = 2 * angular(f.delta_effective) / g
    return 0.5 * g * s0 / (1 + s0 + x ** 2)


def dipole_potential(f: LocalField, atom: AtomSpecies, scale_isat_with_gamma=False):
    """Saturated dipole potential (hbar Delta / 2) ln(1 + s), in J."""
    s = saturation_parameter(f, atom, scale_isat_with_gamma)
    return 0.5 * HBAR * angular(f.delta_effective) * np.log1p(s)


@dataclass(frozen=True)
class Physics:
    """Bundle of everything needed to evaluate local fields and forces.

    Switches
    --------
    dipole_force, vdw_force
        Remove the corresponding potential from the mechanical model.  The
        spectroscopic terms (vdW line shift, decay enhancement) are controlled
        by the SurfaceModel parameters instead.
    include_axial_scattering_force
        Radiation pressure along the fiber axis; it never changes the radial
        motion, so the density factor is unaffected.
    """

    mode: ModeSolution
    atom: AtomSpecies = AtomSpecies()
    surface: SurfaceModel = SurfaceModel()
    scale_isat_with_gamma: bool = False
    include_axial_scattering_force: bool = False
    dipole_force: bool = True
    vdw_force: bool = True

    @property
    def radius(self) -> float:
        return self.mode.fiber.radius

    def reduced(self) -> "Physics":
        """Model without dipole forces, vdW interaction or decay modification."""
        surf = replace(self.surface, delta_c3=0.0, guided_surface_factor=0.0,
                       free_surface_excess=0.0)
        return replace(self, surface=surf, dipole_force=False, vdw_force=False)

    def _check(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r <= self.radius):
            raise DomainError("radius must lie outside the fiber")
        return r

    def local_field(self, r, detuning, power) -> LocalField:
        r = self._check(r)
        fib = self.mode.fiber
        return LocalField(
            intensity=intensity_profile(self.mode, power, r),
            gamma_local=gamma_total(self.surface, self.mode, self.atom, r),
            delta_effective=detuning - vdw_shift(self.surface, r, fib),
        )

    def scattering(self, r, detuning, power):
        return scattering_rate(self.local_field(r, detuning, power), self.atom,
                               self.scale_isat_with_gamma)

    def potential(self, r, detuning, power):
        """Total mechanical potential (J) entering the trajectory simulation."""
        r = self._check(r)
        u = np.zeros_like(r)
        if self.dipole_force and power > 0:
            u = u + dipole_potential(self.local_field(r, detuning, power), self.atom,
                                     self.scale_isat_with_gamma)
        if self.vdw_force:
            u = u + vdw_potential(self.surface, r, self.mode.fiber)
        return u

    def potential_gradient(self, r, detuning, power):
        """Analytic dU/dr by the chain rule through I(r), gamma(r) and delta_vdW(r)."""
        r = self._check(r)
        fib = self.mode.fiber
        grad = np.zeros_like(r)
        if self.dipole_force and power > 0:
            f = self.local_field(r, detuning, power)
            i, g = f.intensity, f.gamma_local
            di = intensity_gradient(self.mode, power, r)
            dg = gamma_total_gradient(self.surface, self.mode, self.atom, r)
            delta = angular(f.delta_effective)
            ddelta = -angular(vdw_shift_gradient(self.surface, r, fib))
            isat = _isat(f, self.atom, self.scale_isat_with_gamma)
            s0 = i / isat
            ds0 = di / isat
            if self.scale_isat_with_gamma:
                ds0 = ds0 - 2 * s0 * dg / g
            den = 1 + 4 * delta ** 2 / g ** 2
            dden = 8 * delta * ddelta / g ** 2 - 8 * delta ** 2 * dg / g ** 3
            s = s0 / den
            ds = ds0 / den - s0 * dden / den ** 2
            grad = grad + 0.5 * HBAR * (ddelta * np.log1p(s) + delta * ds / (1 + s))
        if self.vdw_force:
            grad = grad + vdw_potential_gradient(self.surface, r, fib)
        return grad

    def radial_force(self, r, detuning, power):
        return -self.potential_gradient(r, detuning, power)

    def axial_force(self, r, detuning, power):
        """Radiation-pressure force along +z (N): hbar * beta * scattering rate."""
        if not self.include_axial_scattering_force:
            return np.zeros_like(np.asarray(r, dtype=float))
        return HBAR * self.mode.beta * self.scattering(r, detuning, power)


def radial_force(r, probe: ProbeSpec, physics: Physics):
    """Radial force (N, positive outward) on a ground-state atom."""
    return physics.radial_force(r, probe.detuning, probe.power)
