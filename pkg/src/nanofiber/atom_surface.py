"""Atom-surface interaction: van der Waals potential and line shift, and the
position-dependent spontaneous decay rate near the fiber.

The decay rate is split into emission into free-space modes and into the
guided mode.  Both surface excesses follow the normalized evanescent
intensity I(r)/I(a): the guided part is ``guided_surface_factor * gamma_0``
at the surface, the free-space excess ``free_surface_excess * gamma_0``.
With the defaults the total rate on the surface is 1.57 gamma_0.

The van der Waals terms use the plane-surface -C3/d^3 form with d = r - a,
clamped at ``cutoff_distance`` so no infinities reach the integrator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT, CS_D2_WAVELENGTH, CS_ISAT_FREE, CS_LINEWIDTH_HZ, CS_MASS, H_PLANCK
from .errors import ConfigError, DomainError
from .fiber_mode import FiberSpec, ModeSolution, intensity_gradient, intensity_profile

# Excited-minus-ground C3 difference calibrated so the zero-power spectrum of
# the default configuration is red-shifted by 0.4 MHz (see calibrate_delta_c3).
DEFAULT_DELTA_C3 = 1.9925e-49


@dataclass(frozen=True)
class AtomSpecies:
    """Two-level atom; defaults are the Cs D2 cycling transition."""

    natural_linewidth: float = CS_LINEWIDTH_HZ
    i_sat_free: float = CS_ISAT_FREE
    mass: float = CS_MASS
    transition_wavelength: float = CS_D2_WAVELENGTH

    def __post_init__(self):
        for name in ("natural_linewidth", "i_sat_free", "mass", "transition_wavelength"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    @property
    def gamma_0(self) -> float:
        """Free-space decay rate in rad/s."""
        return 2 * np.pi * self.natural_linewidth

    @property
    def omega(self) -> float:
        return 2 * np.pi * C_LIGHT / self.transition_wavelength


@dataclass(frozen=True)
class SurfaceModel:
    c3_ground: float = 5.6e-49
    delta_c3: float = DEFAULT_DELTA_C3
    guided_surface_factor: float = 0.3
    free_surface_excess: float = 0.27
    cutoff_distance: float = 1e-9

    def __post_init__(self):
        if not self.c3_ground > 0:
            raise ConfigError("c3_ground must be positive")
        if self.guided_surface_factor < 0 or self.free_surface_excess < 0:
            raise ConfigError("decay enhancement factors must be non-negative")
        if not self.cutoff_distance > 0:
            raise ConfigError("cutoff_distance must be positive")

    @property
    def surface_enhancement(self) -> float:
        """gamma(a) / gamma_0."""
        return 1.0 + self.guided_surface_factor + self.free_surface_excess


def _separation(model, r, radius, strict=True):
    r = np.asarray(r, dtype=float)
    bad = r <= radius if strict else r < radius
    if np.any(bad):
        raise DomainError("radius must lie outside the fiber")
    d = r - radius
    return np.maximum(d, model.cutoff_distance), d >= model.cutoff_distance


def vdw_potential(model: SurfaceModel, r, fiber: FiberSpec):
    """Ground-state van der Waals energy -C3/d^3 (J), clamped below the cutoff."""
    d, _ = _separation(model, r, fiber.radius)
    return -model.c3_ground / d ** 3


def vdw_potential_gradient(model: SurfaceModel, r, fiber: FiberSpec):
    """dU/dr of :func:`vdw_potential`; zero inside the clamp."""
    d, free = _separation(model, r, fiber.radius)
    return np.where(free, 3 * model.c3_ground / d ** 4, 0.0)


def vdw_shift(model: SurfaceModel, r, fiber: FiberSpec):
    """Shift of the transition frequency (Hz); negative means red-shifted."""
    d, _ = _separation(model, r, fiber.radius)
    return -(model.delta_c3 / H_PLANCK) / d ** 3


def vdw_shift_gradient(model: SurfaceModel, r, fiber: FiberSpec):
    d, free = _separation(model, r, fiber.radius)
    return np.where(free, 3 * (model.delta_c3 / H_PLANCK) / d ** 4, 0.0)


def _relative_intensity(mode, r):
    a = mode.fiber.radius
    r = np.asarray(r, dtype=float)
    if np.any(r < a):
        raise DomainError("decay rates are defined for r >= fiber radius")
    return intensity_profile(mode, 1.0, r) / intensity_profile(mode, 1.0, a)


def gamma_guided(model: SurfaceModel, mode: ModeSolution, atom: AtomSpecies, r):
    """Emission rate into the guided mode, rad/s."""
    return model.guided_surface_factor * atom.gamma_0 * _relative_intensity(mode, r)


def gamma_free(model: SurfaceModel, mode: ModeSolution, atom: AtomSpecies, r):
    """Emission rate into free-space modes, rad/s."""
    return atom.gamma_0 * (1.0 + model.free_surface_excess * _relative_intensity(mode, r))


def gamma_total(model: SurfaceModel, mode: ModeSolution, atom: AtomSpecies, r):
    """Longitudinal decay rate gamma(r) = gamma_free(r) + gamma_guided(r)."""
    return gamma_free(model, mode, atom, r) + gamma_guided(model, mode, atom, r)


def gamma_total_gradient(model: SurfaceModel, mode: ModeSolution, atom: AtomSpecies, r):
    a = mode.fiber.radius
    r = np.asarray(r, dtype=float)
    if np.any(r < a):
        raise DomainError("decay rates are defined for r >= fiber radius")
    excess = model.guided_surface_factor + model.free_surface_excess
    return atom.gamma_0 * excess * intensity_gradient(mode, 1.0, r) / intensity_profile(mode, 1.0, a)
