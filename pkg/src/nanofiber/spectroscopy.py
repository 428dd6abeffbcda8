"""
Absorbance line shapes, linewidths and effective atom numbers.

The absorbance at detuning delta and probe power P is

    A = (hbar omega / P) * integral rho(r, z) Gamma(I_P(r), gamma(r), delta_eff(r)) dV

with the Gaussian cloud flat across the few-micron region around the fiber,
so the z integral collapses to a column factor n0 / (2 pi sigma^2).  The
radial integral runs over the density-factor histogram: f is constant within
each bin and Gamma is integrated with Gauss-Legendre nodes inside every bin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .constants import HBAR
from .errors import DomainError, GridMismatch, NanofiberError, NoPeak
from .light_atom import Physics, ProbeSpec
from .trajectory_mc import CloudSpec, DensityFactor, McConfig, density_factor, derive_seed

NODES_PER_BIN = 8
FULL, REDUCED = "full", "reduced"


@dataclass
class Spectrum:
    detunings: np.ndarray
    absorbance: np.ndarray
    power: float
    variant: str
    n0: float
    seed: Optional[int] = None
    failed: np.ndarray = field(default=None)

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.absorbance = np.asarray(self.absorbance, dtype=float)
        if np.any(np.diff(self.detunings) <= 0):
            raise DomainError("detuning grid must be strictly increasing")
        if self.failed is None:
            self.failed = np.zeros(self.detunings.shape, dtype=bool)

    def metadata(self) -> dict:
        return {"power_w": self.power, "variant": self.variant, "n0": self.n0,
                "seed": self.seed, "failed_points": int(np.sum(self.failed))}


@dataclass(frozen=True)
class LinewidthPoint:
    power: float
    fwhm: float
    model_variant: str


def column_density(cloud: CloudSpec) -> float:
    """Peak density times the Gaussian z extent, n0 / (2 pi sigma^2), in m^-2."""
    return cloud.n0 / (2 * np.pi * cloud.sigma ** 2)


def radial_nodes(bin_edges, nodes_per_bin=NODES_PER_BIN):
    """Gauss-Legendre nodes and 2 pi r dr weights, shaped (n_bins, nodes)."""
    x, w = np.polynomial.legendre.leggauss(nodes_per_bin)
    lo = np.asarray(bin_edges[:-1])[:, None]
    hi = np.asarray(bin_edges[1:])[:, None]
    r = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w * 2 * np.pi * r
    return r, weights


def _profile(deltas, power, cloud, f_values, bin_edges, physics, nodes_per_bin):
    """Absorbance for each detuning with a single density factor."""
    if not power > 0:
        raise DomainError("probe power must be positive")
    r, w = radial_nodes(bin_edges, nodes_per_bin)
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    gam = physics.scattering(r[None, :, :], deltas[:, None, None], power)
    per_bin = np.sum(gam * w[None], axis=2)
    integral = per_bin @ np.asarray(f_values, dtype=float)
    return HBAR * physics.atom.omega / power * column_density(cloud) * integral


def _check_tags(f: DensityFactor, delta, power):
    if f.delta != delta or f.power != power:
        raise GridMismatch(f"density factor computed for (delta={f.delta}, P={f.power}), "
                           f"requested (delta={delta}, P={power})")


def absorbance_at(delta: float, probe: ProbeSpec, cloud: CloudSpec, f: Optional[DensityFactor],
                  physics: Physics, nodes_per_bin: int = NODES_PER_BIN,
                  bin_edges=None) -> float:
    """Absorbance -ln(T) at one detuning.

    ``f=None`` means an unperturbed cloud (f = 1) on ``bin_edges``.
    """
    if f is None:
        if bin_edges is None:
            raise DomainError("bin_edges required when no density factor is given")
        f_values = np.ones(len(bin_edges) - 1)
    else:
        _check_tags(f, delta, probe.power)
        f_values, bin_edges = f.f_values, f.bin_edges
    a = _profile(delta, probe.power, cloud, f_values, bin_edges, physics, nodes_per_bin)[0]
    if probe.omega is not None:
        a *= probe.omega / physics.atom.omega
    return float(a)


DensityProvider = Callable[[int, float, float], DensityFactor]


def mc_density_provider(cloud: CloudSpec, cfg: McConfig, physics: Physics, seed: int) -> DensityProvider:
    """Run one Monte Carlo per grid point with seed derived from (seed, index)."""
    def provide(index, delta, power):
        return density_factor(delta, power, cloud, cfg, physics, seed=derive_seed(seed, index))
    return provide


def synthesize_spectrum(detunings, power: float, cloud: CloudSpec, variant: str, physics: Physics,
                        cfg: Optional[McConfig] = None, seed: int = 1,
                        density: Optional[DensityProvider] = None,
                        nodes_per_bin: int = NODES_PER_BIN) -> Spectrum:
    """Absorbance spectrum for the full or the reduced model.

    The full model needs one density factor per detuning, obtained from
    ``density(index, delta, power)``; by default a seeded Monte Carlo run.
    Points whose density factor fails are flagged and set to NaN.
    """
    detunings = np.asarray(detunings, dtype=float)
    cfg = McConfig() if cfg is None else cfg
    edges = cfg.bin_edges(physics.radius)
    if variant == REDUCED:
        ph = physics.reduced()
        a = _profile(detunings, power, cloud, np.ones(len(edges) - 1), edges, ph, nodes_per_bin)
        return Spectrum(detunings, a, power, REDUCED, cloud.n0, None)
    if variant != FULL:
        raise ValueError(f"unknown model variant {variant!r}")

    density = mc_density_provider(cloud, cfg, physics, seed) if density is None else density
    a = np.full(detunings.shape, np.nan)
    failed = np.zeros(detunings.shape, dtype=bool)
    for i, d in enumerate(detunings):
        try:
            f = density(i, float(d), power)
            _check_tags(f, float(d), power)
            a[i] = _profile(d, power, cloud, f.f_values, f.bin_edges, physics, nodes_per_bin)[0]
        except NanofiberError:
            failed[i] = True
    return Spectrum(detunings, a, power, FULL, cloud.n0, seed, failed)


def spectrum_from_density(detunings, power, cloud, f: DensityFactor, physics: Physics,
                          variant: str = FULL, nodes_per_bin: int = NODES_PER_BIN) -> Spectrum:
    """Spectrum using one density factor for every detuning.

    Exact in the limit P -> 0 where the dipole potential vanishes and f no
    longer depends on the detuning; used for calibration.
    """
    a = _profile(detunings, power, cloud, f.f_values, f.bin_edges, physics, nodes_per_bin)
    return Spectrum(detunings, a, power, variant, cloud.n0, f.seed)


# ----------------------------------------------------------------------
# line-shape metrics
# ----------------------------------------------------------------------

def half_max_crossings(s: Spectrum):
    """(left, right, peak_detuning) where the absorbance crosses half its maximum."""
    y = s.absorbance
    x = s.detunings
    if not np.all(np.isfinite(y)):
        ok = np.isfinite(y)
        x, y = x[ok], y[ok]
    if len(y) < 3:
        raise NoPeak("too few valid points")
    k = int(np.argmax(y))
    if k == 0 or k == len(y) - 1:
        raise NoPeak("maximum lies on the grid edge")
    half = 0.5 * y[k]
    left = right = None
    for i in range(k, 0, -1):
        if y[i - 1] < half:
            left = x[i - 1] + (half - y[i - 1]) * (x[i] - x[i - 1]) / (y[i] - y[i - 1])
            break
    for i in range(k, len(y) - 1):
        if y[i + 1] < half:
            right = x[i] + (y[i] - half) * (x[i + 1] - x[i]) / (y[i] - y[i + 1])
            break
    if left is None or right is None:
        raise NoPeak("half-maximum crossing missing on one side")
    return float(left), float(right), float(x[k])


def fwhm(s: Spectrum) -> float:
    left, right, _ = half_max_crossings(s)
    return right - left


def line_center(s: Spectrum) -> float:
    """Midpoint of the two half-maximum crossings, Hz."""
    left, right, _ = half_max_crossings(s)
    return 0.5 * (left + right)


def asymmetry(s: Spectrum) -> float:
    """(red half-width - blue half-width) / FWHM, measured from the peak."""
    left, right, peak = half_max_crossings(s)
    return ((peak - left) - (right - peak)) / (right - left)


ASYMMETRY_THRESHOLD = 0.05


def is_asymmetric(s: Spectrum, threshold: float = ASYMMETRY_THRESHOLD) -> bool:
    return abs(asymmetry(s)) > threshold


# ----------------------------------------------------------------------
# effective atom number and probe distance
# ----------------------------------------------------------------------

def _resonant_weights(power, cloud, f, physics, nodes_per_bin, constant_rate=None):
    if not power > 0:
        raise DomainError("probe power must be positive")
    _check_tags(f, 0.0, power)
    r, w = radial_nodes(f.bin_edges, nodes_per_bin)
    if constant_rate is None:
        gam = physics.scattering(r, 0.0, power)
    else:
        gam = np.full(r.shape, float(constant_rate))
    weight = gam * w * f.f_values[:, None] * column_density(cloud)
    return r, weight


def effective_atom_number(power: float, cloud: CloudSpec, f: DensityFactor, physics: Physics,
                          nodes_per_bin: int = NODES_PER_BIN) -> float:
    """Number of fully saturated atoms equivalent to the resonant signal."""
    _, weight = _resonant_weights(power, cloud, f, physics, nodes_per_bin)
    return float(2.0 / physics.atom.gamma_0 * np.sum(weight))


def saturated_atom_number_bound(cloud: CloudSpec, f: DensityFactor, physics: Physics,
                                nodes_per_bin: int = NODES_PER_BIN) -> float:
    """Upper bound on the effective atom number: every atom scatters at gamma(r)/2."""
    r, w = radial_nodes(f.bin_edges, nodes_per_bin)
    gam = 0.5 * physics.local_field(r, 0.0, 0.0).gamma_local
    return float(2.0 / physics.atom.gamma_0 * np.sum(gam * w * f.f_values[:, None]) * column_density(cloud))


def mean_probe_distance(power: float, cloud: CloudSpec, f: DensityFactor, physics: Physics,
                        nodes_per_bin: int = NODES_PER_BIN, constant_rate=None) -> float:
    """Scattering-weighted mean distance of the probed atoms from the surface (m)."""
    r, weight = _resonant_weights(power, cloud, f, physics, nodes_per_bin, constant_rate)
    return float(np.sum((r - physics.radius) * weight) / np.sum(weight))


# ----------------------------------------------------------------------
# van der Waals calibration and linewidth sweeps
# ----------------------------------------------------------------------

def default_detuning_grid(span=24e6, n=97):
    return np.linspace(-span, span, n)


def calibrate_delta_c3(physics: Physics, cloud: CloudSpec, f_zero: DensityFactor,
                       target_shift: float = -0.4e6, power: float = 1e-16,
                       detunings=None, upper: float = 1e-47) -> float:
    """Excited-minus-ground C3 that red-shifts the low-power line center by ``target_shift``.

    ``f_zero`` is a density factor at vanishing power (detuning independent).
    """
    from dataclasses import replace

    detunings = np.linspace(-24e6, 24e6, 961) if detunings is None else detunings
    f = DensityFactor(0.0, power, f_zero.bin_edges, f_zero.totals, f_zero.outcomes,
                      f_zero.n_trajectories, f_zero.seed)

    def shift(dc3):
        ph = replace(physics, surface=replace(physics.surface, delta_c3=dc3))
        return line_center(spectrum_from_density(detunings, power, cloud, f, ph)) - target_shift

    return brentq(shift, 0.0, upper, xtol=1e-54, rtol=1e-8)


def linewidth_sweep(powers, detunings, cloud: CloudSpec, physics: Physics, cfg: McConfig,
                    seed: int = 1, density_for_power=None):
    """Full and reduced FWHM for each power.

    ``density_for_power(power, seed)`` may supply a DensityProvider per power
    (for caching); otherwise every point runs its own Monte Carlo.
    """
    rows = []
    for j, p in enumerate(powers):
        sub = derive_seed(seed, 1_000_000 + j)
        provider = None if density_for_power is None else density_for_power(p, sub)
        full = synthesize_spectrum(detunings, p, cloud, FULL, physics, cfg, seed=sub,
                                   density=provider)
        red = synthesize_spectrum(detunings, p, cloud, REDUCED, physics, cfg)
        try:
            w_full = fwhm(full)
        except NoPeak:
            w_full = float("nan")
        rows.append((LinewidthPoint(p, w_full, FULL), LinewidthPoint(p, fwhm(red), REDUCED)))
    return rows
