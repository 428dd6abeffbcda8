"""
Monte Carlo trajectories of thermal atoms around the fiber.

Atoms are launched from a cylinder of radius ``launch_radius`` with the
equilibrium inward flux of a Maxwell-Boltzmann gas and followed under the
radial force (dipole + van der Waals) until they escape through the launch
cylinder, hit the surface, or exceed ``max_time`` or ``max_steps``.  The time
each atom spends in every radial bin is recorded exactly along the straight
chord of each integrator step.  The same launch states are also propagated force-free (and
fiber-free) as a paired baseline; the density factor is the ratio of the two
ensemble time-in-bin totals.

Reproducibility
---------------
Work is split into fixed-size batches.  Batch ``i`` draws from a Philox
stream keyed by ``(seed, i)``, and batch totals are converted to exact
integers (units of 2**-200) before merging, so results do not depend on the
number of workers, on scheduling, or on how a run is split.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .constants import KB
from .errors import ConfigError, NonFinite
from .light_atom import Physics

ESCAPED, ABSORBED, TIMED_OUT, NON_FINITE = 0, 1, 2, 3
OUTCOME_NAMES = ("escaped", "absorbed", "timed_out", "non_finite")

_FIXED_SCALE = 2.0 ** 200
TABLE_POINTS = 8192


@dataclass(frozen=True)
class CloudSpec:
    """Unperturbed Gaussian cloud: atom number, 1/sqrt(e) radius, temperature."""

    n0: float = 4.4e16 * (0.6e-3) ** 3 * (2 * np.pi) ** 1.5
    sigma: float = 0.6e-3
    temperature: float = 125e-6

    def __post_init__(self):
        if not self.n0 >= 0:
            raise ConfigError("n0 must be non-negative")
        if not self.sigma > 0 or not self.temperature > 0:
            raise ConfigError("sigma and temperature must be positive")


@dataclass(frozen=True)
class McConfig:
    n_trajectories: int = 100_000
    seed: int = 1
    launch_radius: float = 2e-6
    max_time: float = 10e-3
    max_steps: int = 5_000_000
    base_dt: float = 50e-9
    min_dt: float = 1e-12
    n_bins: int = 100
    batch_size: int = 2048
    first_batch: int = 0
    workers: int = 1
    adaptive: bool = True
    dt_eta: float = 0.1
    dt_length: float = 10e-9
    surface_loss: bool = True

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ConfigError("n_trajectories must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if self.n_bins < 1 or self.batch_size < 1 or self.workers < 1:
            raise ConfigError("n_bins, batch_size and workers must be >= 1")
        if not (self.base_dt > 0 and 0 < self.min_dt <= self.base_dt and self.max_time > 0):
            raise ConfigError("time steps must satisfy 0 < min_dt <= base_dt and max_time > 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def bin_edges(self, fiber_radius: float) -> np.ndarray:
        if self.launch_radius <= fiber_radius:
            raise ConfigError("launch radius must exceed the fiber radius")
        return np.linspace(fiber_radius, self.launch_radius, self.n_bins + 1)

    def bin_width(self, fiber_radius: float) -> float:
        return (self.launch_radius - fiber_radius) / self.n_bins


# ----------------------------------------------------------------------
# seeding
# ----------------------------------------------------------------------

def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed for the key path ``keys``."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(batch_index,))))


# ----------------------------------------------------------------------
# initial conditions
# ----------------------------------------------------------------------

def thermal_speed(temperature: float, mass: float) -> float:
    """One-dimensional velocity spread sqrt(kB T / m)."""
    return math.sqrt(KB * temperature / mass)


def maxwell_boltzmann_velocities(temperature, mass, n, rng):
    """(n, 3) velocities of an isotropic Maxwell-Boltzmann gas."""
    return rng.normal(0.0, thermal_speed(temperature, mass), size=(n, 3))


def sample_initial_conditions(cloud: CloudSpec, cfg: McConfig, mass: float,
                              rng: np.random.Generator, n: int | None = None):
    """Launch states on the launch cylinder.

    Positions are uniform in azimuth at z = 0.  The inward normal speed is
    Rayleigh distributed (flux weighting of a Maxwellian), the tangential and
    axial components are Gaussian.  Returns ``(positions, velocities)`` of
    shape (n, 3).
    """
    n = cfg.batch_size if n is None else n
    sv = thermal_speed(cloud.temperature, mass)
    phi = rng.uniform(0.0, 2 * np.pi, n)
    v_in = rng.rayleigh(sv, n)
    v_t = rng.normal(0.0, sv, n)
    v_z = rng.normal(0.0, sv, n)
    c, s = np.cos(phi), np.sin(phi)
    pos = np.column_stack([cfg.launch_radius * c, cfg.launch_radius * s, np.zeros(n)])
    vel = np.column_stack([-v_in * c - v_t * s, -v_in * s + v_t * c, v_z])
    return pos, vel


# ----------------------------------------------------------------------
# force tables
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ForceTable:
    """Radial and axial force sampled on a log grid in d = r - a."""

    log_d0: float
    inv_dlog: float
    radial: np.ndarray
    axial: np.ndarray

    @property
    def d_min(self) -> float:
        return math.exp(self.log_d0)


def build_force_table(physics: Physics, delta: float, power: float, d_max: float,
                      n: int = TABLE_POINTS) -> ForceTable:
    d0 = physics.surface.cutoff_distance
    d = np.geomspace(d0, d_max, n)
    r = physics.radius + d
    fr = physics.radial_force(r, delta, power)
    fz = physics.axial_force(r, delta, power)
    if not (np.all(np.isfinite(fr)) and np.all(np.isfinite(fz))):
        raise NonFinite("force table contains non-finite values")
    return ForceTable(math.log(d0), (n - 1) / math.log(d_max / d0),
                      np.ascontiguousarray(fr), np.ascontiguousarray(fz))


# ----------------------------------------------------------------------
# numba kernels
# ----------------------------------------------------------------------

@numba.njit(cache=True, nogil=True)
def _lookup(table, d, log_d0, inv_dlog):
    if d <= 0.0:
        return 0.0
    u = (math.log(d) - log_d0) * inv_dlog
    if u < 0.0:
        return 0.0  # inside the clamp: flat potential
    n = table.shape[0]
    i = int(u)
    if i >= n - 1:
        return 0.0
    f = u - i
    return table[i] * (1.0 - f) + table[i + 1] * f


@numba.njit(cache=True, nogil=True)
def _piece(t_a, t_b, r_a, r_b, increasing, tstar, rmin2, vv, r_lo, width, nbins, hist):
    k = int(math.floor((r_a - r_lo) / width))
    t_cur = t_a
    while True:
        if increasing:
            edge = r_lo + (k + 1) * width
            if edge >= r_b:
                if 0 <= k < nbins:
                    hist[k] += t_b - t_cur
                return
            tc = tstar + math.sqrt(max(edge * edge - rmin2, 0.0) / vv)
        else:
            edge = r_lo + k * width
            if edge <= r_b:
                if 0 <= k < nbins:
                    hist[k] += t_b - t_cur
                return
            tc = tstar - math.sqrt(max(edge * edge - rmin2, 0.0) / vv)
        tc = min(max(tc, t_cur), t_b)
        if 0 <= k < nbins:
            hist[k] += tc - t_cur
        t_cur = tc
        if increasing:
            k += 1
            if k >= nbins:
                return
        else:
            k -= 1
            if k < 0:
                return


@numba.njit(cache=True, nogil=True)
def _deposit(x0, y0, vx, vy, dt, r_lo, width, nbins, hist):
    """Add the time a straight chord spends in each radial bin.

    Returns the smallest radius reached on the chord (NaN for a non-finite
    chord, which deposits nothing).
    """
    vv = vx * vx + vy * vy
    r0 = math.sqrt(x0 * x0 + y0 * y0)
    if not (math.isfinite(vv) and math.isfinite(r0) and math.isfinite(dt)):
        return math.nan
    if vv == 0.0:
        k = int(math.floor((r0 - r_lo) / width))
        if 0 <= k < nbins:
            hist[k] += dt
        return r0
    pv = x0 * vx + y0 * vy
    tstar = -pv / vv
    rmin2 = max(x0 * x0 + y0 * y0 - pv * pv / vv, 0.0)
    x1, y1 = x0 + vx * dt, y0 + vy * dt
    r1 = math.sqrt(x1 * x1 + y1 * y1)
    if tstar <= 0.0:
        _piece(0.0, dt, r0, r1, True, tstar, rmin2, vv, r_lo, width, nbins, hist)
        return r0
    if tstar >= dt:
        _piece(0.0, dt, r0, r1, False, tstar, rmin2, vv, r_lo, width, nbins, hist)
        return r1
    rm = math.sqrt(rmin2)
    _piece(0.0, tstar, r0, rm, False, tstar, rmin2, vv, r_lo, width, nbins, hist)
    _piece(tstar, dt, rm, r1, True, tstar, rmin2, vv, r_lo, width, nbins, hist)
    return rm


@numba.njit(cache=True, nogil=True)
def _integrate(p0, v0, radius, launch_radius, cutoff, surface_loss,
               log_d0, inv_dlog, fr_tab, fz_tab, mass,
               base_dt, min_dt, adaptive, eta, ell, max_time, max_steps,
               r_lo, width, nbins, hist, path, record):
    x, y, z = p0[0], p0[1], p0[2]
    vx, vy, vz = v0[0], v0[1], v0[2]
    r = math.sqrt(x * x + y * y)
    fr = _lookup(fr_tab, r - radius, log_d0, inv_dlog)
    fz = _lookup(fz_tab, r - radius, log_d0, inv_dlog)
    ax, ay, az = fr * x / (r * mass), fr * y / (r * mass), fz / mass
    t = 0.0
    steps = 0
    n_rec = 0
    if record and path.shape[0] > 0:
        path[0, 0] = t
        path[0, 1], path[0, 2], path[0, 3] = x, y, z
        path[0, 4], path[0, 5], path[0, 6] = vx, vy, vz
        n_rec = 1
    outcome = TIMED_OUT
    while t < max_time and steps < max_steps:
        dt = base_dt
        fmag = math.sqrt(fr * fr + fz * fz)
        if adaptive and fmag > 0.0:
            dt = min(base_dt, eta * math.sqrt(mass * ell / fmag))
            dt = max(dt, min_dt)
        vxh = vx + 0.5 * dt * ax
        vyh = vy + 0.5 * dt * ay
        vzh = vz + 0.5 * dt * az
        rmin = _deposit(x, y, vxh, vyh, dt, r_lo, width, nbins, hist)
        x += vxh * dt
        y += vyh * dt
        z += vzh * dt
        r = math.sqrt(x * x + y * y)
        t += dt
        steps += 1
        if not (math.isfinite(r) and math.isfinite(vxh) and math.isfinite(vyh)):
            outcome = NON_FINITE
            break
        d = r - radius
        fr = _lookup(fr_tab, d, log_d0, inv_dlog)
        fz = _lookup(fz_tab, d, log_d0, inv_dlog)
        ax, ay, az = fr * x / (r * mass), fr * y / (r * mass), fz / mass
        vx = vxh + 0.5 * dt * ax
        vy = vyh + 0.5 * dt * ay
        vz = vzh + 0.5 * dt * az
        if record and n_rec < path.shape[0]:
            path[n_rec, 0] = t
            path[n_rec, 1], path[n_rec, 2], path[n_rec, 3] = x, y, z
            path[n_rec, 4], path[n_rec, 5], path[n_rec, 6] = vx, vy, vz
            n_rec += 1
        if surface_loss and rmin - radius <= cutoff:
            outcome = ABSORBED
            break
        if r > launch_radius and x * vx + y * vy > 0.0:
            outcome = ESCAPED
            break
    return outcome, t, steps, n_rec


@numba.njit(cache=True, nogil=True)
def _baseline(p0, v0, r_lo, width, nbins, hist):
    vv = v0[0] * v0[0] + v0[1] * v0[1]
    if vv == 0.0:
        return
    t_exit = -2.0 * (p0[0] * v0[0] + p0[1] * v0[1]) / vv
    if t_exit > 0.0:
        _deposit(p0[0], p0[1], v0[0], v0[1], t_exit, r_lo, width, nbins, hist)


@numba.njit(cache=True, nogil=True)
def _run_batch(pos, vel, radius, launch_radius, cutoff, surface_loss,
               log_d0, inv_dlog, fr_tab, fz_tab, mass,
               base_dt, min_dt, adaptive, eta, ell, max_time, max_steps,
               r_lo, width, nbins):
    sums = np.zeros((5, nbins))
    counts = np.zeros(4, dtype=np.int64)
    hist_t = np.zeros(nbins)
    hist_b = np.zeros(nbins)
    dummy = np.zeros((0, 7))
    total_steps = 0
    for i in range(pos.shape[0]):
        hist_t[:] = 0.0
        hist_b[:] = 0.0
        outcome, _, steps, _ = _integrate(
            pos[i], vel[i], radius, launch_radius, cutoff, surface_loss,
            log_d0, inv_dlog, fr_tab, fz_tab, mass, base_dt, min_dt, adaptive,
            eta, ell, max_time, max_steps, r_lo, width, nbins, hist_t, dummy, False)
        total_steps += steps
        counts[outcome] += 1
        if outcome == NON_FINITE:
            continue
        _baseline(pos[i], vel[i], r_lo, width, nbins, hist_b)
        for k in range(nbins):
            sums[0, k] += hist_t[k]
            sums[1, k] += hist_t[k] * hist_t[k]
            sums[2, k] += hist_b[k]
            sums[3, k] += hist_b[k] * hist_b[k]
            sums[4, k] += hist_t[k] * hist_b[k]
    return sums, counts, total_steps


# ----------------------------------------------------------------------
# exact batch totals
# ----------------------------------------------------------------------

def _to_fixed(values) -> np.ndarray:
    out = np.empty(np.shape(values), dtype=object)
    flat = np.asarray(values, dtype=float).ravel()
    out.ravel()[:] = [int(v * _FIXED_SCALE) for v in flat]
    return out


def _fixed_ratio(num, den) -> np.ndarray:
    return np.array([n / d if d != 0 else np.nan for n, d in zip(num, den)], dtype=float)


@dataclass(eq=False)
class DensityFactor:
    """Density perturbation factor f(r) on a radial histogram.

    ``totals`` holds exact integer sums (units of 2**-200 s or s^2) of
    per-trajectory time-in-bin T and baseline time B, rows
    ``[T, T^2, B, B^2, T*B]``; f and its standard error are derived from them.
    """

    delta: float
    power: float
    bin_edges: np.ndarray
    totals: np.ndarray
    outcomes: dict
    n_trajectories: int
    seed: int
    f_values: np.ndarray = field(init=False)
    statistical_error: np.ndarray = field(init=False)

    def __post_init__(self):
        t, t2, b, b2, tb = self.totals
        self.f_values = _fixed_ratio(t, b)
        # delta-method variance of a ratio estimator
        n = max(self.n_trajectories - self.outcomes.get("non_finite", 0), 1)
        with np.errstate(invalid="ignore", divide="ignore"):
            sb = np.array([float(x) / _FIXED_SCALE for x in b])
            st2 = np.array([float(x) / _FIXED_SCALE for x in t2])
            sb2 = np.array([float(x) / _FIXED_SCALE for x in b2])
            stb = np.array([float(x) / _FIXED_SCALE for x in tb])
            f = self.f_values
            ss = np.maximum(st2 - 2 * f * stb + f ** 2 * sb2, 0.0)
            self.statistical_error = np.sqrt(ss * n / max(n - 1, 1)) / sb

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def merge(self, other: "DensityFactor") -> "DensityFactor":
        """Combine two runs at the same (delta, power) and binning."""
        if (other.delta != self.delta or other.power != self.power
                or not np.array_equal(other.bin_edges, self.bin_edges)):
            raise ConfigError("cannot merge density factors with different tags or bins")
        outcomes = {k: self.outcomes.get(k, 0) + other.outcomes.get(k, 0) for k in OUTCOME_NAMES}
        return DensityFactor(self.delta, self.power, self.bin_edges, self.totals + other.totals,
                             outcomes, self.n_trajectories + other.n_trajectories, self.seed)

    def integrated(self, fiber_radius: float, depth: float) -> float:
        """Shell-volume-weighted mean of f over fiber_radius <= r <= fiber_radius + depth."""
        lo, hi = self.bin_edges[:-1], self.bin_edges[1:]
        top = np.clip(hi, None, fiber_radius + depth)
        w = np.clip(top ** 2 - lo ** 2, 0.0, None)
        return float(np.sum(w * self.f_values) / np.sum(w))

    def sidecar(self) -> dict:
        return {
            "delta_hz": self.delta,
            "power_w": self.power,
            "seed": self.seed,
            "n_trajectories": self.n_trajectories,
            "outcomes": dict(self.outcomes),
        }

    def to_dict(self) -> dict:
        """Lossless JSON-ready form; the exact totals travel as decimal strings."""
        return {
            **self.sidecar(),
            "bin_edges": self.bin_edges.tolist(),
            "totals": [[str(int(x)) for x in row] for row in self.totals],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DensityFactor":
        totals = np.array([[int(x) for x in row] for row in d["totals"]], dtype=object)
        return cls(d["delta_hz"], d["power_w"], np.array(d["bin_edges"], dtype=float), totals,
                   {k: int(d["outcomes"].get(k, 0)) for k in OUTCOME_NAMES},
                   int(d["n_trajectories"]), int(d["seed"]))

    @classmethod
    def uniform(cls, delta, power, bin_edges) -> "DensityFactor":
        """f == 1 everywhere (unperturbed cloud)."""
        nb = len(bin_edges) - 1
        one = _to_fixed(np.ones(nb))
        totals = np.array([one, one, one, one, one], dtype=object)
        return cls(delta, power, np.asarray(bin_edges, dtype=float), totals,
                   {k: 0 for k in OUTCOME_NAMES}, 0, 0)


# ----------------------------------------------------------------------
# public operations
# ----------------------------------------------------------------------

@dataclass
class TrajectoryResult:
    outcome: str
    path: np.ndarray  # columns t, x, y, z, vx, vy, vz
    time_in_bin: np.ndarray
    baseline_time_in_bin: np.ndarray
    steps: int
    duration: float


def _kernel_args(physics, delta, power, cfg):
    radius = physics.radius
    if cfg.launch_radius <= radius + physics.surface.cutoff_distance:
        raise ConfigError("launch radius must lie outside the fiber")
    table = build_force_table(physics, delta, power, d_max=2 * cfg.launch_radius)
    width = cfg.bin_width(radius)
    return (radius, cfg.launch_radius, physics.surface.cutoff_distance, cfg.surface_loss,
            table.log_d0, table.inv_dlog, table.radial, table.axial, physics.atom.mass,
            cfg.base_dt, cfg.min_dt, cfg.adaptive, cfg.dt_eta, cfg.dt_length, cfg.max_time, cfg.max_steps,
            radius, width, cfg.n_bins)


def integrate_trajectory(position, velocity, delta: float, power: float, physics: Physics,
                         cfg: McConfig, max_record: int = 200_000) -> TrajectoryResult:
    """Follow a single atom and record its path (at most ``max_record`` samples)."""
    args = _kernel_args(physics, delta, power, cfg)
    p0 = np.asarray(position, dtype=float).copy()
    v0 = np.asarray(velocity, dtype=float).copy()
    hist = np.zeros(cfg.n_bins)
    base = np.zeros(cfg.n_bins)
    path = np.zeros((max_record, 7))
    outcome, t, steps, n_rec = _integrate(p0, v0, *args, hist, path, True)
    r_lo, width, nbins = args[-3:]
    _baseline(p0, v0, r_lo, width, nbins, base)
    return TrajectoryResult(OUTCOME_NAMES[outcome], path[:n_rec], hist, base, steps, t)


def run_batches(delta: float, power: float, cloud: CloudSpec, cfg: McConfig, physics: Physics,
                seed: int | None = None):
    """Run all batches and return (exact totals, outcome counts, steps)."""
    seed = cfg.seed if seed is None else seed
    args = _kernel_args(physics, delta, power, cfg)
    n_batches = -(-cfg.n_trajectories // cfg.batch_size)

    def one(j):
        n = min(cfg.batch_size, cfg.n_trajectories - j * cfg.batch_size)
        rng = batch_rng(seed, cfg.first_batch + j)
        pos, vel = sample_initial_conditions(cloud, cfg, physics.atom.mass, rng, n)
        return _run_batch(pos, vel, *args)

    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(one, range(n_batches)))
    else:
        results = [one(j) for j in range(n_batches)]

    totals = np.zeros((5, cfg.n_bins), dtype=object)
    totals[:] = 0
    counts = np.zeros(4, dtype=np.int64)
    steps = 0
    for sums, c, s in results:
        totals = totals + _to_fixed(sums)
        counts += c
        steps += s
    return totals, {name: int(c) for name, c in zip(OUTCOME_NAMES, counts)}, steps


def density_factor(delta: float, power: float, cloud: CloudSpec, cfg: McConfig,
                   physics: Physics, seed: int | None = None) -> DensityFactor:
    """Monte Carlo density factor f_{delta,P}(r) on ``cfg.n_bins`` radial bins."""
    seed = cfg.seed if seed is None else seed
    totals, outcomes, _ = run_batches(delta, power, cloud, cfg, physics, seed)
    return DensityFactor(float(delta), float(power), cfg.bin_edges(physics.radius), totals,
                         outcomes, cfg.n_trajectories, seed)
