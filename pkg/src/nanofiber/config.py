"""Run configuration: YAML file -> validated RunConfig, plus a stable hash.

Precedence, lowest first: built-in defaults, the YAML file, command-line
flags.  Top-level keys mirror the RunConfig fields:

    seed: 1
    output_dir: out
    fiber:   {radius: 250.0e-9, n_core: 1.4525, n_clad: 1.0, wavelength: 852.0e-9}
    atom:    {natural_linewidth: 5.2e6, i_sat_free: 18.0, ...}
    surface: {c3_ground: ..., delta_c3: ..., cutoff_distance_m: 1.0e-9, ...}
    cloud:   {n0: ..., sigma: 0.6e-3, temperature: 125.0e-6}   # or peak_density_per_cm3
    mc:      {n_trajectories: 100000, launch_radius: 2.0e-6, ...}
    physics: {scale_isat_with_gamma: false, include_axial_scattering_force: false}
    grids:
      detunings: {span: 24.0e6, n: 97}      # or an explicit list
      powers: {min: 1.0e-12, max: 1.0e-9, n: 7}
      model_spacing: 0.25e6
    fit: {window: 5.0e6}
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .atom_surface import AtomSpecies, SurfaceModel
from .errors import ConfigError
from .fiber_mode import FiberSpec, solve_he11
from .fit_io import DEFAULT_WINDOW, n0_for_peak_density
from .light_atom import Physics
from .trajectory_mc import CloudSpec, McConfig

ALIASES = {"surface": {"cutoff_distance_m": "cutoff_distance"}}
PHYSICS_KEYS = ("scale_isat_with_gamma", "include_axial_scattering_force")
# fields that change how a run executes but never its results
NOT_HASHED = {("output_dir",), ("mc", "workers")}


def _coerce(value, default, where):
    # PyYAML reads "1e-9" (no dot) as a string
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    try:
        if isinstance(default, int):
            v = float(value)
            if v != int(v):
                raise ConfigError(f"{where}: expected an integer, got {value!r}")
            return int(v)
        if isinstance(default, float):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {value!r}") from None
    return value


def _build(cls, section: dict | None, name: str, **fixed):
    section = dict(section or {})
    aliases = ALIASES.get(name, {})
    section = {aliases.get(k, k): v for k, v in section.items()}
    defaults = {f.name: f.default for f in dataclasses.fields(cls) if f.init}
    unknown = set(section) - set(defaults) - set(fixed)
    if unknown:
        raise ConfigError(f"{name}: unknown keys {sorted(unknown)}")
    kwargs = {k: _coerce(v, defaults[k], f"{name}.{k}") for k, v in section.items()}
    kwargs.update(fixed)
    return cls(**kwargs)


def _grid(definition, name, kind):
    if isinstance(definition, (list, tuple)):
        try:
            g = np.array([float(x) for x in definition])
        except (TypeError, ValueError):
            raise ConfigError(f"grids.{name}: entries must be numbers") from None
    elif isinstance(definition, dict):
        try:
            if kind == "linear":
                span, n = float(definition.get("span", 24e6)), int(definition.get("n", 97))
                g = np.linspace(-span, span, n)
            else:
                lo, hi, n = float(definition.get("min", 1e-12)), float(definition.get("max", 1e-9)), int(definition.get("n", 7))
                if not 0 < lo <= hi:
                    raise ConfigError(f"grids.{name}: need 0 < min <= max")
                g = np.geomspace(lo, hi, n)
        except (TypeError, ValueError):
            raise ConfigError(f"grids.{name}: malformed range") from None
    else:
        raise ConfigError(f"grids.{name}: expected a list or a mapping")
    if g.size < 1 or not np.all(np.isfinite(g)):
        raise ConfigError(f"grids.{name}: must be a non-empty list of finite numbers")
    if np.any(np.diff(g) <= 0):
        raise ConfigError(f"grids.{name}: must be strictly increasing")
    return g


@dataclass
class RunConfig:
    fiber: FiberSpec = field(default_factory=FiberSpec)
    atom: AtomSpecies = field(default_factory=AtomSpecies)
    surface: SurfaceModel = field(default_factory=SurfaceModel)
    cloud: CloudSpec = field(default_factory=CloudSpec)
    mc: McConfig = field(default_factory=McConfig)
    scale_isat_with_gamma: bool = False
    include_axial_scattering_force: bool = False
    detunings: np.ndarray = field(default_factory=lambda: np.linspace(-24e6, 24e6, 97))
    powers: np.ndarray = field(default_factory=lambda: np.geomspace(1e-12, 1e-9, 7))
    model_spacing: float = 0.25e6
    fit_window: float = DEFAULT_WINDOW
    output_dir: Path = Path("out")
    seed: int = 1

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.mc.seed != self.seed:
            self.mc = dataclasses.replace(self.mc, seed=self.seed)
        if np.any(self.powers < 0):
            raise ConfigError("powers must be non-negative")
        if not 0 < self.model_spacing <= 0.5e6:
            raise ConfigError("model_spacing must lie in (0, 0.5 MHz]")
        if not self.fit_window > 0:
            raise ConfigError("fit window must be positive")
        self.mc.bin_edges(self.fiber.radius)

    def physics(self) -> Physics:
        return Physics(solve_he11(self.fiber), self.atom, self.surface,
                       scale_isat_with_gamma=self.scale_isat_with_gamma,
                       include_axial_scattering_force=self.include_axial_scattering_force)

    def with_overrides(self, seed=None, output_dir=None) -> "RunConfig":
        out = dataclasses.replace(self)
        if seed is not None:
            out = dataclasses.replace(out, seed=int(seed))
        if output_dir is not None:
            out = dataclasses.replace(out, output_dir=Path(output_dir))
        return out

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "fiber": dataclasses.asdict(self.fiber),
            "atom": dataclasses.asdict(self.atom),
            "surface": dataclasses.asdict(self.surface),
            "cloud": dataclasses.asdict(self.cloud),
            "mc": {k: v for k, v in dataclasses.asdict(self.mc).items() if k != "seed"},
            "physics": {k: getattr(self, k) for k in PHYSICS_KEYS},
            "grids": {"detunings": self.detunings.tolist(), "powers": self.powers.tolist(),
                      "model_spacing": self.model_spacing},
            "fit": {"window": self.fit_window},
        }

    def config_hash(self) -> str:
        """First 16 hex digits of the SHA-256 of the canonical JSON form."""
        d = self.to_dict()
        for path in NOT_HASHED:
            node = d
            for key in path[:-1]:
                node = node[key]
            node.pop(path[-1], None)
        text = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


TOP_KEYS = {"seed", "output_dir", "fiber", "atom", "surface", "cloud", "mc", "physics", "grids", "fit"}


def config_from_dict(raw: dict) -> RunConfig:
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration must be a mapping")
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    for key in TOP_KEYS - {"seed", "output_dir"}:
        if raw.get(key) is not None and not isinstance(raw[key], dict):
            raise ConfigError(f"{key}: expected a mapping")
    seed = _coerce(raw.get("seed", 1), 1, "seed")

    cloud_raw = dict(raw.get("cloud") or {})
    if "peak_density_per_cm3" in cloud_raw:
        if "n0" in cloud_raw:
            raise ConfigError("cloud: give either n0 or peak_density_per_cm3")
        dens = _coerce(cloud_raw.pop("peak_density_per_cm3"), 1.0, "cloud.peak_density_per_cm3")
        sigma = _coerce(cloud_raw.get("sigma", CloudSpec.sigma), 1.0, "cloud.sigma")
        cloud_raw["n0"] = n0_for_peak_density(dens * 1e6, sigma)

    phys = dict(raw.get("physics") or {})
    unknown = set(phys) - set(PHYSICS_KEYS)
    if unknown:
        raise ConfigError(f"physics: unknown keys {sorted(unknown)}")
    grids = dict(raw.get("grids") or {})
    unknown = set(grids) - {"detunings", "powers", "model_spacing"}
    if unknown:
        raise ConfigError(f"grids: unknown keys {sorted(unknown)}")
    fit = dict(raw.get("fit") or {})
    if set(fit) - {"window"}:
        raise ConfigError(f"fit: unknown keys {sorted(set(fit) - {'window'})}")
    mc_raw = dict(raw.get("mc") or {})
    if "seed" in mc_raw:
        raise ConfigError("mc.seed is not allowed; set the top-level seed")

    return RunConfig(
        fiber=_build(FiberSpec, raw.get("fiber"), "fiber"),
        atom=_build(AtomSpecies, raw.get("atom"), "atom"),
        surface=_build(SurfaceModel, raw.get("surface"), "surface"),
        cloud=_build(CloudSpec, cloud_raw, "cloud"),
        mc=_build(McConfig, mc_raw, "mc", seed=seed),
        scale_isat_with_gamma=_coerce(phys.get("scale_isat_with_gamma", False), False,
                                      "physics.scale_isat_with_gamma"),
        include_axial_scattering_force=_coerce(phys.get("include_axial_scattering_force", False),
                                               False, "physics.include_axial_scattering_force"),
        detunings=_grid(grids.get("detunings", {}), "detunings", "linear"),
        powers=_grid(grids.get("powers", {}), "powers", "log"),
        model_spacing=_coerce(grids.get("model_spacing", 0.25e6), 1.0, "grids.model_spacing"),
        fit_window=_coerce(fit.get("window", DEFAULT_WINDOW), 1.0, "fit.window"),
        output_dir=Path(str(raw.get("output_dir", "out"))),
        seed=seed,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from None
    return config_from_dict(raw)
