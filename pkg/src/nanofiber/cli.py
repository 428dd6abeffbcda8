"""Command-line front end: ``nanofiber <mode|density|spectrum|sweep|fit>``.

Exit codes: 0 success, 1 runtime failure, 2 usage or validation error.
Every CSV is accompanied by ``<name>.csv.json`` carrying the config hash,
seed and package version; JSON reports carry the same block inline.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigError, NanofiberError, NoPeak
from .fiber_mode import evanescent_power_fraction, intensity_profile
from .fit_io import fit_spectrum, load_trace
from .spectroscopy import (
    FULL, REDUCED, asymmetry, fwhm, is_asymmetric, line_center, linewidth_sweep,
    synthesize_spectrum,
)
from .trajectory_mc import DensityFactor, density_factor, derive_seed

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _tag(x: float) -> str:
    return f"{x:.6g}".replace("+", "")


class Run:
    """Resolved configuration plus the helpers shared by every subcommand."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.hash = cfg.config_hash()
        self.out = cfg.output_dir
        self._physics = None

    @property
    def physics(self):
        if self._physics is None:
            self._physics = self.cfg.physics()
        return self._physics

    def provenance(self) -> dict:
        return {"config_hash": self.hash, "seed": self.cfg.seed, "version": __version__}

    def write_json(self, name: str, payload: dict) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        doc = {"provenance": self.provenance(), **payload}
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n")
        return path

    def write_csv(self, name: str, header, rows, meta: dict | None = None) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        path = self.out / name
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) for v in row])
        self.write_json(name + ".json", {"file": name, "columns": list(header), **(meta or {})})
        return path

    # density factors are cached per (config hash, delta, power, seed)
    def density(self, delta: float, power: float, seed: int) -> DensityFactor:
        key = hashlib.sha256(f"{self.hash}|{delta!r}|{power!r}|{seed}".encode()).hexdigest()[:24]
        path = self.out / "cache" / f"density_{key}.json"
        if path.is_file():
            return DensityFactor.from_dict(json.loads(path.read_text()))
        f = density_factor(delta, power, self.cfg.cloud, self.cfg.mc, self.physics, seed=seed)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(f.to_dict()))
        return f

    def provider(self, base_seed: int):
        return lambda i, delta, power: self.density(delta, power, derive_seed(base_seed, i))


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, Path):
        return str(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------

def cmd_mode(run: Run, args) -> int:
    mode = run.physics.mode
    a = mode.fiber.radius
    r = np.linspace(a, run.cfg.mc.launch_radius, 401)
    run.write_csv("mode_intensity.csv", ("r_m", "intensity_w_per_m2"),
                  zip(r, intensity_profile(mode, 1.0, r)), {"power_w": 1.0})
    report = {
        **mode.summary(),
        "decay_length_m": mode.decay_length,
        "dispersion_residual": mode.dispersion_residual,
        "evanescent_fraction_370nm": evanescent_power_fraction(mode, 370e-9),
        "single_mode": bool(mode.v_number < 2.405),
    }
    run.write_json("mode.json", report)
    print(f"HE11: V = {mode.v_number:.4f}, n_eff = {mode.effective_index:.6f}, "
          f"1/q = {mode.decay_length * 1e9:.1f} nm")
    return EXIT_OK


def cmd_density(run: Run, args) -> int:
    f = run.density(args.detuning, args.power, run.cfg.seed)
    a = run.physics.radius
    rows = zip(f.bin_centers, f.f_values, f.statistical_error)
    meta = {**f.sidecar(),
            "integrated_f_370nm": f.integrated(a, 370e-9),
            "integrated_f_100nm": f.integrated(a, 100e-9)}
    name = f"density_d{_tag(args.detuning)}_p{_tag(args.power)}.csv"
    run.write_csv(name, ("r_m", "f", "f_stderr"), rows, meta)
    print(f"{name}: integrated f within 370 nm = {meta['integrated_f_370nm']:.4f}")
    return EXIT_OK


def _line_metrics(s) -> dict:
    try:
        return {"fwhm_hz": fwhm(s), "line_center_hz": line_center(s),
                "asymmetry": asymmetry(s), "asymmetric": is_asymmetric(s)}
    except NoPeak:
        return {"fwhm_hz": None, "line_center_hz": None, "asymmetry": None, "asymmetric": None}


def cmd_spectrum(run: Run, args) -> int:
    cfg = run.cfg
    s = synthesize_spectrum(cfg.detunings, args.power, cfg.cloud, args.variant, run.physics,
                            cfg.mc, seed=cfg.seed, density=run.provider(cfg.seed))
    meta = {**s.metadata(), **_line_metrics(s),
            "n_trajectories": cfg.mc.n_trajectories if args.variant == FULL else 0,
            "failed_detunings_hz": s.detunings[s.failed].tolist()}
    name = f"spectrum_{args.variant}_p{_tag(args.power)}.csv"
    run.write_csv(name, ("detuning_hz", "absorbance"), zip(s.detunings, s.absorbance), meta)
    if np.all(s.failed):
        print("every detuning failed", file=sys.stderr)
        return EXIT_RUNTIME
    width = "n/a" if meta["fwhm_hz"] is None else f"{meta['fwhm_hz'] / 1e6:.4g} MHz"
    print(f"{name}: FWHM = {width}, asymmetric = {meta['asymmetric']}")
    return EXIT_OK


def cmd_sweep(run: Run, args) -> int:
    cfg = run.cfg
    powers = cfg.powers if args.power is None else np.array([args.power])
    rows = linewidth_sweep(powers, cfg.detunings, cfg.cloud, run.physics, cfg.mc, seed=cfg.seed,
                           density_for_power=lambda p, seed: run.provider(seed))
    table = [(full.power, full.fwhm, red.fwhm) for full, red in rows]
    run.write_csv("linewidth.csv", ("power_w", "fwhm_hz_full", "fwhm_hz_reduced"), table,
                  {"n_detunings": int(cfg.detunings.size)})
    if all(not np.isfinite(full) for _, full, _ in table):
        print("no full-model linewidth could be measured", file=sys.stderr)
        return EXIT_RUNTIME
    for p, full, red in table:
        print(f"P = {p:.3g} W: FWHM full {full / 1e6:.3f} MHz, reduced {red / 1e6:.3f} MHz")
    return EXIT_OK


def cmd_fit(run: Run, args) -> int:
    cfg = run.cfg
    trace = load_trace(args.trace)
    w = cfg.fit_window
    lo, hi = trace.detunings[0] - w, trace.detunings[-1] + w
    n = int(np.ceil((hi - lo) / cfg.model_spacing)) + 1
    grid = np.linspace(lo, hi, n)
    model = synthesize_spectrum(grid, args.power, cfg.cloud, args.variant, run.physics, cfg.mc,
                                seed=cfg.seed, density=run.provider(cfg.seed))
    if np.any(model.failed):
        ok = ~model.failed
        if ok.sum() < 3:
            print("model spectrum failed at every detuning", file=sys.stderr)
            return EXIT_RUNTIME
        model = type(model)(model.detunings[ok], model.absorbance[ok], model.power,
                            model.variant, model.n0, model.seed)
    res = fit_spectrum(trace, model, window=w, cloud=cfg.cloud)
    run.write_json("fit.json", {**res.to_json(), "trace": str(args.trace),
                                "variant": args.variant, "power_w": args.power})
    print(f"n0 = {res.n0:.4g} +- {res.n0_stderr:.2g}, offset = {res.offset / 1e6:.4f} MHz, "
          f"rms residual = {res.residual_rms:.3g}")
    return EXIT_OK


COMMANDS = {"mode": cmd_mode, "density": cmd_density, "spectrum": cmd_spectrum,
            "sweep": cmd_sweep, "fit": cmd_fit}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("--out", type=Path, help="override the output directory")

    p = _Parser(prog="nanofiber", description="Nanofiber evanescent-field spectroscopy model")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("mode", parents=[common], help="solve the HE11 mode")
    d = sub.add_parser("density", parents=[common], help="Monte Carlo density factor")
    d.add_argument("--power", type=float, required=True, help="probe power in W")
    d.add_argument("--detuning", type=float, default=0.0, help="probe detuning in Hz")
    s = sub.add_parser("spectrum", parents=[common], help="absorbance spectrum")
    s.add_argument("--power", type=float, required=True)
    s.add_argument("--variant", choices=(FULL, REDUCED), default=FULL)
    w = sub.add_parser("sweep", parents=[common], help="linewidth versus power")
    w.add_argument("--power", type=float, help="single power instead of the configured grid")
    f = sub.add_parser("fit", parents=[common], help="fit n0 and offset to a measured trace")
    f.add_argument("trace", type=Path, help="CSV with columns detuning_hz,transmission")
    f.add_argument("--power", type=float, required=True)
    f.add_argument("--variant", choices=(FULL, REDUCED), default=FULL)
    return p


def _glue_numbers(argv):
    # argparse only recognises "-3" or "-0.5" as negative numbers, not "-3e6"
    out = []
    for tok in argv:
        if out and out[-1] in ("--detuning", "--power") and tok.startswith("-"):
            try:
                float(tok)
            except ValueError:
                pass
            else:
                out[-1] = f"{out[-1]}={tok}"
                continue
        out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(_glue_numbers(argv))
        cfg = load_config(args.config) if args.config is not None else RunConfig()
        cfg = cfg.with_overrides(seed=args.seed, output_dir=args.out)
        power = getattr(args, "power", None)
        if power is not None and not (np.isfinite(power) and power >= 0):
            raise ConfigError("--power must be a non-negative number")
        if not np.isfinite(getattr(args, "detuning", 0.0)):
            raise ConfigError("--detuning must be finite")
    except (UsageError, ConfigError) as exc:
        print(f"nanofiber: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](Run(cfg), args)
    except ConfigError as exc:
        print(f"nanofiber: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NanofiberError, OSError) as exc:
        print(f"nanofiber: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
