import csv
import json

import numpy as np
import pytest

from nanofiber.cli import main
from nanofiber.config import RunConfig, config_from_dict, load_config
from nanofiber.errors import ConfigError
from nanofiber.fit_io import MeasuredTrace, save_trace
from nanofiber.spectroscopy import REDUCED, synthesize_spectrum

TINY = """\
seed: 5
mc: {n_trajectories: 400, batch_size: 200}
grids:
  detunings: {span: 12.0e6, n: 13}
  powers: [1e-12]
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(TINY)
    return p


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def sidecar(path):
    return json.loads(path.with_name(path.name + ".json").read_text())


def test_mode_report(tmp_path, capsys):
    assert main(["mode", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "mode.json").read_text())
    assert report["v_number"] == pytest.approx(1.942, abs=1e-3)
    assert report["single_mode"] is True
    assert set(report["provenance"]) == {"config_hash", "seed", "version"}
    header, data = read_csv(tmp_path / "mode_intensity.csv")
    assert header == ["r_m", "intensity_w_per_m2"] and np.all(np.diff(data[:, 1]) < 0)
    assert "V = 1.9422" in capsys.readouterr().out


def test_missing_config_is_usage_error(tmp_path):
    assert main(["mode", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_unknown_subcommand_and_missing_argument():
    assert main(["frobnicate"]) == 2
    assert main(["density"]) == 2


@pytest.mark.parametrize("text", [
    "fiber: {n_core: 1.0, n_clad: 1.2}\n",
    "mc: {n_trajectories: 0}\n",
    "fiber: {radius: -1}\n",
    "bogus: 1\n",
    "mc: {seed: 3}\n",
    "grids: {model_spacing: 1.0e6}\n",
    "fiber: [1, 2]\n",
    "fiber: {radius: 250e-9\n",
])
def test_invalid_config_exit_code(tmp_path, text):
    p = tmp_path / "bad.yaml"
    p.write_text(text)
    assert main(["mode", "--config", str(p), "--out", str(tmp_path)]) == 2


def test_negative_power_rejected(tmp_path):
    assert main(["density", "--power", "-1", "--out", str(tmp_path)]) == 2


def test_yaml_exponent_without_dot(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("fiber: {radius: 250e-9}\ncloud: {n0: 2e8}\n")
    cfg = load_config(p)
    assert cfg.fiber.radius == 250e-9 and cfg.cloud.n0 == 2e8


def test_peak_density_option():
    cfg = config_from_dict({"cloud": {"peak_density_per_cm3": 4.4e10, "sigma": 0.6e-3}})
    assert cfg.cloud.n0 == pytest.approx(1.55e8, rel=0.05)
    with pytest.raises(ConfigError):
        config_from_dict({"cloud": {"peak_density_per_cm3": 4.4e10, "n0": 1e8}})


def test_config_hash():
    a, b = RunConfig(), config_from_dict({})
    assert a.config_hash() == b.config_hash() and len(a.config_hash()) == 16
    assert a.with_overrides(output_dir="elsewhere").config_hash() == a.config_hash()
    assert a.with_overrides(seed=2).config_hash() != a.config_hash()
    assert config_from_dict({"cloud": {"n0": 1e8}}).config_hash() != a.config_hash()


def test_overrides_beat_file(tiny, tmp_path):
    cfg = load_config(tiny).with_overrides(seed=9, output_dir=tmp_path)
    assert cfg.seed == 9 and cfg.mc.seed == 9 and cfg.output_dir == tmp_path


def test_density_deterministic(tiny, tmp_path):
    args = ["density", "--power", "1e-9", "--detuning", "-3e6", "--config", str(tiny)]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    name = "density_d-3e06_p1e-09.csv"
    first = (tmp_path / "a" / name).read_bytes()
    assert first == (tmp_path / "b" / name).read_bytes()
    meta = sidecar(tmp_path / "a" / name)
    assert meta["provenance"]["seed"] == 5
    assert 0 <= meta["integrated_f_100nm"] and 0 <= meta["integrated_f_370nm"]
    # a second run in the same directory is served from the cache
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert (tmp_path / "a" / name).read_bytes() == first


def test_seed_override_changes_density(tiny, tmp_path):
    base = ["density", "--power", "1e-9", "--config", str(tiny)]
    assert main(base + ["--out", str(tmp_path / "a")]) == 0
    assert main(base + ["--seed", "6", "--out", str(tmp_path / "b")]) == 0
    name = "density_d0_p1e-09.csv"
    assert (tmp_path / "a" / name).read_bytes() != (tmp_path / "b" / name).read_bytes()


def test_reduced_spectrum(tmp_path):
    assert main(["spectrum", "--power", "1e-12", "--variant", "reduced", "--out", str(tmp_path)]) == 0
    path = tmp_path / "spectrum_reduced_p1e-12.csv"
    header, data = read_csv(path)
    assert header == ["detuning_hz", "absorbance"] and data.shape == (97, 2)
    meta = sidecar(path)
    # the 97-point default grid slightly overestimates the 5.2 MHz width
    assert meta["fwhm_hz"] == pytest.approx(5.2e6, abs=0.2e6)
    assert meta["failed_points"] == 0 and meta["variant"] == "reduced"


def test_full_spectrum_small(tiny, tmp_path):
    assert main(["spectrum", "--power", "1e-12", "--config", str(tiny), "--out", str(tmp_path)]) == 0
    meta = sidecar(tmp_path / "spectrum_full_p1e-12.csv")
    assert meta["n_trajectories"] == 400 and meta["seed"] == 5


def test_sweep_small(tiny, tmp_path):
    assert main(["sweep", "--config", str(tiny), "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "linewidth.csv")
    assert header == ["power_w", "fwhm_hz_full", "fwhm_hz_reduced"]
    assert data.shape == (1, 3) and data[0, 0] == 1e-12
    assert 4e6 < data[0, 2] < 7e6


def test_fit_synthetic_trace(tmp_path):
    cfg = RunConfig()
    grid = np.linspace(-15e6, 15e6, 61)
    model = synthesize_spectrum(grid, 1e-12, cfg.cloud, REDUCED, cfg.physics())
    save_trace(MeasuredTrace.from_absorbance(grid, model.absorbance), tmp_path / "trace.csv")
    code = main(["fit", str(tmp_path / "trace.csv"), "--power", "1e-12", "--variant", "reduced",
                 "--out", str(tmp_path)])
    assert code == 0
    doc = json.loads((tmp_path / "fit.json").read_text())
    assert doc["n0"] == pytest.approx(cfg.cloud.n0, rel=1e-6)
    assert abs(doc["offset_hz"]) < 1e3
    assert doc["residual_rms"] < 1e-10
    assert doc["peak_density_per_cm3"] == pytest.approx(4.4e10, rel=1e-9)


def test_fit_missing_trace(tmp_path):
    assert main(["fit", str(tmp_path / "none.csv"), "--power", "1e-12", "--out", str(tmp_path)]) == 1
