import json

import pandas as pd

from lib.config import CONFIG_NAME
from lib.presets import DEFAULTS
from lib.sensitivity import check_monotone, run_sweep, sweep_table


def fake_runner(cfg, run_dir):
    level = cfg["noise_level"]
    return {
        "decoder_relative_error": 0.01 + level,
        "decoder_sindy_relative_error": 0.1 + 2 * level,
        "latent_sindy_relative_error": 0.05 + level ** 2,
        "active_coefficients": 7,
    }


def test_sweep_runs_every_level(tmp_path):
    seen = []

    def runner(cfg, run_dir):
        seen.append((cfg["noise_level"], run_dir.name))
        return fake_runner(cfg, run_dir)

    frame = run_sweep(dict(DEFAULTS), tmp_path, levels=[0.15, 0.05], runner=runner)
    assert seen == [(0.05, "noise_0.05"), (0.15, "noise_0.15")]
    assert list(frame.index) == [0.05, 0.15]
    assert json.loads((tmp_path / "noise_0.15" / CONFIG_NAME).read_text())["noise_level"] == 0.15
    saved = pd.read_csv(tmp_path / "sweep.csv", index_col="noise_level")
    assert saved.shape == (2, 3)


def test_default_levels_come_from_the_config(tmp_path):
    frame = run_sweep(dict(DEFAULTS), tmp_path, runner=fake_runner)
    assert list(frame.index) == DEFAULTS["sweep_levels"]


def test_monotone_check(tmp_path):
    frame = run_sweep(dict(DEFAULTS), tmp_path, levels=[0.0, 0.1], runner=fake_runner)
    assert all(check_monotone(frame).values())
    frame.loc[0.1, "latent_sindy_relative_error"] = 0.0
    assert check_monotone(frame)["latent_sindy_relative_error"] is False


def test_sweep_table(tmp_path):
    frame = run_sweep(dict(DEFAULTS), tmp_path, levels=[0.1], runner=fake_runner)
    table = sweep_table(frame)
    assert list(table.index) == ["10%"]
    assert "Latent SINDy relative error" in table.columns
