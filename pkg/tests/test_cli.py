import json
import logging

import pytest

from lib.cli import build_parser, main
from lib.config import EXIT_CONFIG, EXIT_IO, EXIT_OK
from lib.errors import DivergenceError, StageError, exit_code_for


def test_parser_defaults():
    args = build_parser().parse_args(["train"])
    assert args.command == "train" and args.preset is None and not args.dry_run
    with pytest.raises(SystemExit):
        build_parser().parse_args(["fly"])


def test_dry_run_prints_the_table(capsys, tmp_path):
    code = main(["pipeline", "--preset", "smoke", "--noise-level", "0.05", "--dry-run", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "n_samples" in out and "3000" in out
    assert not (tmp_path / "config.json").exists()


def test_config_errors_exit_with_code_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "no_such_key": 1\n}')
    assert main(["generate", "--config", str(bad), "--dry-run"]) == EXIT_CONFIG
    assert f"{bad}:2:" in capsys.readouterr().err
    assert main(["generate", "--noise-level", "2", "--dry-run"]) == EXIT_CONFIG


def test_missing_inputs_exit_with_code_4(tmp_path):
    assert main(["train", "--preset", "toy-linear", "--out", str(tmp_path / "run")]) == EXIT_IO


@pytest.fixture
def recorded_stages(monkeypatch):
    calls = []
    monkeypatch.setattr("lib.cli.run_stage", lambda name, cfg, out: calls.append((name, cfg)))
    return calls


def test_later_stages_resume_from_the_frozen_config(tmp_path, recorded_stages):
    run = tmp_path / "run"
    assert main(["generate", "--preset", "toy-linear", "--noise-level", "0.05", "--out", str(run)]) == EXIT_OK
    frozen = (run / "config.json").read_bytes()
    assert main(["denoise", "--out", str(run)]) == EXIT_OK
    assert (run / "config.json").read_bytes() == frozen

    (_, made_with), (stage, used) = recorded_stages
    assert stage == "denoise"
    assert used == made_with
    assert used["system"] == "linear_decay" and used["noise_level"] == 0.05 and used["input_dim"] == 8


def test_flags_that_contradict_the_frozen_config_are_refused(tmp_path, recorded_stages, capsys):
    run = tmp_path / "run"
    main(["generate", "--preset", "toy-linear", "--out", str(run)])
    frozen = (run / "config.json").read_bytes()
    assert main(["train", "--noise-level", "0.1", "--out", str(run)]) == EXIT_CONFIG
    assert "noise_level" in capsys.readouterr().err
    assert main(["train", "--preset", "toy-linear", "--out", str(run)]) == EXIT_OK
    assert (run / "config.json").read_bytes() == frozen
    assert [name for name, _ in recorded_stages] == ["generate", "train"]


def test_run_log_is_closed_after_main(tmp_path, recorded_stages):
    main(["generate", "--preset", "toy-linear", "--out", str(tmp_path / "run")])
    assert not [h for h in logging.getLogger().handlers if isinstance(h, logging.FileHandler)]


def test_exit_codes_of_errors():
    assert exit_code_for(DivergenceError("nan")) == 3
    assert exit_code_for(FileNotFoundError("x")) == EXIT_IO
    assert StageError("train", DivergenceError("nan")).exit_code == 3
    assert "train failed" in str(StageError("train", ValueError("bad")))


@pytest.mark.slow
def test_toy_pipeline_end_to_end(tmp_path):
    override = tmp_path / "short.json"
    override.write_text(json.dumps({
        "n_samples": 400, "max_epochs": 21, "refinement_epochs": 5,
        "threshold_frequency": 10, "print_frequency": 5,
    }))
    run = tmp_path / "run"
    assert main(["pipeline", "--preset", "toy-linear", "--config", str(override), "--out", str(run)]) == EXIT_OK

    for name in ("config.json", "run.log", "data/train/observed/series.csv", "denoise/test/input/series.csv",
                 "model/checkpoint/manifest.json", "model/history.csv", "eval/metrics.json",
                 "eval/coefficients.csv", "eval/transform.json", "eval/plot_data.csv", "eval/report.pdf"):
        assert (run / name).exists(), name
    metrics = json.loads((run / "eval" / "metrics.json").read_text())
    assert {"decoder_relative_error", "decoder_sindy_relative_error", "latent_sindy_relative_error"} <= set(metrics)
    assert all(metrics[k] >= 0 for k in ("decoder_relative_error", "latent_sindy_relative_error"))

    # re-running eval on the same run reproduces metrics.json byte for byte
    before = (run / "eval" / "metrics.json").read_bytes()
    assert main(["eval", "--preset", "toy-linear", "--config", str(override), "--out", str(run)]) == EXIT_OK
    assert (run / "eval" / "metrics.json").read_bytes() == before
