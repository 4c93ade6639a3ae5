import numpy as np
import pytest

from lib.dynamics import lorenz_ground_truth_coefficients
from lib.pipeline import cmd_pipeline
from lib.sensitivity import check_monotone, run_sweep
from lib.settings import lorenz_params, resolve_config, sindy_spec
from lib.sindy import load_coefficients

# (library row, equation) of -σ, σ, ρ and -1
LINEAR_ENTRIES = [(1, 0), (2, 0), (1, 1), (2, 1)]


def recovers_lorenz(run_dir, cfg):
    """Transformed model holds every Lorenz term, at most 3 extra, linear terms within 25%."""
    path = run_dir / "eval"
    if not (path / "transformed_coefficients.csv").exists():
        return False
    spec = sindy_spec(cfg)
    found = load_coefficients(spec, path, stem="transformed_coefficients")
    truth = lorenz_ground_truth_coefficients(cfg["normalization"], spec.poly_order, lorenz_params(cfg))
    active = truth != 0
    if not found.mask[active].all() or (found.mask & ~active).sum() > 3:
        return False
    return all(abs(found.values[e] - truth[e]) <= 0.25 * abs(truth[e]) for e in LINEAR_ENTRIES)


@pytest.mark.slow
def test_smoke_preset_recovers_the_lorenz_structure(tmp_path):
    passed = 0
    for seed in range(3):
        cfg = resolve_config("smoke", overrides={"seed": seed})
        run_dir = tmp_path / f"seed_{seed}"
        cmd_pipeline(cfg, run_dir)
        passed += recovers_lorenz(run_dir, cfg)
    assert passed >= 2


@pytest.mark.slow
def test_toy_metrics_do_not_improve_with_noise(tmp_path):
    cfg = resolve_config("toy-linear")
    frame = run_sweep(cfg, tmp_path, levels=[0.0, 0.15])
    assert list(frame.index) == [0.0, 0.15]
    assert np.all(np.isfinite(frame.to_numpy()))
    assert all(check_monotone(frame).values())
    assert (tmp_path / "noise_0.15" / "eval" / "metrics.json").exists()
