# ─────────────────────────────────────────────────────────────────────────────
# Noise-level sweep: rerun the pipeline per level and check the error trend
# ─────────────────────────────────────────────────────────────────────────────

import logging
from pathlib import Path

import pandas as pd

from lib.config import CONFIG_NAME, FLOAT_FORMAT
from lib.pipeline import cmd_pipeline
from lib.settings import write_frozen_config

logger = logging.getLogger(__name__)

# Metrics that should not improve as the noise grows, with display names
SWEEP_METRICS = [
    ("decoder_relative_error", "Decoder relative error"),
    ("decoder_sindy_relative_error", "Decoder SINDy relative error"),
    ("latent_sindy_relative_error", "Latent SINDy relative error"),
]


def run_sweep(cfg, out_dir, levels=None, runner=cmd_pipeline):
    """
    Run `runner` once per noise level with everything else fixed.
    Returns a DataFrame indexed by noise level, one column per metric.
    """
    out_dir = Path(out_dir)
    levels = sorted(levels if levels is not None else cfg["sweep_levels"])
    rows = []
    for level in levels:
        run_dir = out_dir / f"noise_{level:.2f}"
        run_dir.mkdir(parents=True, exist_ok=True)
        run_cfg = {**cfg, "noise_level": float(level)}
        write_frozen_config(run_cfg, run_dir / CONFIG_NAME)
        logger.info("sweep: noise level %.2f → %s", level, run_dir)
        summary = runner(run_cfg, run_dir)
        rows.append({"noise_level": float(level), **{k: summary[k] for k, _ in SWEEP_METRICS}})
    frame = pd.DataFrame(rows).set_index("noise_level")
    frame.to_csv(out_dir / "sweep.csv", float_format=FLOAT_FORMAT)
    return frame


def check_monotone(frame):
    """{metric: True if non-decreasing in noise level}."""
    ordered = frame.sort_index()
    return {k: bool(ordered[k].is_monotonic_increasing) for k, _ in SWEEP_METRICS if k in ordered}


def sweep_table(frame):
    """Display-ready copy with readable column names."""
    names = dict(SWEEP_METRICS)
    table = frame.rename(columns=names)
    table.index = [f"{level:.0%}" for level in frame.index]
    table.index.name = "Noise"
    return table
