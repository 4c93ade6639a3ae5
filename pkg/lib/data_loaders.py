# ─────────────────────────────────────────────────────────────────────────────
# CSV loaders and writers for trajectories, datasets and matrices
# ─────────────────────────────────────────────────────────────────────────────
#
# Every float is written with FLOAT_FORMAT and read back with the round-trip
# parser, so a save followed by a load reproduces the arrays bit for bit.

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from lib.config import FLOAT_FORMAT, METADATA_NAME
from lib.dynamics import NoisyDataset, TimeSeries
from lib.errors import DatasetError

logger = logging.getLogger(__name__)

SERIES_FILE = "series.csv"


def _read_csv(path, **kwargs):
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing data file {path}")
    try:
        return pd.read_csv(path, float_precision="round_trip", **kwargs)
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DatasetError(f"could not parse {path}: {exc}") from exc


def write_json(data, path):
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing file {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


# ─────────────────────────────────────────────────────────────────────────────
# Time series: columns t, x1..xd, dx1..dxd, ddx1..ddxd
# ─────────────────────────────────────────────────────────────────────────────

def series_frame(series):
    d = series.dim
    frame = pd.DataFrame({"t": series.t})
    for prefix, values in (("x", series.x), ("dx", series.dx), ("ddx", series.ddx)):
        if values is None:
            continue
        for j in range(d):
            frame[f"{prefix}{j + 1}"] = values[:, j]
    return frame


def _block(frame, prefix, path):
    cols = [c for c in frame.columns if c.startswith(prefix) and c[len(prefix):].isdigit()]
    if not cols:
        return None
    cols.sort(key=lambda c: int(c[len(prefix):]))
    if [int(c[len(prefix):]) for c in cols] != list(range(1, len(cols) + 1)):
        raise DatasetError(f"{path}: {prefix} columns are not numbered 1..{len(cols)}")
    return frame[cols].to_numpy(dtype=np.float64)


def save_series(series, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    series_frame(series).to_csv(directory / SERIES_FILE, index=False, float_format=FLOAT_FORMAT)
    logger.debug("wrote %d samples × %d to %s", series.n_samples, series.dim, directory)


def load_series(directory):
    path = Path(directory) / SERIES_FILE
    frame = _read_csv(path)
    if "t" not in frame.columns:
        raise DatasetError(f"{path}: no t column")
    x = _block(frame, "x", path)
    if x is None:
        raise DatasetError(f"{path}: no state columns x1..xd")
    try:
        return TimeSeries(frame["t"].to_numpy(), x, _block(frame, "dx", path), _block(frame, "ddx", path))
    except ValueError as exc:
        raise DatasetError(f"{path}: {exc}") from exc


# ─────────────────────────────────────────────────────────────────────────────
# Noisy datasets: clean/ observed/ noise.csv metadata.json
# ─────────────────────────────────────────────────────────────────────────────

def save_dataset(dataset, directory):
    directory = Path(directory)
    save_series(dataset.clean, directory / "clean")
    save_series(dataset.observed, directory / "observed")
    save_matrix(dataset.true_noise, directory / "noise.csv", prefix="n")
    write_json(
        {"noise_level": dataset.noise_level, "seed": dataset.seed, "params": dataset.params},
        directory / METADATA_NAME,
    )


def load_dataset(directory):
    directory = Path(directory)
    meta = read_json(directory / METADATA_NAME)
    try:
        return NoisyDataset(
            clean=load_series(directory / "clean"),
            observed=load_series(directory / "observed"),
            true_noise=load_matrix(directory / "noise.csv"),
            noise_level=float(meta["noise_level"]),
            seed=int(meta["seed"]),
            params=meta.get("params", {}),
        )
    except KeyError as exc:
        raise DatasetError(f"{directory / METADATA_NAME}: missing key {exc}") from exc


# ─────────────────────────────────────────────────────────────────────────────
# Plain matrices
# ─────────────────────────────────────────────────────────────────────────────

def save_matrix(matrix, path, prefix="c", columns=None):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    columns = columns or [f"{prefix}{j + 1}" for j in range(matrix.shape[1])]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(matrix, columns=columns).to_csv(path, index=False, float_format=FLOAT_FORMAT)


def load_matrix(path):
    return _read_csv(path).to_numpy(dtype=np.float64)


def long_format(series, label):
    """One row per (t, coordinate) for plotting tools: t, series, coordinate, value."""
    frame = pd.DataFrame(series.x, columns=[f"x{j + 1}" for j in range(series.dim)])
    frame.insert(0, "t", series.t)
    long = frame.melt(id_vars="t", var_name="coordinate", value_name="value")
    long.insert(1, "series", label)
    return long
