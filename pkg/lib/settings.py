# ─────────────────────────────────────────────────────────────────────────────
# Experiment configuration: defaults ← preset ← JSON file ← CLI flags
# ─────────────────────────────────────────────────────────────────────────────

import json
import logging
import re
from pathlib import Path

import numpy as np
import pandas as pd

from lib.autoencoder import LossWeights
from lib.denoise import DenoiseConfig
from lib.dynamics import LorenzParams
from lib.errors import ConfigError, SindyError
from lib.presets import CHOICES, DEFAULTS, HELP, PRESETS, TYPES
from lib.sindy import SindySpec
from lib.trainer import TrainConfig

logger = logging.getLogger(__name__)


def _line_of(text, key):
    match = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _check_type(key, value):
    kind = TYPES[key]
    if value is None:
        return DEFAULTS[key] is None
    if kind is bool:
        return isinstance(value, bool)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind is list:
        return isinstance(value, list) and all(
            isinstance(v, (int, float, list)) and not isinstance(v, bool) for v in value
        )
    return isinstance(value, kind)


def validate_value(key, value, source=None, line=None):
    if key not in TYPES:
        raise ConfigError(f"unknown key {key!r}", line=line, source=source)
    if not _check_type(key, value):
        raise ConfigError(
            f"{key} expects {TYPES[key].__name__}, got {type(value).__name__} {value!r}",
            line=line, source=source,
        )
    if key in CHOICES and value not in CHOICES[key]:
        raise ConfigError(f"{key} must be one of {list(CHOICES[key])}, got {value!r}", line=line, source=source)
    if TYPES[key] is float and value is not None:
        value = float(value)
    return value


def load_config_file(path):
    """Parse a flat JSON object; every key and value is checked against the schema."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file not found", source=str(path))
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, line=exc.lineno, source=str(path)) from exc
    if not isinstance(data, dict):
        raise ConfigError("top level must be a JSON object", line=1, source=str(path))
    return {key: validate_value(key, value, str(path), _line_of(text, key)) for key, value in data.items()}


def _check_consistency(cfg):
    n = cfg["latent_dim"]
    for key in ("train_x0", "test_x0", "normalization"):
        if len(cfg[key]) != n:
            raise ConfigError(f"{key} needs {n} entries (latent_dim), got {len(cfg[key])}")
    if cfg["system"] == "lorenz" and n != 3:
        raise ConfigError("the Lorenz system has latent_dim 3")
    if cfg["input_dim"] < n:
        raise ConfigError(f"input_dim {cfg['input_dim']} is smaller than latent_dim {n}")
    if cfg["coefficient_initialization"] == "specified" and cfg["init_coefficients"] is None:
        raise ConfigError("coefficient_initialization = specified needs init_coefficients")
    if not 0 <= cfg["noise_level"] < 1:
        raise ConfigError(f"noise_level must lie in [0, 1), got {cfg['noise_level']}")
    # constructing the typed configs surfaces every remaining range check
    try:
        denoise_config(cfg)
        sindy_spec(cfg)
        train_config(cfg)
        lorenz_params(cfg)
    except SindyError as exc:
        raise ConfigError(str(exc)) from exc


def resolve_config(preset=None, config_path=None, overrides=None):
    """Merge the layers and validate the result. Returns a plain dict."""
    cfg = dict(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg.update(PRESETS[preset]["overrides"])
    if config_path is not None:
        cfg.update(load_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = validate_value(key, value, source="command line")
    _check_consistency(cfg)
    logger.debug("resolved configuration (preset %s, file %s)", preset, config_path)
    return cfg


def write_frozen_config(cfg, path):
    Path(path).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")


def load_frozen_config(path):
    """The configuration a run directory was created with, checked like any config file."""
    return resolve_config(config_path=path)


def config_table(cfg):
    """Resolved parameters with their defaults and help text, for --dry-run."""
    rows = [
        {"key": k, "value": cfg[k], "default": DEFAULTS[k], "changed": cfg[k] != DEFAULTS[k], "help": HELP[k]}
        for k in sorted(cfg)
    ]
    return pd.DataFrame(rows).set_index("key")


# ─────────────────────────────────────────────────────────────────────────────
# Typed views of the flat configuration
# ─────────────────────────────────────────────────────────────────────────────

def lorenz_params(cfg):
    return LorenzParams(cfg["sigma"], cfg["rho"], cfg["beta"])


def denoise_config(cfg):
    prefix = "denoise_"
    fields = {k[len(prefix):]: v for k, v in cfg.items() if k.startswith(prefix) and k != "denoise_space"}
    return DenoiseConfig(**fields)


def sindy_spec(cfg):
    return SindySpec(
        latent_dim=cfg["latent_dim"], poly_order=cfg["poly_order"],
        include_sine=cfg["include_sine"], include_constant=cfg["include_constant"],
        model_order=cfg["model_order"],
    )


def train_config(cfg):
    specified = cfg["init_coefficients"]
    return TrainConfig(
        max_epochs=cfg["max_epochs"],
        refinement_epochs=cfg["refinement_epochs"],
        batch_size=cfg["batch_size"],
        learning_rate=cfg["learning_rate"],
        threshold=cfg["coefficient_threshold"],
        threshold_frequency=cfg["threshold_frequency"],
        sequential_thresholding=cfg["sequential_thresholding"],
        seed=cfg["seed"],
        print_frequency=cfg["print_frequency"],
        loss_weights=LossWeights(
            decoder=cfg["loss_weight_decoder"],
            sindy_x=cfg["loss_weight_sindy_x"],
            sindy_z=cfg["loss_weight_sindy_z"],
            sindy_regularization=cfg["loss_weight_sindy_regularization"],
        ),
        activation=cfg["activation"],
        widths=tuple(cfg["widths"]),
        coefficient_initialization=cfg["coefficient_initialization"],
        specified_coefficients=None if specified is None else np.asarray(specified, dtype=np.float64),
    )
