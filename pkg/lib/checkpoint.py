# ─────────────────────────────────────────────────────────────────────────────
# Model checkpoints: a directory of CSV matrices plus a JSON manifest
# ─────────────────────────────────────────────────────────────────────────────
#
#   <path>/manifest.json        format_version, dimensions, spec, file list
#   <path>/config.json          training configuration (sorted keys)
#   <path>/encoder/W0.csv ...   weight matrices, one CSV per layer
#   <path>/encoder/b0.csv ...   biases as a single row
#   <path>/decoder/...
#   <path>/phi.csv              Φ, one row per equation, one column per library term
#   <path>/phi_mask.csv         mask as 0/1
#
# Nothing time-dependent is written, so saving a loaded checkpoint again
# produces byte-identical files.

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lib.autoencoder import AutoencoderParams
from lib.config import CONFIG_NAME, FORMAT_VERSION, MANIFEST_NAME
from lib.data_loaders import load_matrix, read_json, save_matrix, write_json
from lib.errors import CheckpointError, DatasetError
from lib.network import MlpParams
from lib.sindy import SindySpec, load_coefficients, save_coefficients

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ModelBundle:
    autoencoder: AutoencoderParams
    coefficients: object            # SindyCoefficients
    spec: SindySpec
    config: dict = field(default_factory=dict)


def _save_mlp(net, directory):
    files = []
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        save_matrix(W, directory / f"W{l}.csv")
        save_matrix(np.asarray(b)[None, :], directory / f"b{l}.csv")
        files += [f"{directory.name}/W{l}.csv", f"{directory.name}/b{l}.csv"]
    return files


def _load_mlp(directory, n_layers, activation):
    weights, biases = [], []
    for l in range(n_layers):
        weights.append(load_matrix(directory / f"W{l}.csv"))
        biases.append(load_matrix(directory / f"b{l}.csv").reshape(-1))
    return MlpParams(tuple(weights), tuple(biases), activation)


def save_checkpoint(path, bundle):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    ae = bundle.autoencoder.numpy()

    files = _save_mlp(ae.encoder, path / "encoder") + _save_mlp(ae.decoder, path / "decoder")
    save_coefficients(bundle.coefficients, bundle.spec, path)
    files += ["phi.csv", "phi_mask.csv", CONFIG_NAME]
    write_json(bundle.config, path / CONFIG_NAME)

    manifest = {
        "format_version": FORMAT_VERSION,
        "input_dim": ae.input_dim,
        "latent_dim": ae.latent_dim,
        "widths": list(ae.widths),
        "activation": ae.encoder.activation,
        "spec": bundle.spec.to_dict(),
        "files": sorted(files),
    }
    write_json(manifest, path / MANIFEST_NAME)
    logger.info("checkpoint written to %s (%d active coefficients)", path, bundle.coefficients.active_count)


def load_checkpoint(path):
    path = Path(path)
    if not (path / MANIFEST_NAME).exists():
        raise CheckpointError(f"{path}: no {MANIFEST_NAME}, not a checkpoint")
    try:
        manifest = read_json(path / MANIFEST_NAME)
    except DatasetError as exc:
        raise CheckpointError(f"{path}: corrupt manifest ({exc})") from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint format version {version!r}, this build reads version {FORMAT_VERSION}"
        )
    missing = [f for f in manifest.get("files", []) if not (path / f).exists()]
    if missing:
        raise CheckpointError(f"{path}: missing files {missing}")

    try:
        spec = SindySpec(**manifest["spec"])
        n_layers = len(manifest["widths"]) + 1
        encoder = _load_mlp(path / "encoder", n_layers, manifest["activation"])
        decoder = _load_mlp(path / "decoder", n_layers, manifest["activation"])
        autoencoder = AutoencoderParams(encoder, decoder)
        coefficients = load_coefficients(spec, path)
        config = read_json(path / CONFIG_NAME)
    except (KeyError, TypeError, ValueError, DatasetError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc

    if autoencoder.input_dim != manifest["input_dim"] or autoencoder.latent_dim != manifest["latent_dim"]:
        raise CheckpointError(f"{path}: stored matrices disagree with the manifest dimensions")
    return ModelBundle(autoencoder, coefficients, spec, config)
