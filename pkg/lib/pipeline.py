# ─────────────────────────────────────────────────────────────────────────────
# Pipeline stages: generate → denoise → train → eval
# ─────────────────────────────────────────────────────────────────────────────
#
# Each stage reads the previous stage's directory inside one run directory:
#
#   <run>/config.json                    frozen resolved configuration
#   <run>/data/{train,test}/             NoisyDataset in the denoising space
#   <run>/data/{train,test}/latent/      clean latent trajectory (raw coordinates)
#   <run>/denoise/{train,test}/          noise.csv, denoised/, loss_history.csv, net/
#   <run>/denoise/{train,test}/input/    autoencoder-ready series (x, dx, ddx)
#   <run>/model/checkpoint/              trained model bundle
#   <run>/model/history.csv
#   <run>/eval/                          metrics.json, transform.json, coefficient CSVs,
#                                        noise_report.json, simulated/, plot_data.csv, report.pdf

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd

from lib.checkpoint import ModelBundle, load_checkpoint, save_checkpoint
from lib.config import DATA_DIR, DENOISE_DIR, EVAL_DIR, FLOAT_FORMAT, MODEL_DIR
from lib.data_loaders import (
    load_dataset, load_matrix, load_series, long_format, save_dataset, save_series, write_json,
)
from lib.denoise import NoiseEstimate, save_denoise_result, separate_noise
from lib.dynamics import (
    TimeSeries, add_noise, embed_highdim, evaluation_trajectory, legendre_modes,
    lorenz_ground_truth_coefficients, normalize_latent, system_rhs, training_trajectory,
)
from lib.autoencoder import encode
from lib.errors import DivergenceError, DomainError, StageError
from lib.evaluation import (
    compute_metrics, denoising_gain, fit_affine_latent_transform, least_squares_sindy,
    noise_recovery_report, sindy_simulate, trajectory_relative_error, transform_coefficients,
)
from lib.narratives import format_equations, narr_metrics, narr_noise, narr_sparsity, narr_transform
from lib.pdf_export import write_run_pdf
from lib.settings import denoise_config, lorenz_params, sindy_spec, train_config
from lib.sindy import SindyCoefficients, save_coefficients
from lib.trainer import train

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


def embedding_modes(cfg):
    return legendre_modes(cfg["input_dim"], cfg["latent_dim"], cfg["normalization"],
                          linear=cfg["linear_embedding"])


def _split_seed(cfg, split):
    return cfg["seed"] + (0 if split == "train" else 1)


# ─────────────────────────────────────────────────────────────────────────────
# generate
# ─────────────────────────────────────────────────────────────────────────────

def cmd_generate(cfg, out_dir):
    out_dir = Path(out_dir)
    rhs = system_rhs(cfg["system"], lorenz_params(cfg))
    order2 = cfg["model_order"] == 2
    trajectories = {
        "train": training_trajectory(rhs, cfg["n_samples"], cfg["t_end"], cfg["train_x0"], order2),
        "test": evaluation_trajectory(rhs, cfg["test_dt"], cfg["test_t_end"], cfg["test_x0"], order2),
    }
    modes = embedding_modes(cfg) if cfg["denoise_space"] == "observed" else None
    for split, latent in trajectories.items():
        split_dir = out_dir / DATA_DIR / split
        clean = latent if modes is None else embed_highdim(latent, modes)
        dataset = add_noise(clean, cfg["noise_level"], _split_seed(cfg, split))
        dataset = replace(dataset, params={
            "system": cfg["system"], "space": cfg["denoise_space"], "split": split,
        })
        save_dataset(dataset, split_dir)
        save_series(latent, split_dir / "latent")
        logger.info("generated %s: %d samples × %d at %.0f%% noise",
                    split, clean.n_samples, clean.dim, 100 * cfg["noise_level"])
    return out_dir / DATA_DIR


# ─────────────────────────────────────────────────────────────────────────────
# denoise
# ─────────────────────────────────────────────────────────────────────────────

def cmd_denoise(cfg, out_dir):
    out_dir = Path(out_dir)
    dcfg = denoise_config(cfg)
    modes = embedding_modes(cfg)
    for split in SPLITS:
        dataset = load_dataset(out_dir / DATA_DIR / split)
        split_dir = out_dir / DENOISE_DIR / split
        if cfg["denoise"]:
            logger.info("separating noise on the %s split", split)
            result = separate_noise(dataset.observed, dcfg, seed=_split_seed(cfg, split))
            save_denoise_result(result, split_dir)
            cleaned = result.denoised
        else:
            cleaned = dataset.observed
        if cfg["model_order"] == 1 and cleaned.ddx is not None:
            cleaned = TimeSeries(cleaned.t, cleaned.x, cleaned.dx)
        ready = embed_highdim(cleaned, modes) if cfg["denoise_space"] == "latent" else cleaned
        save_series(ready, split_dir / "input")
    return out_dir / DENOISE_DIR


# ─────────────────────────────────────────────────────────────────────────────
# train
# ─────────────────────────────────────────────────────────────────────────────

def cmd_train(cfg, out_dir):
    out_dir = Path(out_dir)
    data = load_series(out_dir / DENOISE_DIR / "train" / "input")
    spec = sindy_spec(cfg)
    autoencoder, coefficients, history = train(data, spec, train_config(cfg))
    model_dir = out_dir / MODEL_DIR
    save_checkpoint(model_dir / "checkpoint", ModelBundle(autoencoder, coefficients, spec, cfg))
    history.to_csv(model_dir / "history.csv", float_format=FLOAT_FORMAT)
    for line in format_equations(coefficients, spec):
        logger.info("  %s", line)
    return model_dir


# ─────────────────────────────────────────────────────────────────────────────
# eval
# ─────────────────────────────────────────────────────────────────────────────

def _reference_latent(cfg, split, out_dir):
    latent = load_series(out_dir / DATA_DIR / split / "latent")
    return normalize_latent(latent, cfg["normalization"])


def _noise_section(cfg, out_dir):
    """Noise-recovery report on the training split, when noise separation ran."""
    if not cfg["denoise"] or cfg["noise_level"] == 0:
        return None
    dataset = load_dataset(out_dir / DATA_DIR / "train")
    estimate = NoiseEstimate(load_matrix(out_dir / DENOISE_DIR / "train" / "noise.csv").T)
    report = noise_recovery_report(estimate, dataset.true_noise.T, cfg["denoise_num_dt"])
    denoised = load_series(out_dir / DENOISE_DIR / "train" / "denoised")
    report["denoising"] = denoising_gain(dataset.clean.x, dataset.observed.x, denoised.x)
    return report


def _oracle(cfg, out_dir, spec):
    """Least-squares SINDy on the denoised (or raw) normalized latent training series."""
    if cfg["denoise_space"] != "latent" or spec.model_order != 1:
        return None
    if cfg["denoise"]:
        series = load_series(out_dir / DENOISE_DIR / "train" / "denoised")
    else:
        series = load_dataset(out_dir / DATA_DIR / "train").observed
    z = normalize_latent(series, cfg["normalization"])
    try:
        return least_squares_sindy(z.x, z.dx, spec, threshold=cfg["oracle_threshold"])
    except DomainError as exc:
        logger.warning("least-squares baseline skipped: %s", exc)
        return None


def cmd_eval(cfg, out_dir):
    out_dir = Path(out_dir)
    eval_dir = out_dir / EVAL_DIR
    eval_dir.mkdir(parents=True, exist_ok=True)
    model = load_checkpoint(out_dir / MODEL_DIR / "checkpoint")
    spec = model.spec
    test = load_series(out_dir / DENOISE_DIR / "test" / "input")

    metrics = compute_metrics(model, test)
    logger.info("metrics: %s", metrics.as_dict())
    save_coefficients(model.coefficients, spec, eval_dir, stem="coefficients")

    # latent alignment against the reference trajectory
    reference = _reference_latent(cfg, "test", out_dir)
    z_learned = TimeSeries(test.t, encode(test.x, model.autoencoder).numpy())
    transform_info, transformed = {}, None
    k = min(reference.n_samples, z_learned.n_samples)
    try:
        T = fit_affine_latent_transform(z_learned.slice(0, k), reference.slice(0, k))
        transform_info = T.to_dict()
        if spec.model_order == 1:
            transformed = transform_coefficients(model.coefficients, T, spec)
            save_coefficients(transformed, spec, eval_dir, stem="transformed_coefficients")
    except DomainError as exc:
        logger.warning("affine alignment skipped: %s", exc)
        transform_info = {"error": str(exc)}
    write_json(transform_info, eval_dir / "transform.json")

    oracle = _oracle(cfg, out_dir, spec)
    if oracle is not None:
        save_coefficients(oracle, spec, eval_dir, stem="oracle_coefficients")

    # simulate the learned model and, for Lorenz, the ground truth from the test start
    plot_frames = [long_format(reference, "reference"), long_format(z_learned, "encoded")]
    horizon = test.t <= test.t[0] + cfg["simulation_horizon"]
    simulation = {}
    if spec.model_order == 1:
        try:
            simulated = sindy_simulate(z_learned.x[0], test.t, model.coefficients, spec)
        except DivergenceError as exc:
            simulated = exc.partial
            simulation["diverged"] = True
        save_series(simulated, eval_dir / "simulated")
        plot_frames.append(long_format(simulated, "simulated"))
        if transform_info.get("error") is None and "scale" in transform_info:
            aligned = TimeSeries(simulated.t, (simulated.x - T.offset) / T.scale)
            order = np.argsort(T.permutation)
            aligned = TimeSeries(aligned.t, aligned.x[:, order])
            plot_frames.append(long_format(aligned, "simulated_aligned"))
            n = min(int(horizon.sum()), aligned.n_samples)
            errors = trajectory_relative_error(reference.slice(0, n), aligned.slice(0, n))
            simulation["mean_relative_trajectory_error"] = float(errors.mean())
        if cfg["system"] == "lorenz" and spec.poly_order >= 2 and spec.include_constant and not spec.include_sine:
            truth = lorenz_ground_truth_coefficients(cfg["normalization"], spec.poly_order, lorenz_params(cfg))
            truth_coeffs = SindyCoefficients(truth, truth != 0)
            span = reference.t <= reference.t[0] + cfg["simulation_horizon"]
            truth_sim = sindy_simulate(reference.x[0], reference.t[span], truth_coeffs, spec)
            save_series(truth_sim, eval_dir / "ground_truth_simulated")
            plot_frames.append(long_format(truth_sim, "ground_truth_simulated"))

    noise = _noise_section(cfg, out_dir)
    if noise is not None:
        write_json(noise, eval_dir / "noise_report.json")
        estimate = load_matrix(out_dir / DENOISE_DIR / "train" / "noise.csv")
        t_train = load_series(out_dir / DENOISE_DIR / "train" / "denoised").t
        plot_frames.append(long_format(TimeSeries(t_train, estimate), "noise_estimated"))
        plot_frames.append(long_format(TimeSeries(t_train, load_dataset(out_dir / DATA_DIR / "train").true_noise),
                                       "noise_true"))
    pd.concat(plot_frames, ignore_index=True).to_csv(eval_dir / "plot_data.csv", index=False,
                                                      float_format=FLOAT_FORMAT)

    summary = {
        **metrics.as_dict(),
        "noise_level": cfg["noise_level"],
        "seed": cfg["seed"],
        "active_coefficients": model.coefficients.active_count,
        "model_order": spec.model_order,
        **simulation,
    }
    write_json(summary, eval_dir / "metrics.json")

    write_run_pdf(
        eval_dir / "report.pdf",
        config=cfg,
        metrics=metrics.as_dict(),
        equations=format_equations(model.coefficients, spec),
        transformed_equations=None if transformed is None else format_equations(transformed, spec),
        noise_text=None if noise is None else narr_noise(noise),
        narrative=" ".join(filter(None, [
            narr_metrics(metrics, cfg["noise_level"]),
            narr_sparsity(model.coefficients, 7 if cfg["system"] == "lorenz" else None),
            narr_transform(T) if "scale" in transform_info else None,
        ])),
        run_name=out_dir.name,
    )
    return summary


# ─────────────────────────────────────────────────────────────────────────────
# pipeline
# ─────────────────────────────────────────────────────────────────────────────

STAGES = {
    "generate": cmd_generate,
    "denoise": cmd_denoise,
    "train": cmd_train,
    "eval": cmd_eval,
}


def run_stage(name, cfg, out_dir):
    """Run one stage; any failure comes back as StageError naming the stage."""
    logger.info("── %s ──", name)
    try:
        return STAGES[name](cfg, out_dir)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def cmd_pipeline(cfg, out_dir):
    for name in ("generate", "denoise", "train"):
        run_stage(name, cfg, out_dir)
    return run_stage("eval", cfg, out_dir)
