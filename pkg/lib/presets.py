# ─────────────────────────────────────────────────────────────────────────────
# Parameter schema and built-in experiment presets
# ─────────────────────────────────────────────────────────────────────────────
#
# Defaults reproduce the 10%-noise Lorenz experiment: 30,000 samples on
# t ∈ [0, 20] embedded in 128 dimensions, noise separation with a 10-step
# horizon, a 128-64-32-3 sigmoid autoencoder and 5001 + 1001 epochs.

LORENZ_NORMALIZATION = [1 / 40, 1 / 40, 1 / 40]

# (key, type, default, help)
PARAM_SCHEMA = [
    # ── data ────────────────────────────────────────────────────────────────
    ("system", str, "lorenz", "latent system: lorenz | linear_decay"),
    ("sigma", float, 10.0, "Lorenz σ"),
    ("rho", float, 28.0, "Lorenz ρ"),
    ("beta", float, 8 / 3, "Lorenz β"),
    ("n_samples", int, 30_000, "training samples on [0, t_end]"),
    ("t_end", float, 20.0, "training horizon"),
    ("train_x0", list, [5.0, 5.0, 25.0], "training initial condition"),
    ("test_x0", list, [-8.0, 7.0, 27.0], "evaluation initial condition"),
    ("test_dt", float, 0.01, "evaluation time step"),
    ("test_t_end", float, 20.0, "evaluation horizon"),
    ("input_dim", int, 128, "dimension of the embedded observations"),
    ("latent_dim", int, 3, "latent coordinates"),
    ("linear_embedding", bool, True, "Legendre modes only (false adds cubic modes)"),
    ("normalization", list, LORENZ_NORMALIZATION, "latent scaling before embedding"),
    ("noise_level", float, 0.10, "noise std as a fraction of the signal std"),
    ("seed", int, 0, "seed for noise, initialization and shuffling"),
    # ── noise separation ────────────────────────────────────────────────────
    ("denoise", bool, True, "run noise separation before training"),
    ("denoise_space", str, "latent", "latent: denoise the low-dim series | observed: the embedding"),
    ("denoise_num_dt", int, 10, "prediction horizon in steps"),
    ("denoise_gamma", float, 1e-5, "weight of ½‖N‖²"),
    ("denoise_beta_reg", float, 1e-8, "weight of the network weight penalty"),
    ("denoise_weight_decay", str, "exp", "prediction weights: exp | linear"),
    ("denoise_decay_const", float, 0.9, "base of the exponential prediction weights"),
    ("denoise_hidden_layers", int, 3, "hidden layers of the vector-field network"),
    ("denoise_hidden_width", int, 64, "hidden width of the vector-field network"),
    ("denoise_activation", str, "elu", "hidden activation of the vector-field network"),
    ("denoise_optimizer", str, "lbfgs", "lbfgs | adam"),
    ("denoise_max_iter", int, 50_000, "optimizer iteration cap"),
    ("denoise_gtol", float, 1e-11, "gradient tolerance"),
    ("denoise_ftol", float, 1e-15, "relative decrease tolerance"),
    ("denoise_max_ls", int, 100, "line-search evaluations per iteration"),
    ("denoise_history_size", int, 10, "L-BFGS memory"),
    ("denoise_learning_rate", float, 1e-3, "Adam step size when denoise_optimizer = adam"),
    ("denoise_init_window", int, 7, "moving-average window of the initial noise guess"),
    ("denoise_print_frequency", int, 100, "iterations between progress lines"),
    # ── SINDy library ───────────────────────────────────────────────────────
    ("model_order", int, 1, "1: ż = Θ(z)Φ | 2: z̈ = Θ(z, ż)Φ"),
    ("poly_order", int, 3, "highest monomial degree"),
    ("include_sine", bool, False, "append sin(z_i) columns"),
    ("include_constant", bool, True, "prepend the constant column"),
    # ── autoencoder and training ────────────────────────────────────────────
    ("widths", list, [64, 32], "encoder hidden widths (decoder mirrors them)"),
    ("activation", str, "sigmoid", "hidden activation: elu | sigmoid | tanh | relu | linear"),
    ("coefficient_initialization", str, "constant", "constant | xavier | normal | specified"),
    ("init_coefficients", list, None, "Φ rows for coefficient_initialization = specified"),
    ("loss_weight_decoder", float, 1.0, "λ1, reconstruction"),
    ("loss_weight_sindy_x", float, 1e-4, "λ2, decoded SINDy derivative"),
    ("loss_weight_sindy_z", float, 0.0, "λ3, latent SINDy derivative"),
    ("loss_weight_sindy_regularization", float, 1e-5, "λ4, mean |Φ|"),
    ("max_epochs", int, 5001, "epochs with the full loss"),
    ("refinement_epochs", int, 1001, "epochs without the sparsity penalty"),
    ("batch_size", int, 1024, "minibatch size (last partial batch dropped)"),
    ("learning_rate", float, 1e-3, "Adam step size"),
    ("sequential_thresholding", bool, True, "periodically mask small coefficients"),
    ("coefficient_threshold", float, 0.1, "|Φ| below this is masked"),
    ("threshold_frequency", int, 500, "epochs between thresholding events"),
    ("print_frequency", int, 100, "epochs between history rows"),
    # ── evaluation ──────────────────────────────────────────────────────────
    ("oracle_threshold", float, 0.1, "threshold of the least-squares baseline"),
    ("simulation_horizon", float, 2.0, "time span of the reported trajectory error"),
    ("sweep_levels", list, [0.05, 0.10, 0.15], "noise levels of the sweep subcommand"),
]

CHOICES = {
    "system": ("lorenz", "linear_decay"),
    "denoise_space": ("latent", "observed"),
    "denoise_weight_decay": ("exp", "linear"),
    "denoise_activation": ("elu", "sigmoid", "tanh", "relu", "linear"),
    "denoise_optimizer": ("lbfgs", "adam"),
    "activation": ("elu", "sigmoid", "tanh", "relu", "linear"),
    "coefficient_initialization": ("constant", "xavier", "normal", "specified"),
    "model_order": (1, 2),
}

DEFAULTS = {key: default for key, _, default, _ in PARAM_SCHEMA}
TYPES = {key: kind for key, kind, _, _ in PARAM_SCHEMA}
HELP = {key: text for key, _, _, text in PARAM_SCHEMA}


def _full_scale(level):
    return {
        "description": f"Lorenz at {level:.0%} noise, full-size data and schedule; "
                       "noise separation capped at 2000 L-BFGS iterations.",
        "overrides": {"noise_level": level, "denoise_max_iter": 2000},
    }


PRESETS = {
    "smoke": {
        "description": "Lorenz at 10% noise on 3,000 samples with a short schedule (minutes).",
        "overrides": {
            "n_samples": 3000,
            "test_t_end": 5.0,
            "denoise_max_iter": 300,
            "denoise_hidden_layers": 2,
            "denoise_hidden_width": 32,
            "batch_size": 256,
            "max_epochs": 200,
            "refinement_epochs": 50,
            "threshold_frequency": 50,
            "print_frequency": 20,
        },
    },
    "paper-lorenz-5": _full_scale(0.05),
    "paper-lorenz-10": _full_scale(0.10),
    "paper-lorenz-15": _full_scale(0.15),
    "toy-linear": {
        "description": "ż = −z in two latent coordinates embedded in 8 dimensions, noise free.",
        "overrides": {
            "system": "linear_decay",
            "n_samples": 1000,
            "t_end": 5.0,
            "train_x0": [1.0, -0.5],
            "test_x0": [0.8, 0.6],
            "test_t_end": 5.0,
            "input_dim": 8,
            "latent_dim": 2,
            "normalization": [1.0, 1.0],
            "noise_level": 0.0,
            "denoise": False,
            "poly_order": 1,
            "include_constant": False,
            "widths": [16],
            "activation": "tanh",
            "loss_weight_sindy_z": 1e-2,
            "loss_weight_sindy_x": 1e-1,
            "batch_size": 100,
            "max_epochs": 300,
            "refinement_epochs": 50,
            "threshold_frequency": 100,
            "print_frequency": 50,
            "learning_rate": 5e-3,
        },
    },
}


def get_preset_names() -> dict:
    """Return {name: description} for all presets."""
    return {k: v["description"] for k, v in PRESETS.items()}
