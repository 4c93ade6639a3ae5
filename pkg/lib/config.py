# ─────────────────────────────────────────────────────────────────────────────
# Shared constants: Lorenz defaults, artifact file names, exit codes
# ─────────────────────────────────────────────────────────────────────────────

# Lorenz parameters used throughout the experiments
LORENZ_SIGMA = 10.0
LORENZ_RHO   = 28.0
LORENZ_BETA  = 8.0 / 3.0

TRAIN_X0 = (5.0, 5.0, 25.0)     # training trajectory initial condition
TEST_X0  = (-8.0, 7.0, 27.0)    # evaluation trajectory initial condition
NORMALIZATION = (1 / 40, 1 / 40, 1 / 40)

# Explicit Runge-Kutta 3/8 rule, used by the noise-separating timestepper
RK38_B = (1 / 8, 3 / 8, 3 / 8, 1 / 8)
RK38_A = ((), (1 / 3,), (-1 / 3, 1.0), (1.0, -1.0, 1.0))

# Classical RK4, used to generate reference trajectories
RK4_B = (1 / 6, 1 / 3, 1 / 3, 1 / 6)
RK4_A = ((), (0.5,), (0.0, 0.5), (0.0, 0.0, 1.0))

ACTIVATIONS = ("elu", "sigmoid", "tanh", "relu", "linear")

# Trajectories whose magnitude exceeds this are treated as diverged
BLOWUP_BOUND = 1e6

# ── on-disk layout ──────────────────────────────────────────────────────────
FORMAT_VERSION = 1
MANIFEST_NAME  = "manifest.json"
METADATA_NAME  = "metadata.json"
CONFIG_NAME    = "config.json"
FLOAT_FORMAT   = "%.17g"    # round-trips every float64 exactly

DATA_DIR     = "data"
DENOISE_DIR  = "denoise"
MODEL_DIR    = "model"
EVAL_DIR     = "eval"

# ── CLI exit codes ──────────────────────────────────────────────────────────
EXIT_OK      = 0
EXIT_CONFIG  = 2
EXIT_NUMERIC = 3
EXIT_IO      = 4
