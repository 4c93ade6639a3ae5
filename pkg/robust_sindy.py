# ─────────────────────────────────────────────────────────────────────────────
# Robust SINDy Autoencoder | noise separation + latent equation discovery
#
# Story: a low-dimensional system (Lorenz by default) is observed through a
# 128-dimensional embedding and corrupted by measurement noise. A neural
# timestepper separates the noise, an autoencoder finds latent coordinates,
# and sparse regression in those coordinates recovers the governing equations.
#
# Run:  python robust_sindy.py pipeline --preset smoke --out runs/smoke
#       python robust_sindy.py pipeline --preset paper-lorenz-10 --dry-run
#       python robust_sindy.py sweep --preset smoke --out runs/sweep
# Deps: pip install -r requirements.txt
#
# Stages (each reads the previous one's output in --out):
#   generate  noisy training and test trajectories
#   denoise   noise separation, embedding into the observation space
#   train     autoencoder + SINDy coefficients with sequential thresholding
#   eval      metrics, latent alignment, simulation, report.pdf
# ─────────────────────────────────────────────────────────────────────────────

import sys

from lib.cli import main

if __name__ == "__main__":
    sys.exit(main())
