# ─────────────────────────────────────────────────────────────────────────────
# Command-line front end: generate | denoise | train | eval | pipeline | sweep
# ─────────────────────────────────────────────────────────────────────────────

import argparse
import logging
import sys
from pathlib import Path

from lib.config import CONFIG_NAME, EXIT_OK
from lib.errors import ConfigError, SindyError, exit_code_for
from lib.pipeline import STAGES, cmd_pipeline, run_stage
from lib.presets import get_preset_names
from lib.sensitivity import check_monotone, run_sweep, sweep_table
from lib.settings import config_table, load_frozen_config, resolve_config, write_frozen_config

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

# stages that read an existing run directory
RESUMING = ("denoise", "train", "eval")


def build_parser():
    presets = get_preset_names()
    parser = argparse.ArgumentParser(
        prog="robust_sindy",
        description="Noise-robust discovery of latent governing equations with a SINDy autoencoder.",
        epilog="presets:\n" + "\n".join(f"  {k:<16} {v}" for k, v in presets.items()),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("command", choices=[*STAGES, "pipeline", "sweep"])
    parser.add_argument("--config", type=Path, help="JSON file of parameter overrides")
    parser.add_argument("--out", type=Path, default=Path("runs/default"), help="run directory")
    parser.add_argument("--preset", choices=sorted(presets), help="built-in parameter set")
    parser.add_argument("--seed", type=int, help="override the seed")
    parser.add_argument("--noise-level", type=float, dest="noise_level", help="override the noise level")
    parser.add_argument("--dry-run", action="store_true", help="print the resolved parameters and exit")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def setup_logging(out_dir=None, verbose=False):
    handlers = [logging.StreamHandler(sys.stdout)]
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(out_dir / "run.log", mode="a"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def close_file_logging():
    """Detach and close the run.log handlers left on the root logger."""
    root = logging.getLogger()
    for handler in [h for h in root.handlers if isinstance(h, logging.FileHandler)]:
        root.removeHandler(handler)
        handler.close()


def _resolve(args):
    """
    (config, frozen). Stages after generate resume from the run directory's
    config.json; flags given alongside it must agree with it.
    """
    overrides = {"seed": args.seed, "noise_level": args.noise_level}
    frozen_path = args.out / CONFIG_NAME
    if args.command not in RESUMING or not frozen_path.exists():
        return resolve_config(args.preset, args.config, overrides), False

    frozen = load_frozen_config(frozen_path)
    if args.preset is None and args.config is None and all(v is None for v in overrides.values()):
        return frozen, True
    requested = resolve_config(args.preset, args.config, overrides)
    changed = sorted(k for k in requested if requested[k] != frozen[k])
    if changed:
        raise ConfigError(f"flags disagree with the frozen configuration on {', '.join(changed)}; "
                          "drop them or use a new --out", source=str(frozen_path))
    return frozen, True


def _run(args):
    cfg, frozen = _resolve(args)
    if args.dry_run:
        print(config_table(cfg).to_string())
        return EXIT_OK

    setup_logging(args.out, args.verbose)
    if frozen:
        logger.info("resuming from %s", args.out / CONFIG_NAME)
    else:
        write_frozen_config(cfg, args.out / CONFIG_NAME)
    logger.info("%s → %s", args.command, args.out)

    if args.command == "pipeline":
        summary = cmd_pipeline(cfg, args.out)
        logger.info("metrics: %s", {k: summary[k] for k in sorted(summary)})
    elif args.command == "sweep":
        frame = run_sweep(cfg, args.out)
        logger.info("sweep results:\n%s", sweep_table(frame).to_string())
        for metric, ok in check_monotone(frame).items():
            logger.log(logging.INFO if ok else logging.WARNING,
                       "%s %s with noise level", metric, "non-decreasing" if ok else "NOT monotone")
    else:
        run_stage(args.command, cfg, args.out)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except SindyError as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    finally:
        close_file_logging()
