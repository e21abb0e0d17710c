"""Command-line front end: mkv-bismut {simulate, estimate, verify, suite}."""
import argparse
import logging
import sys

from src.config import get_settings
from src.errors import ConfigInvalid, MkvBismutError
from src.experiments.runner import VERIFY_KINDS, run_experiment, run_simulation, run_suite, run_verification
from src.experiments.schemas import ExperimentConfig, load_config
from src.logging_setup import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2


def _seed(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return seed


def _threads(value: str) -> int:
    threads = int(value)
    if threads < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return threads


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mkv-bismut",
        description="Bismut derivative estimators for path-dependent McKean-Vlasov SDEs",
    )
    parser.add_argument("--log-level", default=None, help="Override MKV_BISMUT_LOG_LEVEL")
    verbs = parser.add_subparsers(dest="verb", required=True)

    def common(sub: argparse.ArgumentParser, config_help: str = "Experiment JSON file") -> None:
        sub.add_argument("--config", required=True, help=config_help)
        sub.add_argument("--out", default=None, help="Output directory")
        sub.add_argument(
            "--threads",
            type=_threads,
            default=None,
            help="Worker threads (default: MKV_BISMUT_THREADS); never changes results",
        )

    simulate = verbs.add_parser("simulate", help="Forward particle solve, paths written to disk")
    common(simulate)
    simulate.add_argument("--seed", type=_seed, default=None, help="Overrides the config seed")

    estimate = verbs.add_parser("estimate", help="Bismut derivative estimate with optional oracles")
    common(estimate)
    estimate.add_argument("--seed", type=_seed, default=None, help="Overrides the config seed")

    verify = verbs.add_parser("verify", help="Numerical checks of the underlying identities")
    verify.add_argument("check", choices=VERIFY_KINDS)
    common(verify)
    verify.add_argument("--seed", type=_seed, default=None, help="Overrides the config seed")

    suite = verbs.add_parser("suite", help="Run every config in a directory and summarize")
    common(suite, config_help="Directory of experiment JSON files")
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def dispatch(args: argparse.Namespace) -> None:
    threads = args.threads if args.threads is not None else get_settings().threads
    if args.verb == "simulate":
        run_simulation(_load(args), args.out, threads)
    elif args.verb == "estimate":
        record = run_experiment(_load(args), args.out, threads)
        estimate = record["estimate"]
        print(f"{estimate['value']:.6g} +/- {estimate['stderr']:.3g}")
    elif args.verb == "verify":
        run_verification(_load(args), args.check, args.out, threads)
    elif args.verb == "suite":
        rows = run_suite(args.config, args.out, threads)
        failed = sum(1 for row in rows if row["status"] != "ok")
        print(f"{len(rows)} experiments, {failed} failed")
    else:
        raise ConfigInvalid("verb", f"unknown verb {args.verb!r}")


def main(argv: list[str] | None = None) -> int:
    """Entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        dispatch(args)
    except MkvBismutError as e:
        logger.error(f"{args.verb} failed: {type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        logger.error(f"{args.verb} crashed: {e}", exc_info=True)
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
