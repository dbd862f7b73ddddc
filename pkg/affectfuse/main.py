"""
Entry point for the affectfuse command-line pipeline.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from affectfuse.affectfuse import logger as app_logger
from affectfuse.affectfuse.commands import EXIT_VALIDATION, HANDLERS, RunContext, with_overrides
from core.settings import load_pipeline_config

_LOGGER = app_logger.get_logger()
EXIT_RUNTIME = 2


def _common_options() -> argparse.ArgumentParser:
    """Options accepted both before and after the subcommand name."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=argparse.SUPPRESS, help="JSON pipeline config.")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Override the root seed.")
    common.add_argument("--corpus", type=Path, default=argparse.SUPPRESS, help="Override paths.corpus.")
    common.add_argument("--work", type=Path, default=argparse.SUPPRESS, help="Override paths.work.")
    common.add_argument("--log-file", type=Path, default=argparse.SUPPRESS)
    common.add_argument("--log-level", default=argparse.SUPPRESS, choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="affectfuse", description="Multimodal emotion recognition pipeline.", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", parents=[common], help="Generate a synthetic corpus.")
    synth.add_argument("--out", help="Corpus directory (defaults to paths.corpus).")

    validate = sub.add_parser("validate", parents=[common], help="Check input files against their formats.")
    validate.add_argument("paths", nargs="*", help="Corpus directories or input files (defaults to paths.corpus).")

    gold = sub.add_parser("goldstd", parents=[common], help="Fuse rater annotations into gold standards.")
    gold.add_argument("--channel", choices=("audio", "video", "both"), default="both")
    gold.add_argument("--majority-fraction", type=float)
    gold.add_argument("--avatar-track", help="Directory of per-subject avatar speech CSVs.")

    sub.add_parser("kappa", parents=[common], help="Inter-rater agreement per subject and country.")

    gaze = sub.add_parser("gazefeat", parents=[common], help="Windowed gaze, head and attention features.")
    gaze.add_argument("--input", help="Trajectory CSV or directory (defaults to the corpus trajectories).")
    gaze.add_argument("--out", help="Directory for per-subject window CSVs.")
    gaze.add_argument("--window-ms", type=int)
    gaze.add_argument("--center-stride-ms", type=int)

    sync = sub.add_parser("sync", parents=[common], help="Assemble a synchronised sample matrix.")
    sync.add_argument("--label-type", choices=("audio", "video"), default="audio")
    sync.add_argument("--modalities", default="A,F,G")
    sync.add_argument("--speaking", choices=("all", "speech", "silence"), default="all")
    sync.add_argument("--refit-enrichment", action="store_true")

    train = sub.add_parser("train", parents=[common], help="Fit one MLP on a sample matrix.")
    train.add_argument("--matrix", required=True)
    train.add_argument("--arch", choices=("100-20", "200-40", "500-100", "L", "M", "H"))
    train.add_argument("--epochs", type=int)
    train.add_argument("--out", help="Model JSON path.")

    evaluate = sub.add_parser("eval", parents=[common], help="Cross-validate the configured experiments.")
    evaluate.add_argument("--only", nargs="*", help="Experiment names to run.")

    stats = sub.add_parser("stats", parents=[common], help="Corrected t-tests with FDR control.")
    stats.add_argument("--reports", help="Directory of experiment report JSON files.")
    stats.add_argument("--q", type=float)
    stats.add_argument("--out")

    report = sub.add_parser("report", parents=[common], help="Render result tables and charts.")
    report.add_argument("--reports")
    report.add_argument("--out")
    return parser


def _context(args: argparse.Namespace) -> RunContext:
    config = load_pipeline_config(getattr(args, "config", None), seed=getattr(args, "seed", None))
    changes = {}
    if hasattr(args, "corpus"):
        changes["corpus_dir"] = Path(args.corpus)
    if hasattr(args, "work"):
        changes["work_dir"] = Path(args.work)
    if changes:
        config = with_overrides(config, **changes)
    log_file = getattr(args, "log_file", None) or config.log_file
    app_logger.configure(log_file, level=getattr(args, "log_level", config.log_level), force=True)
    return RunContext(config)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; 0 on success, 1 on invalid input, 2 on any other failure."""
    args = build_parser().parse_args(argv)
    try:
        ctx = _context(args)
        return HANDLERS[args.command](args, ctx)
    except ValueError as exc:
        _LOGGER.error("{} failed: {}", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception:
        _LOGGER.exception("{} failed with an unexpected error.", args.command)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
