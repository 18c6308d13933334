"""Command-line driver.

Results go to stdout (or ``--output``); logs go to stderr. Exit codes: 0 on
success, 2 for usage errors, 3 for unreadable or malformed files, 4 for
numerical failures.
"""

import argparse
import logging
import logging.config
import sys
from collections.abc import Sequence

from pydantic import ValidationError

from app.cli import commands
from app.core.bootstrap_logging import log_app_configuration
from app.core.config import Settings
from app.core.logging_config import build_logging_config
from app.echo.features import CLASSIFIER_COLUMNS
from app.echo.synth import CARRIER_KHZ
from app.shared.constants import (
    FOREST_MAX_DEPTH,
    FOREST_MIN_SAMPLES_LEAF,
    FOREST_MIN_SAMPLES_SPLIT,
    FOREST_TREES,
    MAX_LM_ITERATIONS,
    NOISE_SIGMA,
    SAMPLING_RATE_KHZ,
    SYNTH_GRAD_SEPARATION,
    SYNTH_TAU,
    TRAIN_FRACTION,
)
from app.shared.exceptions import ApplicationError, FormatError, UsageError

logger = logging.getLogger("app.cli")

EXIT_OK = 0


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Seed of every random draw.")
    common.add_argument("--output", help="Write results here instead of stdout.")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")
    return common


def _fit_parser() -> argparse.ArgumentParser:
    fit = argparse.ArgumentParser(add_help=False)
    group = fit.add_argument_group("detection and regression")
    group.add_argument(
        "--tau",
        type=float,
        help=f"Gradient threshold in envelope units; {SYNTH_TAU:g} when not set.",
    )
    group.add_argument(
        "--grad-sep",
        type=int,
        help=f"Gradient stride in samples; {SYNTH_GRAD_SEPARATION} when not set.",
    )
    group.add_argument(
        "--normalize-gradient",
        action=argparse.BooleanOptionalAction,
        help="Divide the envelope by its maximum before thresholding; raw units when not set.",
    )
    group.add_argument(
        "--min-rel-amplitude",
        type=float,
        help="Discard detections below this fraction of the envelope maximum; off when not set.",
    )
    group.add_argument(
        "--sigma-rule",
        choices=("width", "unit"),
        help="Initial spread from the peak width, or 1 ms (one sample on short frames).",
    )
    group.add_argument(
        "--fe",
        type=float,
        help="Operating frequency (kHz). Defaults to the frame metadata, then 175.",
    )
    group.add_argument(
        "--estimate-fe",
        action="store_true",
        help="Estimate the operating frequency from the spectrum when --fe is not set.",
    )
    group.add_argument("--sigma-init", type=float, help="Initial spread (ms).")
    group.add_argument("--max-iter", type=int, default=MAX_LM_ITERATIONS, help="Per stage.")
    group.add_argument("--plan", choices=("memg", "envelope", "gaussian"), default="memg")
    pre = fit.add_argument_group("conditioning")
    pre.add_argument("--no-bandpass", action="store_true", help="Skip the band-pass filter.")
    pre.add_argument("--bandwidth", type=float, default=1.0, help="Relative pass-band width.")
    pre.add_argument("--gain-a", type=float, help="Power-loss scale a of a / x**b.")
    pre.add_argument("--gain-b", type=float, help="Power-loss exponent b of a / x**b.")
    pre.add_argument("--fit-gain", action="store_true", help="Fit a / x**b to the envelope.")
    pre.add_argument("--blind-zone", type=int, default=0, help="Leading samples to ignore.")
    return fit


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    fitting = _fit_parser()
    parser = argparse.ArgumentParser(
        prog="memg",
        description="Fit oscillating skewed-Gaussian echo models to ultrasound frames.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(
        name: str, help_text: str, *parents: argparse.ArgumentParser
    ) -> argparse.ArgumentParser:
        return sub.add_parser(
            name,
            help=help_text,
            parents=[common, *parents],
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )

    synth = add("synth", "Generate a ground-truth and a noisy synthetic frame.")
    synth.add_argument("--k", type=int, default=4, help="Number of echo components.")
    synth.add_argument("--fs", type=float, default=SAMPLING_RATE_KHZ, help="Sampling rate (kHz).")
    synth.add_argument("--samples", type=int, default=75_000, help="Frame length.")
    synth.add_argument("--noise", type=float, default=NOISE_SIGMA, help="Noise std (units).")
    synth.add_argument("--fe", type=float, default=CARRIER_KHZ, help="Carrier (kHz).")
    synth.add_argument("--no-quantize", action="store_true", help="Keep float samples.")
    synth.set_defaults(handler=commands.cmd_synth)

    fit = add("fit", "Fit every frame of a file or directory.", fitting)
    fit.add_argument("input", help="Frame CSV or directory of frames.")
    fit.set_defaults(handler=commands.cmd_fit)

    denoise = add("denoise", "Reconstruct frames from fitted models.", fitting)
    denoise.add_argument("input", help="Frame CSV or directory of frames.")
    denoise.add_argument("--gt", help="Ground-truth frames; enables PSNR scoring.")
    denoise.add_argument("--from-params", help="Reuse fitted parameters instead of fitting.")
    denoise.set_defaults(handler=commands.cmd_denoise)

    classify = add("classify", "Train and score the echo versus clutter forest.", fitting)
    classify.add_argument(
        "input", nargs="?", help="Feature CSV, or params JSON together with --frames and --gate."
    )
    classify.add_argument("--bundled", action="store_true", help="Use the separable set.")
    classify.add_argument("--frames", help="Frames the params were fitted on.")
    classify.add_argument("--gate", help="Reflector window START:END in ms.")
    classify.add_argument(
        "--columns",
        default=",".join(CLASSIFIER_COLUMNS),
        help="Comma-separated feature columns.",
    )
    classify.add_argument(
        "--exclude", action="append", default=[], help="Drop a feature column (repeatable)."
    )
    classify.add_argument("--trees", type=int, default=FOREST_TREES)
    classify.add_argument("--depth", type=int, default=FOREST_MAX_DEPTH)
    classify.add_argument("--min-leaf", type=int, default=FOREST_MIN_SAMPLES_LEAF)
    classify.add_argument("--min-split", type=int, default=FOREST_MIN_SAMPLES_SPLIT)
    classify.add_argument("--features-per-split", type=int, help="Default: ceil(sqrt(D)).")
    classify.add_argument("--no-bootstrap", action="store_true")
    classify.add_argument("--train-frac", type=float, default=TRAIN_FRACTION)
    classify.add_argument("--cv", type=int, help="Also report k-fold cross-validated F1.")
    classify.add_argument("--save-forest", help="Write the trained forest as JSON.")
    classify.set_defaults(handler=commands.cmd_classify)

    compare = add("compare", "Mean confidences of skewed versus symmetric fits.", fitting)
    compare.add_argument("input", nargs="?", help="Frame CSV or directory of frames.")
    compare.add_argument(
        "--synthetic", type=int, metavar="N", help="Use N generated skewed-echo frames."
    )
    compare.set_defaults(handler=commands.cmd_compare)

    serve = add("serve", "Serve the HTTP API.")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(handler=commands.cmd_serve)

    return parser


def _configure_logging(args: argparse.Namespace, settings: Settings) -> None:
    level = "WARNING" if args.quiet else settings.log_level.value
    logging.config.dictConfig(
        build_logging_config(level, settings.log_format.value, stream="stderr")
    )


def main(argv: Sequence[str] | None = None) -> int:
    """Run one subcommand and return its exit code."""
    args = build_parser().parse_args(argv)
    try:
        settings = Settings()
    except ValidationError as exc:
        print(f"memg: invalid environment: {exc}", file=sys.stderr)
        return UsageError.exit_code
    _configure_logging(args, settings)
    app_config = settings.to_app_config()
    log_app_configuration(app_config, command=args.command)

    try:
        args.handler(args, app_config)
    except ApplicationError as exc:
        logger.error(
            "cli.failed command=%s type=%s reason=%s", args.command, type(exc).__name__, exc
        )
        print(f"memg {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValidationError as exc:
        logger.error("cli.invalid command=%s errors=%d", args.command, exc.error_count())
        print(f"memg {args.command}: {exc}", file=sys.stderr)
        return UsageError.exit_code
    except OSError as exc:
        logger.error("cli.io command=%s reason=%s", args.command, exc)
        print(f"memg {args.command}: {exc}", file=sys.stderr)
        return FormatError.exit_code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
