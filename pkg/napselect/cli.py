"""
Command-line entry point: extract -> bank -> layers -> score -> select, plus
statnorm, downsample, normalize, eval and schedule.

Exit status is 0 on success, 1 on usage errors and 2 on data errors. Diagnostics
go to standard error; machine output goes to files or standard output.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from napselect import __version__
from napselect.config import (
    DEFAULT_CONST_LR, DEFAULT_EPOCHS, DEFAULT_EVAL_CLASS, DEFAULT_FADE_LR, DEFAULT_INTENSITY_DIVISOR,
    DEFAULT_IOU_THRESHOLDS, DEFAULT_L2SP_ALPHA, DEFAULT_MIN_BOXES, DEFAULT_TARGET_COUNT, configure_threads,
)
from napselect.exceptions import NapSelectError
from napselect.pipeline.runner import CLOUD_FRAMES, SCHEDULE_KINDS, STRATEGIES, PipelineConfig, PipelineRunner
from napselect.selection import SelectionConfig
from napselect.utils import setup_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    """Raised by the parser instead of exiting, so usage errors map to exit 1."""


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageError(message)


def _comma_list(item_type):
    """argparse type accepting "a,b" as well as a single value."""
    def parse(text: str) -> list:
        try:
            return [item_type(part) for part in text.split(',') if part]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid value list {text!r}") from None
    return parse


def _flatten(groups: List[list]) -> list:
    return [item for group in groups for item in group]


def _add_source(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--dump', type=Path, help='Activation dump (JSONL or NAPD)')
    source.add_argument('--patterns', type=Path, help='Pattern cache directory written by extract')
    parser.add_argument('--layer', type=str, default=None,
                        help='Layer id (default: the only layer, else the top AUROC layer)')


def _add_selection(parser: argparse.ArgumentParser, full: bool) -> None:
    parser.add_argument('--bank', type=Path, default=None,
                        help='Bank file (default: built from the source gt rows of the layer)')
    parser.add_argument('--score-threshold', type=float, default=None,
                        help='Ignore detections scoring below this value')
    if full:
        parser.add_argument('--n', type=int, default=DEFAULT_TARGET_COUNT,
                            help=f'Number of frames to select (default: {DEFAULT_TARGET_COUNT})')
        parser.add_argument('--k', type=int, default=None, help='Proposal size (default: 10 x N)')
        parser.add_argument('--min-boxes', type=int, default=DEFAULT_MIN_BOXES,
                            help=f'Minimum detections for a frame to be eligible (default: {DEFAULT_MIN_BOXES})')
        parser.add_argument('--strategy', choices=STRATEGIES, default='diverse',
                            help='Selection strategy (default: diverse)')
        parser.add_argument('--seed', type=int, default=0, help='Seed for the random strategy (default: 0)')
        parser.add_argument('--frame-list', type=Path, default=None,
                            help='Also write selected frame ids, one per line')


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog='nap', description='Diverse target-frame selection from activation patterns')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('--log-dir', type=Path, default=None, help='Also write a dated log file here')
    parser.add_argument('--log-level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], default='INFO')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')

    p = commands.add_parser('extract', help='Activation dump -> pattern cache')
    p.add_argument('--dump', type=Path, required=True, help='Activation dump (JSONL or NAPD)')
    p.add_argument('--out', type=Path, required=True, help='Pattern cache directory')

    p = commands.add_parser('bank', help='Ground-truth patterns -> bank file')
    _add_source(p)
    p.add_argument('--out', type=Path, required=True, help='Bank file to write')

    p = commands.add_parser('layers', help='Rank layers by TP/FP AUROC')
    _add_source(p)
    p.add_argument('--out', type=Path, default=None, help='JSON output (default: stdout)')

    p = commands.add_parser('score', help='Per-frame entropy of detection distances')
    _add_source(p)
    _add_selection(p, full=False)
    p.add_argument('--out', type=Path, default=None, help='JSON output (default: stdout)')

    p = commands.add_parser('select', help='Select frames for annotation')
    _add_source(p)
    _add_selection(p, full=True)
    p.add_argument('--out', type=Path, default=None, help='JSON output (default: stdout)')

    p = commands.add_parser('statnorm', help='Resize source boxes to target size statistics')
    p.add_argument('--labels', type=Path, required=True, help='Source label directory')
    p.add_argument('--out', type=Path, required=True, help='Output label directory')
    p.add_argument('--source', required=True, help='Source stats: kitti, nuscenes, waymo or a JSON file')
    p.add_argument('--target', required=True, help='Target stats: kitti, nuscenes, waymo or a JSON file')
    p.add_argument('--mode', choices=['additive', 'multiplicative'], default='additive')
    p.add_argument('--clouds', type=Path, default=None, help='Rescale points inside boxes of these clouds')
    p.add_argument('--clouds-out', type=Path, default=None, help='Output directory for rescaled clouds')
    p.add_argument('--cloud-frame', choices=CLOUD_FRAMES, default='lidar',
                   help='Axes of the stored clouds (default: lidar)')

    p = commands.add_parser('downsample', help='Drop beams to match a sparser sensor')
    p.add_argument('--clouds', type=Path, required=True, help='Input cloud directory')
    p.add_argument('--out', type=Path, required=True, help='Output cloud directory')
    p.add_argument('--source-beams', type=int, default=64, help='Beams of the source sensor (default: 64)')
    p.add_argument('--target-beams', type=int, required=True, help='Beams of the target sensor')
    p.add_argument('--beams', type=Path, default=None,
                   help='Directory of <frame>.beam sidecars (default: estimate from elevation)')

    p = commands.add_parser('normalize', help='Scale point intensities into [0, 1]')
    p.add_argument('--clouds', type=Path, required=True, help='Input cloud directory')
    p.add_argument('--out', type=Path, required=True, help='Output cloud directory')
    p.add_argument('--mode', choices=['divisor', 'minmax'], default='divisor')
    p.add_argument('--divisor', type=float, default=DEFAULT_INTENSITY_DIVISOR,
                   help=f'Divisor for divisor mode (default: {DEFAULT_INTENSITY_DIVISOR:g})')

    p = commands.add_parser('eval', help='KITTI-protocol average precision')
    p.add_argument('--gt', type=Path, required=True, help='Ground-truth label directory')
    p.add_argument('--det', type=Path, required=True, help='Detection label directory')
    p.add_argument('--classes', '--class', nargs='+', type=_comma_list(str), default=[[DEFAULT_EVAL_CLASS]],
                   help=f'Classes, space or comma separated (default: {DEFAULT_EVAL_CLASS})')
    p.add_argument('--iou', nargs='+', type=_comma_list(float), default=[list(DEFAULT_IOU_THRESHOLDS)],
                   help='IoU thresholds, space or comma separated (default: 0.5 0.7)')
    p.add_argument('--metric', choices=['3d', 'bev'], default='3d')
    p.add_argument('--interp', choices=['r40', 'r11'], default='r40')
    p.add_argument('--clouds', '--cloud', type=Path, default=None, help='Cloud directory for the minimum-points filter')
    p.add_argument('--min-points', type=int, default=None, help='Drop GT boxes with fewer points')
    p.add_argument('--cloud-frame', choices=CLOUD_FRAMES, default='lidar')
    p.add_argument('--out', type=Path, default=None, help='JSON output (default: stdout)')
    p.add_argument('--pr-csv', type=Path, default=None, help='Also write precision/recall curves as CSV')

    p = commands.add_parser('schedule', help='Learning-rate table and L2-SP penalty')
    p.add_argument('--kind', choices=SCHEDULE_KINDS, default='fade')
    p.add_argument('--lr', type=float, default=None,
                   help=f'Learning rate (default: {DEFAULT_FADE_LR:g} for fade, {DEFAULT_CONST_LR:g} for const)')
    p.add_argument('--epochs', type=int, default=DEFAULT_EPOCHS)
    p.add_argument('--out', type=Path, default=None, help='JSON output (default: stdout)')
    p.add_argument('--csv', type=Path, default=None, help='Also write (epoch, lr) rows as CSV')
    p.add_argument('--weights', type=Path, default=None, help='Current weight file')
    p.add_argument('--reference', type=Path, default=None, help='Pre-trained weight file')
    p.add_argument('--alpha', type=float, default=DEFAULT_L2SP_ALPHA)

    return parser


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    selection = SelectionConfig(
        target_count=getattr(args, 'n', DEFAULT_TARGET_COUNT),
        proposal_size=getattr(args, 'k', None),
        min_boxes=getattr(args, 'min_boxes', DEFAULT_MIN_BOXES),
        score_threshold=getattr(args, 'score_threshold', None),
    )
    return PipelineConfig(
        dump=args.dump,
        patterns=args.patterns,
        layer=args.layer,
        bank=getattr(args, 'bank', None),
        selection=selection,
    )


def run(args: argparse.Namespace, runner: PipelineRunner) -> None:
    command = args.command
    if command == 'extract':
        runner.extract(args.dump, args.out)
    elif command == 'bank':
        runner.bank(_pipeline_config(args), args.out)
    elif command == 'layers':
        runner.layers(_pipeline_config(args), args.out)
    elif command == 'score':
        runner.score(_pipeline_config(args), args.out)
    elif command == 'select':
        runner.select(_pipeline_config(args), args.out, args.frame_list, args.strategy, args.seed)
    elif command == 'statnorm':
        runner.statnorm(args.labels, args.out, args.source, args.target, args.mode,
                        args.clouds, args.clouds_out, args.cloud_frame)
    elif command == 'downsample':
        runner.downsample(args.clouds, args.out, args.source_beams, args.target_beams, args.beams)
    elif command == 'normalize':
        runner.normalize(args.clouds, args.out, args.mode, args.divisor)
    elif command == 'eval':
        runner.evaluate(args.gt, args.det, _flatten(args.classes), _flatten(args.iou), args.metric, args.interp,
                        args.clouds, args.min_points, args.cloud_frame, args.out, args.pr_csv)
    elif command == 'schedule':
        runner.schedule(args.kind, args.lr, args.epochs, args.out, args.csv, args.weights, args.reference, args.alpha)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one subcommand.

    Returns:
        Exit status
    """
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except UsageError:
        return EXIT_USAGE
    except SystemExit as exit_request:
        # --help and --version
        return exit_request.code or EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    logger = setup_logging(log_dir=args.log_dir, level=getattr(logging, args.log_level))
    threads = configure_threads()
    logger.debug(f"Using {threads} threads")

    try:
        run(args, PipelineRunner(logger=logger))
    except (NapSelectError, ValueError, OSError) as error:
        logger.error(f"{args.command} failed: {error}")
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    exit(main())
