"""
pedkit command line.

Data goes to files or stdout as JSON; diagnostics go to stderr.
Exit codes: 0 success, 1 usage error, 2 data error.
"""
import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import structlog
from dotenv import load_dotenv

from config import get_config
from src import __version__
from src.config.settings import AnchorConfig, ConvertConfig, EvalConfig, OCCLUSION_POLICIES, Settings, resolve_jobs
from src.models.dataset import MosaicSpec
from src.monitoring.metrics import export_metrics, track_stage
from src.utils.error_handling import IoFailure, ToolkitError, UsageError, configure_logging, log_error, log_stage_event

logger = structlog.get_logger('pedkit.cli')

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting with status 2"""

    def error(self, message):
        raise UsageError(message, {'usage': self.format_usage().strip()})


class HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    pass


def _emit(data: Any, out=None):
    stream = out or sys.stdout
    stream.write(json.dumps(data, sort_keys=True, indent=2) + '\n')
    stream.flush()


def _split_sets(value: str) -> List[str]:
    return [s for s in value.split(',') if s]


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

@track_stage('info')
def cmd_info(args, settings: Settings) -> int:
    path = Path(args.path)
    suffix = path.suffix.lower()
    if suffix == '.seq':
        from src.formats.seq_codec import image_extension, open_seq_file
        with open_seq_file(path) as handle:
            first = handle.read_frame(0).timestamp if len(handle) else None
            last = handle.read_frame(len(handle) - 1).timestamp if len(handle) else None
            _emit({
                'file': str(path),
                'kind': 'seq',
                'header': handle.header.to_dict(),
                'frames': len(handle),
                'image_extension': image_extension(handle.header.image_format),
                'first_timestamp': first,
                'last_timestamp': last,
            })
    elif suffix == '.vbb':
        vbb = _load_vbb(path)
        _emit({'file': str(path), 'kind': 'vbb', 'retained_fields': sorted(vbb.extras), **vbb.summary()})
    else:
        raise UsageError("info expects a .seq or .vbb file", {'path': str(path)})
    return EXIT_OK


def _load_vbb(path: Path):
    from src.formats.vbb_codec import parse_vbb
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoFailure(payload={'path': str(path), 'reason': str(exc)}) from exc
    return parse_vbb(data)


def _convert_config(args, settings: Settings) -> ConvertConfig:
    base = settings.convert
    splits = dict(base.splits)
    if getattr(args, 'train_sets', None) is not None:
        splits['train'] = tuple(_split_sets(args.train_sets))
    if getattr(args, 'test_sets', None) is not None:
        splits['test'] = tuple(_split_sets(args.test_sets))
    return ConvertConfig(
        stride=args.stride,
        target_size=args.target_size,
        classes=tuple(_split_sets(getattr(args, 'classes', ','.join(base.classes)))),
        ignore_labels=tuple(_split_sets(getattr(args, 'ignore_labels', ','.join(base.ignore_labels)))),
        occlusion_policy=getattr(args, 'occlusion', base.occlusion_policy),
        min_box_height=getattr(args, 'min_box_height', base.min_box_height),
        one_based=not getattr(args, 'zero_based', False),
        val_fraction=getattr(args, 'val_fraction', base.val_fraction),
        seed=args.seed,
        splits=splits,
    )


@track_stage('extract')
def cmd_extract(args, settings: Settings) -> int:
    from src.tasks.dataset_convert import extract_frames
    seq_path = Path(args.seq)
    config = _convert_config(args, settings)
    set_name = args.set or seq_path.parent.name or 'set00'
    video = args.video or seq_path.stem
    extraction = extract_frames(seq_path, config, args.out, set_name, video, args.split)
    _emit({
        'file': str(seq_path),
        'images': [str(f.path) for f in extraction.frames],
        'extracted': len(extraction.frames),
        'skipped': extraction.skipped,
        'transform': extraction.transform.to_dict(),
    })
    return EXIT_OK


@track_stage('vbb_dump')
def cmd_vbb_dump(args, settings: Settings) -> int:
    from src.formats.vbb_codec import lint, vbb_to_json
    vbb = _load_vbb(Path(args.vbb))
    for warning in lint(vbb):
        logger.warning('posv_outside_pos', **warning)
    text = vbb_to_json(vbb, include_extras=args.extras)
    if args.out:
        try:
            Path(args.out).write_text(text, encoding='ascii')
        except OSError as exc:
            raise IoFailure(payload={'path': args.out, 'reason': str(exc)}) from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_convert(args, settings: Settings) -> int:
    from src.tasks.dataset_convert import convert_dataset, verify_dataset
    config = _convert_config(args, settings)
    manifest = convert_dataset(args.root, config, args.out, jobs=args.jobs)
    summary: Dict[str, Any] = {
        'out': str(args.out),
        'images': len(manifest.images),
        'splits': manifest.split_counts(),
        'skipped': len(manifest.skipped),
        'errors': manifest.errors,
    }
    exit_code = EXIT_OK if manifest.ok else EXIT_DATA
    if args.verify:
        problems = verify_dataset(args.out)
        summary['verify_problems'] = problems
        if problems:
            exit_code = EXIT_DATA
    _emit(summary)
    return exit_code


@track_stage('mosaic')
def cmd_mosaic(args, settings: Settings) -> int:
    from src.tasks.augment import load_input, mosaic, sample_inputs, write_mosaic
    try:
        spec = MosaicSpec(size=args.size, center=tuple(args.center) if args.center else None,
                          seed=args.seed, min_side=args.min_side)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if args.images:
        if len(args.images) != 4:
            raise UsageError("--images needs exactly four paths", {'given': len(args.images)})
        paths = [Path(p) for p in args.images]
    elif args.dataset:
        paths = sample_inputs(args.dataset, args.split, args.seed)
    else:
        raise UsageError("give --dataset or --images")

    image, labels = mosaic([load_input(p) for p in paths], spec)
    image_path, label_path = write_mosaic(args.out, f'mosaic_{args.seed}', image, labels)
    _emit({
        'inputs': [str(p) for p in paths],
        'image': str(image_path),
        'labels': str(label_path),
        'n_labels': len(labels),
        'center': list(spec.resolve_center()),
    })
    return EXIT_OK


def cmd_anchors(args, settings: Settings) -> int:
    from src.tasks.anchors import compute_anchors, format_anchors
    config = AnchorConfig(k=args.k, threshold=args.threshold, seed=args.seed,
                          reference_size=args.reference_size, max_iter=args.max_iter)
    anchor_set = compute_anchors(args.labels, config.k, config.seed, config.reference_size,
                                 config.max_iter, config.threshold)
    if args.json:
        _emit({**anchor_set.to_dict(), 'threshold': config.threshold,
               'inertia_history': list(anchor_set.inertia_history)})
    else:
        for line in format_anchors(anchor_set):
            sys.stdout.write(line + '\n')
        sys.stdout.write(f'bpr {anchor_set.bpr:.4f}\n')
    return EXIT_OK


@track_stage('eval')
def cmd_eval(args, settings: Settings) -> int:
    from src.evaluation.metrics import evaluate
    from src.evaluation.report import emit_report, load_detections, load_ground_truth
    config = EvalConfig(iou_threshold=args.iou, image_size=args.image_size,
                        use_ignore=not args.no_ignore, interpolate=not args.raw)
    gts, ignores = load_ground_truth(args.gt, config.image_size, args.ignore_dir)
    detections = load_detections(args.det, config.image_size)
    report = evaluate(detections, gts, ignores, config.iou_threshold, config.interpolate, config.use_ignore)
    paths = emit_report(report, args.out, svg=args.svg)
    _emit({
        'map50': report.map50,
        'map50_95': report.map50_95,
        'map': report.map_at_threshold,
        'f1': report.f1.to_dict(),
        'outputs': paths,
    })
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _common(settings: Settings) -> argparse.ArgumentParser:
    common = ArgumentParser(add_help=False)
    group = common.add_argument_group('runtime')
    group.add_argument('--jobs', type=int, default=0,
                       help='worker processes; 0 falls back to PED_TOOLKIT_JOBS, then the logical core count')
    group.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    group.add_argument('-q', '--quiet', action='store_true', help='errors only')
    group.add_argument('--log-format', choices=('json', 'console'),
                       default='json' if settings.runtime.structured_logging else 'console',
                       help='stderr log renderer')
    group.add_argument('--metrics-file', default=settings.runtime.metrics_file,
                       help='write Prometheus metrics to this file at exit')
    return common


def _add_convert_options(parser: argparse.ArgumentParser, settings: Settings, full: bool):
    base = settings.convert
    parser.add_argument('--stride', type=int, default=base.stride, help='keep every Nth frame')
    parser.add_argument('--target-size', type=int, default=base.target_size, help='square output size in pixels')
    parser.add_argument('--seed', type=int, default=base.seed, help='seed for the validation carve-out')
    if not full:
        return
    parser.add_argument('--classes', default=','.join(base.classes),
                        help='comma separated labels to keep; class id is the position')
    parser.add_argument('--ignore-labels', default=','.join(base.ignore_labels),
                        help='comma separated labels written as ignore regions')
    parser.add_argument('--occlusion', choices=OCCLUSION_POLICIES, default=base.occlusion_policy,
                        help='box used for occluded objects')
    parser.add_argument('--min-box-height', type=float, default=base.min_box_height,
                        help='drop boxes shorter than this many output pixels')
    parser.add_argument('--zero-based', action='store_true',
                        help='treat vbb pos as 0-based instead of 1-based')
    parser.add_argument('--val-fraction', type=float, default=base.val_fraction,
                        help='fraction of train images moved to a val split')
    parser.add_argument('--train-sets', default=','.join(base.splits.get('train', ())),
                        help='comma separated sets for the train split')
    parser.add_argument('--test-sets', default=','.join(base.splits.get('test', ())),
                        help='comma separated sets for the test split')


def build_parser(settings: Settings) -> ArgumentParser:
    common = _common(settings)
    parser = ArgumentParser(prog='pedkit', description='Caltech pedestrian seq/vbb to YOLO toolkit',
                            formatter_class=HelpFormatter)
    parser.add_argument('--version', action='version', version=f'pedkit {__version__}')
    sub = parser.add_subparsers(dest='command', metavar='command', parser_class=ArgumentParser)

    p = sub.add_parser('info', parents=[common], formatter_class=HelpFormatter,
                       help='dump a .seq header or a .vbb summary as JSON')
    p.add_argument('path', help='.seq or .vbb file')
    p.set_defaults(func=cmd_info)

    p = sub.add_parser('extract', parents=[common], formatter_class=HelpFormatter,
                       help='letterbox every Nth frame of one .seq to PNG')
    p.add_argument('seq', help='.seq file')
    p.add_argument('--out', required=True, help='output directory')
    p.add_argument('--set', default=None, help='set name used in image names (default: parent directory)')
    p.add_argument('--video', default=None, help='video name used in image names (default: file stem)')
    p.add_argument('--split', default='train', help='split directory to write into')
    _add_convert_options(p, settings, full=False)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser('vbb-dump', parents=[common], formatter_class=HelpFormatter,
                       help='dump a .vbb file as canonical JSON')
    p.add_argument('vbb', help='.vbb file')
    p.add_argument('--out', default=None, help='write JSON here instead of stdout')
    p.add_argument('--extras', action='store_true', help='also dump uninterpreted fields (log, objInit, ...)')
    p.set_defaults(func=cmd_vbb_dump)

    p = sub.add_parser('convert', parents=[common], formatter_class=HelpFormatter,
                       help='convert a Caltech root into a YOLO dataset')
    p.add_argument('root', help='directory holding setXX/ and annotations/')
    p.add_argument('--out', required=True, help='output dataset directory')
    p.add_argument('--verify', action='store_true', help='parse back every emitted label')
    _add_convert_options(p, settings, full=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser('mosaic', parents=[common], formatter_class=HelpFormatter,
                       help='compose four images and labels into one mosaic')
    p.add_argument('--dataset', default=None, help='converted dataset to sample from')
    p.add_argument('--split', default='train', help='split to sample from')
    p.add_argument('--images', nargs='+', default=None, help='four explicit image paths')
    p.add_argument('--out', required=True, help='output directory')
    p.add_argument('--size', type=int, default=settings.convert.target_size, help='mosaic tile size s')
    p.add_argument('--center', type=float, nargs=2, default=None, metavar=('X', 'Y'),
                   help='mosaic center in [s/2, 3s/2] (default: drawn from the seed)')
    p.add_argument('--min-side', type=float, default=2.0, help='drop boxes thinner than this after clipping')
    p.add_argument('--seed', type=int, default=0, help='seed for sampling and the center')
    p.set_defaults(func=cmd_mosaic)

    p = sub.add_parser('anchors', parents=[common], formatter_class=HelpFormatter,
                       help='k-means anchors over a label directory')
    p.add_argument('labels', help='label directory (searched recursively)')
    p.add_argument('--k', type=int, default=settings.anchors.k, help='number of anchors')
    p.add_argument('--threshold', type=float, default=settings.anchors.threshold,
                   help='side-ratio threshold for best possible recall')
    p.add_argument('--seed', type=int, default=settings.anchors.seed, help='k-means++ seed')
    p.add_argument('--reference-size', type=int, default=settings.anchors.reference_size,
                   help='image size the labels are scaled to')
    p.add_argument('--max-iter', type=int, default=settings.anchors.max_iter, help='iteration cap')
    p.add_argument('--json', action='store_true', help='JSON output instead of w,h lines')
    p.set_defaults(func=cmd_anchors)

    p = sub.add_parser('eval', parents=[common], formatter_class=HelpFormatter,
                       help='precision, recall, F1, AP and mAP of detections')
    p.add_argument('--gt', required=True, help='ground-truth label directory')
    p.add_argument('--det', required=True, help='detection directory, one <image>.txt per image')
    p.add_argument('--ignore-dir', default=None, help='ignore files directory (default: next to labels)')
    p.add_argument('--iou', type=float, default=settings.eval.iou_threshold, help='IoU threshold')
    p.add_argument('--image-size', type=int, default=settings.eval.image_size,
                   help='pixel size normalized coordinates are scaled to')
    p.add_argument('--out', default='.', help='directory for report.json and pr.csv')
    p.add_argument('--raw', action='store_true', help='AP without the precision envelope')
    p.add_argument('--no-ignore', action='store_true', help='count detections on ignore regions as FP')
    p.add_argument('--svg', action='store_true', help='also write pr.svg')
    p.set_defaults(func=cmd_eval)

    return parser


def _effective_config(args, runtime: Dict[str, Any]) -> Dict[str, Any]:
    values = {k: v for k, v in sorted(vars(args).items()) if k != 'func'}
    return {'command': args.command, 'args': values, 'runtime': runtime}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse argv, run one subcommand, return the exit code"""
    load_dotenv()
    settings = Settings(get_config())
    parser = build_parser(settings)
    argv = list(sys.argv[1:] if argv is None else argv)

    if not argv:
        sys.stderr.write(parser.format_usage())
        return EXIT_USAGE

    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc.payload.get('usage', parser.format_usage().strip())}\n")
        sys.stderr.write(f'error: {exc.message}\n')
        return exc.exit_code
    except SystemExit as exc:
        # --help / --version
        return int(exc.code or 0)

    if args.command is None:
        sys.stderr.write(parser.format_usage())
        return EXIT_USAGE

    level = 'DEBUG' if args.verbose else 'ERROR' if args.quiet else settings.runtime.log_level
    configure_logging(level, structured=args.log_format == 'json')
    args.jobs = resolve_jobs(args.jobs, settings.runtime.jobs)
    runtime = {**settings.runtime.to_dict(), 'jobs': args.jobs, 'log_level': level, 'version': __version__}
    logger.info('effective_config', **_effective_config(args, runtime))

    try:
        exit_code = args.func(args, settings)
        log_stage_event(args.command, 'finished', exit_code=exit_code)
        return exit_code
    except ToolkitError as exc:
        log_error(exc, command=args.command)
        sys.stderr.write(f'error: {exc}\n')
        return exc.exit_code
    finally:
        export_metrics(args.metrics_file)


def main():
    sys.exit(run())


__all__ = ['run', 'build_parser', 'main', 'EXIT_OK', 'EXIT_USAGE', 'EXIT_DATA']
