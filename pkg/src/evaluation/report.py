"""
Evaluation inputs and outputs.

Ground truth comes from a converted label directory (``<image>.txt`` plus
optional ``<image>.ignore.txt``), detections from ``<det-dir>/<image>.txt``
with lines ``class confidence cx cy w h``. Everything normalized is mapped to
pixels of an image_size x image_size image before matching.
"""
import csv
import io
import json
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import matplotlib
matplotlib.use('Agg')
from matplotlib.figure import Figure  # noqa: E402

import structlog  # noqa: E402

from src.formats import yolo_labels  # noqa: E402
from src.models.evaluation import Detection, EvalReport, GroundTruth, iou_key  # noqa: E402
from src.utils.error_handling import IoFailure  # noqa: E402
from src.utils.geometry import label_to_box  # noqa: E402

logger = structlog.get_logger(__name__)

REPORT_NAME = 'report.json'
CSV_NAME = 'pr.csv'
SVG_NAME = 'pr.svg'
SVG_HASH_SALT = 'pedkit'


def _label_files(directory: Path) -> List[Path]:
    if not directory.is_dir():
        raise IoFailure("Not a directory", {'path': str(directory)})
    return sorted(p for p in directory.rglob('*.txt') if not p.name.endswith(yolo_labels.IGNORE_SUFFIX))


def load_ground_truth(label_dir, image_size: int = 640,
                      ignore_dir=None) -> Tuple[List[GroundTruth], List[GroundTruth]]:
    """-> (ground truths, ignore regions) in pixels"""
    label_dir = Path(label_dir)
    ignore_root = Path(ignore_dir) if ignore_dir is not None else None
    gts: List[GroundTruth] = []
    ignores: List[GroundTruth] = []
    for path in _label_files(label_dir):
        image_id = path.stem
        for label in yolo_labels.read_label_file(path):
            gts.append(GroundTruth(image_id, label.class_id, label_to_box(label, image_size, image_size)))
        ignore_path = (ignore_root or path.parent) / f'{image_id}{yolo_labels.IGNORE_SUFFIX}'
        if ignore_path.exists():
            for label in yolo_labels.read_label_file(ignore_path):
                ignores.append(GroundTruth(image_id, label.class_id, label_to_box(label, image_size, image_size)))
    return gts, ignores


def load_detections(det_dir, image_size: int = 640) -> List[Detection]:
    detections = []
    for path in _label_files(Path(det_dir)):
        for confidence, label in yolo_labels.read_detection_file(path):
            detections.append(Detection(
                image_id=path.stem,
                class_id=label.class_id,
                confidence=confidence,
                box=label_to_box(label, image_size, image_size),
            ))
    return detections


def render_json(report: EvalReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + '\n'


def render_csv(report: EvalReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(['threshold', 'precision', 'recall'])
    for point in report.curve:
        writer.writerow([repr(point.threshold), repr(point.precision), repr(point.recall)])
    return buffer.getvalue()


def render_svg(report: EvalReport) -> str:
    """PR curve as SVG; fixed hash salt and no date so reruns are identical"""
    fig = Figure(figsize=(5.0, 4.0))
    ax = fig.add_subplot(1, 1, 1)
    recalls = [p.recall for p in report.curve]
    precisions = [p.precision for p in report.curve]
    ax.plot(recalls, precisions, linewidth=1.5, label=f'mAP@{iou_key(report.iou_threshold)} = {report.map_at_threshold:.3f}')
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel('Recall')
    ax.set_ylabel('Precision')
    ax.grid(True, linewidth=0.5, alpha=0.5)
    ax.legend(loc='lower left')
    buffer = io.StringIO()
    with matplotlib.rc_context({'svg.hashsalt': SVG_HASH_SALT, 'svg.fonttype': 'none'}):
        fig.savefig(buffer, format='svg', metadata={'Date': None})
    return buffer.getvalue()


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding='utf-8')
    except OSError as exc:
        raise IoFailure(payload={'path': str(path), 'reason': str(exc)}) from exc


def emit_report(report: EvalReport, out_dir, svg: bool = False) -> Dict[str, Optional[str]]:
    """Write report.json, pr.csv and optionally pr.svg; returns the paths"""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(payload={'path': str(out_dir), 'reason': str(exc)}) from exc

    paths: Dict[str, Optional[str]] = {'report': str(out_dir / REPORT_NAME), 'csv': str(out_dir / CSV_NAME),
                                       'svg': None}
    _write(out_dir / REPORT_NAME, render_json(report))
    _write(out_dir / CSV_NAME, render_csv(report))
    if svg:
        _write(out_dir / SVG_NAME, render_svg(report))
        paths['svg'] = str(out_dir / SVG_NAME)
    logger.info('report_written', **{k: v for k, v in paths.items() if v})
    return paths


__all__ = ['load_ground_truth', 'load_detections', 'render_json', 'render_csv', 'render_svg', 'emit_report']
