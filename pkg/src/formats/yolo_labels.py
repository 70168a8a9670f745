"""
YOLO label, ignore and detection text files.

Label / ignore line:  ``class cx cy w h``
Detection line:       ``class confidence cx cy w h``
Six decimals, single spaces, ``\\n`` line endings, no trailing whitespace.
"""
from pathlib import Path
from typing import Iterable, List, Tuple

from src.models.geometry import YoloLabel
from src.utils.error_handling import IoFailure, LabelFormatError

IGNORE_SUFFIX = '.ignore.txt'


def format_label_line(label: YoloLabel) -> str:
    return f'{label.class_id} {label.cx:.6f} {label.cy:.6f} {label.w:.6f} {label.h:.6f}'


def parse_label_line(line: str, source=None, line_no=None) -> YoloLabel:
    parts = line.split()
    if len(parts) != 5:
        raise LabelFormatError("Expected 5 fields", {'source': source, 'line': line_no, 'text': line.strip()})
    try:
        class_id = int(parts[0])
        cx, cy, w, h = (float(p) for p in parts[1:])
        return YoloLabel(class_id, cx, cy, w, h)
    except ValueError as exc:
        raise LabelFormatError(str(exc), {'source': source, 'line': line_no}) from exc


def format_detection_line(class_id: int, confidence: float, label: YoloLabel) -> str:
    return f'{class_id} {confidence:.6f} {label.cx:.6f} {label.cy:.6f} {label.w:.6f} {label.h:.6f}'


def parse_detection_line(line: str, source=None, line_no=None) -> Tuple[float, YoloLabel]:
    parts = line.split()
    if len(parts) != 6:
        raise LabelFormatError("Expected 6 fields", {'source': source, 'line': line_no, 'text': line.strip()})
    try:
        confidence = float(parts[1])
        label = YoloLabel(int(parts[0]), *(float(p) for p in parts[2:]))
    except ValueError as exc:
        raise LabelFormatError(str(exc), {'source': source, 'line': line_no}) from exc
    if not 0.0 <= confidence <= 1.0:
        raise LabelFormatError("confidence outside [0, 1]", {'source': source, 'line': line_no})
    return confidence, label


def render_labels(labels: Iterable[YoloLabel]) -> str:
    lines = [format_label_line(label) for label in labels]
    return ''.join(line + '\n' for line in lines)


def write_label_file(path, labels: Iterable[YoloLabel]) -> int:
    """Write labels (possibly none -> zero-byte file); returns the line count"""
    text = render_labels(labels)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(text.encode('ascii'))
    except OSError as exc:
        raise IoFailure(payload={'path': str(path), 'reason': str(exc)}) from exc
    return text.count('\n')


def _lines(path) -> List[Tuple[int, str]]:
    try:
        text = Path(path).read_text(encoding='ascii')
    except OSError as exc:
        raise IoFailure(payload={'path': str(path), 'reason': str(exc)}) from exc
    except UnicodeDecodeError as exc:
        raise LabelFormatError("Label file is not ASCII", {'source': str(path), 'offset': exc.start}) from exc
    return [(i, line) for i, line in enumerate(text.splitlines(), start=1) if line.strip()]


def read_label_file(path) -> List[YoloLabel]:
    return [parse_label_line(line, path, i) for i, line in _lines(path)]


def read_detection_file(path) -> List[Tuple[float, YoloLabel]]:
    return [parse_detection_line(line, path, i) for i, line in _lines(path)]


def label_stem(path: Path) -> str:
    """Image id of a label or ignore file"""
    name = path.name
    if name.endswith(IGNORE_SUFFIX):
        return name[:-len(IGNORE_SUFFIX)]
    return path.stem


__all__ = [
    'IGNORE_SUFFIX', 'format_label_line', 'parse_label_line', 'format_detection_line', 'parse_detection_line',
    'render_labels', 'write_label_file', 'read_label_file', 'read_detection_file', 'label_stem',
]
