"""
Four-image mosaic composition.

The canvas is 2s x 2s filled with gray; each input is resized so its longest
side is s and anchored at the mosaic center in its quadrant (top-left,
top-right, bottom-left, bottom-right). Labels follow the image, are clipped to
the quadrant region and renormalized to the canvas.
"""
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import structlog
from PIL import Image

from src.formats import yolo_labels
from src.models.dataset import MosaicSpec
from src.models.geometry import YoloLabel
from src.utils.error_handling import IoFailure, WrongArity
from src.utils.imaging import load_rgb, resize_array, save_png

logger = structlog.get_logger(__name__)

ImageLike = Union[np.ndarray, Image.Image]
MosaicInput = Tuple[ImageLike, Sequence[YoloLabel]]

Region = Tuple[int, int, int, int]


def _as_rgb(image: ImageLike) -> np.ndarray:
    if isinstance(image, Image.Image):
        return np.asarray(image.convert('RGB'))
    array = np.asarray(image)
    if array.ndim == 2:
        array = np.stack([array] * 3, axis=-1)
    if array.ndim != 3 or array.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {array.shape}")
    return array.astype(np.uint8, copy=False)


def _fit(array: np.ndarray, s: int) -> np.ndarray:
    h, w = array.shape[:2]
    r = s / max(h, w)
    return resize_array(array, max(1, int(round(w * r))), max(1, int(round(h * r))))


def _placement(index: int, xc: int, yc: int, w: int, h: int, s: int) -> Tuple[Region, Region]:
    """-> (canvas region, source region) as x1, y1, x2, y2"""
    if index == 0:
        a = (max(xc - w, 0), max(yc - h, 0), xc, yc)
        b = (w - (a[2] - a[0]), h - (a[3] - a[1]), w, h)
    elif index == 1:
        a = (xc, max(yc - h, 0), min(xc + w, 2 * s), yc)
        b = (0, h - (a[3] - a[1]), min(w, a[2] - a[0]), h)
    elif index == 2:
        a = (max(xc - w, 0), yc, xc, min(2 * s, yc + h))
        b = (w - (a[2] - a[0]), 0, w, min(a[3] - a[1], h))
    else:
        a = (xc, yc, min(xc + w, 2 * s), min(2 * s, yc + h))
        b = (0, 0, min(w, a[2] - a[0]), min(a[3] - a[1], h))
    return a, b


def _place_labels(labels: Sequence[YoloLabel], w: int, h: int, pad_x: int, pad_y: int,
                  region: Region, spec: MosaicSpec) -> List[YoloLabel]:
    canvas = 2 * spec.size
    out = []
    for label in labels:
        x1, y1, x2, y2 = label.to_xyxy(w, h)
        x1 = min(max(x1 + pad_x, region[0]), region[2])
        x2 = min(max(x2 + pad_x, region[0]), region[2])
        y1 = min(max(y1 + pad_y, region[1]), region[3])
        y2 = min(max(y2 + pad_y, region[1]), region[3])
        if x2 - x1 < spec.min_side or y2 - y1 < spec.min_side:
            continue
        out.append(YoloLabel(
            class_id=label.class_id,
            cx=min(1.0, (x1 + x2) / 2 / canvas),
            cy=min(1.0, (y1 + y2) / 2 / canvas),
            w=min(1.0, (x2 - x1) / canvas),
            h=min(1.0, (y2 - y1) / canvas),
        ))
    return out


def mosaic(inputs: Sequence[MosaicInput], spec: MosaicSpec = MosaicSpec()) -> Tuple[np.ndarray, List[YoloLabel]]:
    """Compose four (image, labels) pairs into one 2s x 2s image.

    Labels are normalized to their own image on input and to the canvas on
    output. Boxes thinner than spec.min_side pixels after clipping are dropped.
    """
    if len(inputs) != 4:
        raise WrongArity(payload={'inputs': len(inputs)})

    s = spec.size
    xc, yc = spec.resolve_center()
    canvas = np.full((2 * s, 2 * s, 3), spec.fill, dtype=np.uint8)
    out_labels: List[YoloLabel] = []

    for index, (image, labels) in enumerate(inputs):
        array = _fit(_as_rgb(image), s)
        h, w = array.shape[:2]
        (ax1, ay1, ax2, ay2), (bx1, by1, bx2, by2) = _placement(index, xc, yc, w, h, s)
        canvas[ay1:ay2, ax1:ax2] = array[by1:by2, bx1:bx2]
        out_labels.extend(_place_labels(labels, w, h, ax1 - bx1, ay1 - by1, (ax1, ay1, ax2, ay2), spec))

    logger.debug('mosaic_composed', center=[xc, yc], size=s, labels=len(out_labels))
    return canvas, out_labels


def load_input(image_path, label_path=None) -> MosaicInput:
    """Image plus its label file (missing label file -> no labels)"""
    image_path = Path(image_path)
    if label_path is None:
        label_path = image_path.parent.parent.parent / 'labels' / image_path.parent.name / f'{image_path.stem}.txt'
    label_path = Path(label_path)
    labels = yolo_labels.read_label_file(label_path) if label_path.exists() else []
    return load_rgb(image_path), labels


def sample_inputs(dataset_dir, split: str = 'train', seed: int = 0) -> List[Path]:
    """Four distinct images from a converted split, chosen by seed"""
    images = sorted((Path(dataset_dir) / 'images' / split).glob('*.png'))
    if len(images) < 4:
        raise WrongArity("Split holds fewer than four images", {'split': split, 'images': len(images)})
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(images), size=4, replace=False)
    return [images[int(i)] for i in picks]


def write_mosaic(out_dir, name: str, image: np.ndarray, labels: Sequence[YoloLabel],
                 compress_level: int = 6) -> Tuple[Path, Path]:
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(payload={'path': str(out_dir), 'reason': str(exc)}) from exc
    image_path = out_dir / f'{name}.png'
    label_path = out_dir / f'{name}.txt'
    save_png(Image.fromarray(image), image_path, compress_level)
    yolo_labels.write_label_file(label_path, labels)
    return image_path, label_path


__all__ = ['mosaic', 'load_input', 'sample_inputs', 'write_mosaic']
