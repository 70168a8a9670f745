"""
IoU and the letterbox transform between source frames and square training images
"""
from typing import Optional, Sequence

import numpy as np

from src.models.geometry import Box, LetterboxTransform, YoloLabel
from src.utils.error_handling import DegenerateBox


def iou(a: Box, b: Box) -> float:
    """Continuous-coordinate intersection over union; 0 when the union is empty"""
    ax1, ay1, ax2, ay2 = a.to_xyxy()
    bx1, by1, bx2, by2 = b.to_xyxy()
    # areas from the same corner differences as the intersection
    area_a = (ax2 - ax1) * (ay2 - ay1)
    area_b = (bx2 - bx1) * (by2 - by1)
    ix = max(0.0, min(ax2, bx2) - max(ax1, bx1))
    iy = max(0.0, min(ay2, by2) - max(ay1, by1))
    inter = ix * iy
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return min(1.0, max(0.0, inter / union))


def boxes_to_xyxy(boxes: Sequence[Box]) -> np.ndarray:
    if not boxes:
        return np.zeros((0, 4), dtype=np.float64)
    return np.asarray([b.to_xyxy() for b in boxes], dtype=np.float64)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of (N, 4) and (M, 4) xyxy arrays -> (N, M)"""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ix = np.clip(np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0]), 0, None)
    iy = np.clip(np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1]), 0, None)
    inter = ix * iy
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(divide='ignore', invalid='ignore'):
        out = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 0.0)
    return np.clip(out, 0.0, 1.0)


def letterbox_for(src_w: int, src_h: int, dst: int, dst_h: Optional[int] = None) -> LetterboxTransform:
    dst_w = dst
    dst_h = dst if dst_h is None else dst_h
    if min(src_w, src_h, dst_w, dst_h) <= 0:
        raise ValueError(f"dimensions must be > 0: src {src_w}x{src_h}, dst {dst_w}x{dst_h}")
    scale = min(dst_w / src_w, dst_h / src_h)
    return LetterboxTransform(
        scale=scale,
        pad_x=(dst_w - scale * src_w) / 2,
        pad_y=(dst_h - scale * src_h) / 2,
        src_w=src_w,
        src_h=src_h,
        dst_w=dst_w,
        dst_h=dst_h,
    )


def _clamp01(value: float) -> float:
    return min(1.0, max(0.0, value))


def box_to_yolo(b: Box, t: LetterboxTransform, class_id: int) -> YoloLabel:
    """Source-frame box -> normalized label on the letterboxed canvas.

    The box is clipped to the source frame first; nothing may land in the padding.
    """
    x1 = min(max(b.left, 0.0), t.src_w)
    y1 = min(max(b.top, 0.0), t.src_h)
    x2 = min(max(b.right, 0.0), t.src_w)
    y2 = min(max(b.bottom, 0.0), t.src_h)
    if x2 - x1 <= 0 or y2 - y1 <= 0:
        raise DegenerateBox(payload={'box': b.to_dict()})

    cx1, cx2 = x1 * t.scale + t.pad_x, x2 * t.scale + t.pad_x
    cy1, cy2 = y1 * t.scale + t.pad_y, y2 * t.scale + t.pad_y
    return YoloLabel(
        class_id=class_id,
        cx=_clamp01((cx1 + cx2) / 2 / t.dst_w),
        cy=_clamp01((cy1 + cy2) / 2 / t.dst_h),
        w=_clamp01((cx2 - cx1) / t.dst_w),
        h=_clamp01((cy2 - cy1) / t.dst_h),
    )


def yolo_to_box(label: YoloLabel, t: LetterboxTransform) -> Box:
    """Inverse of box_to_yolo, back to source-frame pixels"""
    x1, y1, x2, y2 = label.to_xyxy(t.dst_w, t.dst_h)
    return Box.from_xyxy(
        (x1 - t.pad_x) / t.scale,
        (y1 - t.pad_y) / t.scale,
        (x2 - t.pad_x) / t.scale,
        (y2 - t.pad_y) / t.scale,
    )


def label_to_box(label: YoloLabel, width: float, height: float) -> Box:
    """Normalized label -> pixel box on a width x height image"""
    return Box.from_xyxy(*label.to_xyxy(width, height))


__all__ = [
    'iou', 'iou_matrix', 'boxes_to_xyxy', 'letterbox_for', 'box_to_yolo', 'yolo_to_box', 'label_to_box',
]
