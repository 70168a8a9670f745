"""
Anchor boxes by k-means over label dimensions, plus best possible recall.

Distance between a box and a centroid is 1 - IoU of the two boxes placed on a
common center. Inertia is the sum of squared distances.
"""
from pathlib import Path
from typing import List, Sequence

import numpy as np
import structlog

from src.formats import yolo_labels
from src.models.dataset import AnchorSet
from src.monitoring.metrics import track_stage
from src.utils.error_handling import DegenerateBox, TooFewBoxes

logger = structlog.get_logger(__name__)

DEFAULT_MAX_ITER = 300


def cocentered_iou(boxes: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(N, 2) x (K, 2) widths/heights -> (N, K) IoU of co-centered boxes"""
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 2)
    centroids = np.asarray(centroids, dtype=np.float64).reshape(-1, 2)
    inter = (np.minimum(boxes[:, None, 0], centroids[None, :, 0])
             * np.minimum(boxes[:, None, 1], centroids[None, :, 1]))
    union = (boxes[:, 0] * boxes[:, 1])[:, None] + (centroids[:, 0] * centroids[:, 1])[None, :] - inter
    return inter / union


def _distance(boxes: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return 1.0 - cocentered_iou(boxes, centroids)


def _inertia(boxes: np.ndarray, centroids: np.ndarray, assign: np.ndarray) -> float:
    d = _distance(boxes, centroids)[np.arange(len(boxes)), assign]
    return float(np.sum(d ** 2))


def _seed_centroids(boxes: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding on the squared IoU distance"""
    n = len(boxes)
    chosen = [int(rng.integers(n))]
    for _ in range(1, k):
        d2 = np.min(_distance(boxes, boxes[chosen]) ** 2, axis=1)
        total = float(d2.sum())
        if total <= 0:
            chosen.append(int(rng.integers(n)))
        else:
            chosen.append(int(rng.choice(n, p=d2 / total)))
    return boxes[chosen].copy()


def _validate(boxes, k: int) -> np.ndarray:
    array = np.asarray(boxes, dtype=np.float64).reshape(-1, 2)
    if k < 1:
        raise TooFewBoxes("k must be >= 1", {'k': k})
    if len(array) < k:
        raise TooFewBoxes(payload={'boxes': len(array), 'k': k})
    if np.any(array <= 0) or not np.all(np.isfinite(array)):
        raise DegenerateBox("Box dimensions must be positive and finite")
    # lexicographic (w, h) order makes the result independent of input order
    order = np.lexsort((array[:, 1], array[:, 0]))
    return array[order]


def kmeans_anchors(boxes, k: int = 9, seed: int = 0, reference_size: int = 640,
                   max_iter: int = DEFAULT_MAX_ITER, threshold: float = 4.0) -> AnchorSet:
    """Cluster (w, h) pairs into k anchors, smallest area first.

    A centroid moves to the mean of its boxes only when that does not raise
    the cluster inertia, so the recorded inertia never increases. Empty
    clusters are reseeded on the box farthest from its centroid.
    """
    data = _validate(boxes, k)
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(data, k, rng)
    assign = np.argmin(_distance(data, centroids), axis=1)
    history = [_inertia(data, centroids, assign)]

    for iteration in range(max_iter):
        per_point = _distance(data, centroids)[np.arange(len(data)), assign]
        taken: List[int] = []
        for j in range(k):
            members = data[assign == j]
            if len(members) == 0:
                far = per_point.copy()
                far[taken] = -1.0
                idx = int(np.argmax(far))
                taken.append(idx)
                centroids[j] = data[idx]
                logger.debug('anchor_cluster_reseeded', cluster=j, iteration=iteration)
                continue
            candidate = members.mean(axis=0)
            old = float(np.sum(_distance(members, centroids[j:j + 1]) ** 2))
            new = float(np.sum(_distance(members, candidate[None, :]) ** 2))
            if new <= old:
                centroids[j] = candidate

        new_assign = np.argmin(_distance(data, centroids), axis=1)
        history.append(_inertia(data, centroids, new_assign))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign

    order = np.lexsort((centroids[:, 0], centroids[:, 0] * centroids[:, 1]))
    centroids = centroids[order]
    bpr = best_possible_recall(centroids, data, threshold)
    above = anchors_above_threshold(centroids, data, threshold)
    logger.info('anchors_computed', k=k, boxes=len(data), iterations=len(history) - 1,
                inertia=history[-1], bpr=bpr)
    return AnchorSet(
        anchors=tuple((float(w), float(h)) for w, h in centroids),
        reference_size=reference_size,
        bpr=bpr,
        anchors_above_threshold=above,
        inertia_history=tuple(history),
    )


def _ratio_fit(anchors, boxes, threshold: float) -> np.ndarray:
    anchors = np.asarray(anchors, dtype=np.float64).reshape(-1, 2)
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 2)
    if len(anchors) == 0 or len(boxes) == 0:
        raise ValueError("anchors and boxes must be non-empty")
    r = boxes[:, None, :] / anchors[None, :, :]
    worst = np.maximum(r, 1.0 / r).max(axis=2)
    return worst < threshold


def best_possible_recall(anchors, boxes, threshold: float = 4.0) -> float:
    """Fraction of boxes with some anchor within the side-ratio threshold"""
    return float(_ratio_fit(anchors, boxes, threshold).any(axis=1).mean())


def anchors_above_threshold(anchors, boxes, threshold: float = 4.0) -> float:
    """Mean number of anchors per box within the side-ratio threshold"""
    return float(_ratio_fit(anchors, boxes, threshold).sum(axis=1).mean())


def boxes_from_labels(label_dir, reference_size: int = 640) -> np.ndarray:
    """(w, h) in pixels at reference_size for every label under label_dir"""
    dims = []
    for path in sorted(Path(label_dir).rglob('*.txt')):
        if path.name.endswith(yolo_labels.IGNORE_SUFFIX):
            continue
        for label in yolo_labels.read_label_file(path):
            if label.w > 0 and label.h > 0:
                dims.append((label.w * reference_size, label.h * reference_size))
    return np.asarray(dims, dtype=np.float64).reshape(-1, 2)


@track_stage('anchors')
def compute_anchors(label_dir, k: int = 9, seed: int = 0, reference_size: int = 640,
                    max_iter: int = DEFAULT_MAX_ITER, threshold: float = 4.0) -> AnchorSet:
    boxes = boxes_from_labels(label_dir, reference_size)
    return kmeans_anchors(boxes, k, seed, reference_size, max_iter, threshold)


def format_anchors(anchor_set: AnchorSet, decimals: int = 1) -> Sequence[str]:
    return [f'{w:.{decimals}f},{h:.{decimals}f}' for w, h in anchor_set.anchors]


__all__ = [
    'cocentered_iou', 'kmeans_anchors', 'best_possible_recall', 'anchors_above_threshold',
    'boxes_from_labels', 'compute_anchors', 'format_anchors',
]
