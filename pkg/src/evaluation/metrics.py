"""
Detection metrics: greedy matching, precision/recall curves, F1, AP and mAP.

Curves are ordered by descending confidence threshold, so recall never
decreases along a curve. AP sums (R_k - R_k-1) * P_k with R_-1 = 0, after the
monotone precision envelope unless interpolation is switched off.
"""
from collections import defaultdict
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from src.models.evaluation import ClassReport, Detection, EvalReport, F1Point, GroundTruth, MatchResult, PrPoint
from src.models.geometry import Box
from src.utils.error_handling import EmptyCurve, NoClasses
from src.utils.geometry import boxes_to_xyxy, iou_matrix

logger = structlog.get_logger(__name__)

# 0.50, 0.55, ..., 0.95
IOU_SWEEP: Tuple[float, ...] = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))

BoxLike = Union[Box, Detection, GroundTruth]
Scored = Tuple[float, str]


def _box(item: BoxLike) -> Box:
    return item if isinstance(item, Box) else item.box


def precision(tp: int, fp: int) -> float:
    """TP / (TP + FP); 1.0 when nothing was detected"""
    if tp + fp == 0:
        return 1.0
    return tp / (tp + fp)


def recall(tp: int, fn: int) -> float:
    """TP / (TP + FN); 1.0 when there is nothing to find"""
    if tp + fn == 0:
        return 1.0
    return tp / (tp + fn)


def f1(p: float, r: float) -> float:
    if p + r == 0:
        return 0.0
    return 2 * p * r / (p + r)


def match_detections(dets: Sequence[Detection], gts: Sequence[BoxLike], ignores: Sequence[BoxLike] = (),
                     iou_threshold: float = 0.5) -> MatchResult:
    """Greedy matching for one image and one class.

    Detections are visited by descending confidence (ties keep input order);
    each takes the unmatched ground truth of highest IoU >= threshold. An
    unmatched detection overlapping an ignore region by >= threshold is
    dropped instead of counted as a false positive.
    """
    n = len(dets)
    flags: List[str] = [''] * n
    matched_gt: List[Optional[int]] = [None] * n
    if n == 0:
        return MatchResult(flags=(), matched_gt=(), n_gt=len(gts))

    det_xyxy = boxes_to_xyxy([_box(d) for d in dets])
    ious = iou_matrix(det_xyxy, boxes_to_xyxy([_box(g) for g in gts]))
    ignore_ious = iou_matrix(det_xyxy, boxes_to_xyxy([_box(g) for g in ignores]))
    taken = np.zeros(len(gts), dtype=bool)

    order = sorted(range(n), key=lambda i: -dets[i].confidence)
    for i in order:
        if len(gts):
            candidates = np.where(taken, -1.0, ious[i])
            j = int(np.argmax(candidates))
            if candidates[j] >= iou_threshold:
                taken[j] = True
                flags[i] = 'tp'
                matched_gt[i] = j
                continue
        if len(ignores) and float(ignore_ious[i].max()) >= iou_threshold:
            flags[i] = 'ignored'
        else:
            flags[i] = 'fp'
    return MatchResult(flags=tuple(flags), matched_gt=tuple(matched_gt), n_gt=len(gts))


def pr_curve(scored: Iterable[Scored], n_gt: int) -> List[PrPoint]:
    """One point per distinct confidence, highest threshold first.

    scored holds (confidence, flag) for every detection; ignored ones are
    left out of the counts.
    """
    kept = [(c, flag) for c, flag in scored if flag != 'ignored']
    if not kept:
        return []
    conf = np.asarray([c for c, _ in kept], dtype=np.float64)
    is_tp = np.asarray([flag == 'tp' for _, flag in kept], dtype=np.int64)
    order = np.argsort(-conf, kind='stable')
    conf, is_tp = conf[order], is_tp[order]
    tp = np.cumsum(is_tp)
    fp = np.cumsum(1 - is_tp)

    # last index of each run of equal confidences
    ends = np.flatnonzero(np.append(conf[1:] != conf[:-1], True))
    points = []
    for e in ends:
        t, f = int(tp[e]), int(fp[e])
        points.append(PrPoint(
            threshold=float(conf[e]),
            tp=t,
            fp=f,
            fn=n_gt - t,
            precision=precision(t, f),
            recall=recall(t, n_gt - t),
        ))
    return points


def precision_envelope(values: Sequence[float]) -> np.ndarray:
    """Each precision replaced by the max precision at equal or higher recall"""
    array = np.asarray(values, dtype=np.float64)
    return np.maximum.accumulate(array[::-1])[::-1]


def average_precision(curve: Sequence[PrPoint], interpolate: bool = True) -> float:
    if not curve:
        raise EmptyCurve()
    p = np.asarray([pt.precision for pt in curve], dtype=np.float64)
    r = np.asarray([pt.recall for pt in curve], dtype=np.float64)
    if interpolate:
        p = precision_envelope(p)
    steps = np.diff(np.concatenate([[0.0], r]))
    return float(min(1.0, max(0.0, np.sum(steps * p))))


def mean_average_precision(aps: Union[Sequence[float], Dict[int, float]]) -> float:
    values = list(aps.values()) if isinstance(aps, dict) else list(aps)
    if not values:
        raise NoClasses()
    return float(sum(values) / len(values))


def best_f1(curve: Sequence[PrPoint], n_gt: int = 0) -> F1Point:
    """Highest F1 along the curve; the first (highest threshold) wins ties"""
    if not curve:
        r = recall(0, n_gt)
        return F1Point(threshold=None, precision=1.0, recall=r, f1=f1(1.0, r))
    best = None
    for point in curve:
        score = f1(point.precision, point.recall)
        if best is None or score > best.f1:
            best = F1Point(threshold=point.threshold, precision=point.precision, recall=point.recall, f1=score)
    return best


def _group(items: Iterable, class_of) -> Dict[Tuple[int, str], list]:
    grouped: Dict[Tuple[int, str], list] = defaultdict(list)
    for item in items:
        grouped[(class_of(item), item.image_id)].append(item)
    return grouped


class _Index:
    """Detections, ground truths and ignore regions keyed by (class, image)"""

    def __init__(self, detections: Sequence[Detection], ground_truths: Sequence[GroundTruth],
                 ignores: Sequence[GroundTruth]):
        self.dets = _group(detections, lambda d: d.class_id)
        self.gts = _group(ground_truths, lambda g: g.class_id)
        self.ignores = _group(ignores, lambda g: g.class_id)
        self.classes = sorted({c for c, _ in self.dets} | {c for c, _ in self.gts})
        self.images = sorted({i for _, i in self.dets} | {i for _, i in self.gts} | {i for _, i in self.ignores})

    def scored(self, class_id: int, iou_threshold: float) -> Tuple[List[Scored], int]:
        scored: List[Scored] = []
        n_gt = 0
        for image_id in self.images:
            key = (class_id, image_id)
            dets = self.dets.get(key, [])
            gts = self.gts.get(key, [])
            n_gt += len(gts)
            if not dets:
                continue
            result = match_detections(dets, gts, self.ignores.get(key, []), iou_threshold)
            scored.extend((d.confidence, flag) for d, flag in zip(dets, result.flags))
        return scored, n_gt


def _ap_or_zero(curve: Sequence[PrPoint], interpolate: bool) -> float:
    return average_precision(curve, interpolate) if curve else 0.0


def map_over_iou_range(detections: Sequence[Detection], ground_truths: Sequence[GroundTruth],
                       ignores: Sequence[GroundTruth] = (), interpolate: bool = True,
                       thresholds: Sequence[float] = IOU_SWEEP) -> float:
    """mAP averaged over the IoU sweep 0.50:0.05:0.95"""
    index = _Index(detections, ground_truths, ignores)
    if not index.classes:
        raise NoClasses()
    maps = []
    for t in thresholds:
        aps = []
        for class_id in index.classes:
            scored, n_gt = index.scored(class_id, t)
            aps.append(_ap_or_zero(pr_curve(scored, n_gt), interpolate))
        maps.append(mean_average_precision(aps))
    return float(np.mean(maps))


def evaluate(detections: Sequence[Detection], ground_truths: Sequence[GroundTruth],
             ignores: Sequence[GroundTruth] = (), iou_threshold: float = 0.5,
             interpolate: bool = True, use_ignore: bool = True) -> EvalReport:
    """Full report: per-class AP over the sweep, mAP@.5, mAP@[.5:.95], best F1 and the PR curve"""
    index = _Index(detections, ground_truths, ignores if use_ignore else ())
    if not index.classes:
        raise NoClasses()

    thresholds = tuple(sorted(set(IOU_SWEEP) | {iou_threshold}))
    aps: Dict[float, Dict[int, float]] = {t: {} for t in thresholds}
    classes: Dict[int, ClassReport] = {}
    pooled: List[Scored] = []
    pooled_gt = 0

    for class_id in index.classes:
        n_det = sum(len(v) for (c, _), v in index.dets.items() if c == class_id)
        ap_by_t: Dict[float, float] = {}
        curve: List[PrPoint] = []
        n_gt = 0
        for t in thresholds:
            scored, n_gt = index.scored(class_id, t)
            class_curve = pr_curve(scored, n_gt)
            ap_by_t[t] = _ap_or_zero(class_curve, interpolate)
            aps[t][class_id] = ap_by_t[t]
            if t == iou_threshold:
                curve = class_curve
                pooled.extend(scored)
                pooled_gt += n_gt
        classes[class_id] = ClassReport(
            class_id=class_id, n_gt=n_gt, n_det=n_det, ap=ap_by_t,
            best_f1=best_f1(curve, n_gt), curve=curve,
        )

    headline = pr_curve(pooled, pooled_gt)
    flags = [flag for _, flag in pooled]
    report = EvalReport(
        iou_threshold=iou_threshold,
        iou_thresholds=IOU_SWEEP,
        interpolated=interpolate,
        use_ignore=use_ignore,
        classes=classes,
        map50=mean_average_precision(aps[0.5]),
        map50_95=float(np.mean([mean_average_precision(aps[t]) for t in IOU_SWEEP])),
        map_at_threshold=mean_average_precision(aps[iou_threshold]),
        f1=best_f1(headline, pooled_gt),
        curve=headline,
        counts={
            'images': len(index.images),
            'ground_truths': len(ground_truths),
            'detections': len(detections),
            'ignore_regions': len(ignores) if use_ignore else 0,
            'tp': flags.count('tp'),
            'fp': flags.count('fp'),
            'ignored': flags.count('ignored'),
        },
    )
    logger.info('evaluation_finished', classes=len(classes), map50=report.map50,
                map50_95=report.map50_95, f1=report.f1.f1)
    return report


__all__ = [
    'IOU_SWEEP', 'precision', 'recall', 'f1', 'match_detections', 'pr_curve', 'precision_envelope',
    'average_precision', 'mean_average_precision', 'best_f1', 'map_over_iou_range', 'evaluate',
]
