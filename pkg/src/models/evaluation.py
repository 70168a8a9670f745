from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from src.models.geometry import Box


def iou_key(threshold: float) -> str:
    """Report key for an IoU threshold: two decimals when exact, otherwise repr"""
    text = f'{threshold:.2f}'
    return text if float(text) == threshold else repr(float(threshold))


@dataclass(frozen=True)
class Detection:
    image_id: str
    class_id: int
    confidence: float
    box: Box

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class GroundTruth:
    image_id: str
    class_id: int
    box: Box


@dataclass(frozen=True)
class MatchResult:
    """Greedy matching outcome for one (image, class), flags in input order"""
    flags: Tuple[str, ...]          # 'tp' | 'fp' | 'ignored'
    matched_gt: Tuple[Optional[int], ...]
    n_gt: int

    @property
    def tp(self) -> int:
        return self.flags.count('tp')

    @property
    def fp(self) -> int:
        return self.flags.count('fp')

    @property
    def fn(self) -> int:
        return self.n_gt - self.tp


@dataclass(frozen=True)
class PrPoint:
    threshold: float
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float

    def __post_init__(self):
        if not (0.0 <= self.precision <= 1.0 and 0.0 <= self.recall <= 1.0):
            raise ValueError("precision/recall outside [0, 1]")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'threshold': self.threshold, 'tp': self.tp, 'fp': self.fp, 'fn': self.fn,
            'precision': self.precision, 'recall': self.recall,
        }


@dataclass(frozen=True)
class F1Point:
    threshold: Optional[float]
    precision: float
    recall: float
    f1: float

    def to_dict(self) -> Dict[str, Any]:
        return {'threshold': self.threshold, 'precision': self.precision, 'recall': self.recall, 'f1': self.f1}


@dataclass
class ClassReport:
    class_id: int
    n_gt: int
    n_det: int
    ap: Dict[float, float]
    best_f1: F1Point
    curve: List[PrPoint] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class_id': self.class_id,
            'n_gt': self.n_gt,
            'n_det': self.n_det,
            'ap': {iou_key(t): v for t, v in sorted(self.ap.items())},
            'best_f1': self.best_f1.to_dict(),
        }


@dataclass
class EvalReport:
    iou_threshold: float
    iou_thresholds: Tuple[float, ...]
    interpolated: bool
    use_ignore: bool
    classes: Dict[int, ClassReport]
    map50: float
    map50_95: float
    map_at_threshold: float
    f1: F1Point
    curve: List[PrPoint]
    counts: Dict[str, int]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'iou_threshold': self.iou_threshold,
            'iou_thresholds': [round(t, 2) for t in self.iou_thresholds],
            'interpolation': 'envelope' if self.interpolated else 'raw',
            'ignore_regions': self.use_ignore,
            'map50': self.map50,
            'map50_95': self.map50_95,
            'map': self.map_at_threshold,
            'f1': self.f1.to_dict(),
            'counts': dict(sorted(self.counts.items())),
            'classes': {str(c): r.to_dict() for c, r in sorted(self.classes.items())},
            'pr_curve': [p.to_dict() for p in self.curve],
        }
