from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class MosaicSpec:
    """Mosaic settings; center is sampled from the seed when not given"""
    size: int = 640
    center: Optional[Tuple[float, float]] = None
    seed: int = 0
    min_side: float = 2.0
    fill: int = 114

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError(f"mosaic size must be > 0, got {self.size}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.center is not None:
            lo, hi = self.size / 2, 3 * self.size / 2
            if not all(lo <= c <= hi for c in self.center):
                raise ValueError(f"center {self.center} outside [{lo}, {hi}]")

    def resolve_center(self) -> Tuple[int, int]:
        if self.center is not None:
            return int(round(self.center[0])), int(round(self.center[1]))
        rng = np.random.default_rng(self.seed)
        lo, hi = self.size / 2, 3 * self.size / 2
        return int(rng.uniform(lo, hi)), int(rng.uniform(lo, hi))


@dataclass(frozen=True)
class AnchorSet:
    """k anchor (w, h) pairs at reference_size, smallest area first"""
    anchors: Tuple[Tuple[float, float], ...]
    reference_size: int
    bpr: float
    anchors_above_threshold: float = 0.0
    inertia_history: Tuple[float, ...] = ()

    def __post_init__(self):
        if not self.anchors:
            raise ValueError("anchor set needs k >= 1")
        if any(w <= 0 or h <= 0 for w, h in self.anchors):
            raise ValueError("anchor sides must be > 0")
        areas = [w * h for w, h in self.anchors]
        if areas != sorted(areas):
            raise ValueError("anchors must be sorted by area")

    @property
    def k(self) -> int:
        return len(self.anchors)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.anchors, dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'k': self.k,
            'reference_size': self.reference_size,
            'anchors': [[w, h] for w, h in self.anchors],
            'bpr': self.bpr,
            'anchors_above_threshold': self.anchors_above_threshold,
            'inertia': self.inertia_history[-1] if self.inertia_history else None,
            'iterations': max(0, len(self.inertia_history) - 1),
        }


@dataclass(frozen=True)
class ImageEntry:
    name: str
    set_name: str
    video: str
    frame: int
    split: str
    n_labels: int = 0
    n_ignores: int = 0


@dataclass
class Manifest:
    """Conversion summary written as manifest.json"""
    version: str
    config: Dict[str, Any]
    images: Dict[str, ImageEntry] = field(default_factory=dict)
    skipped: List[Dict[str, Any]] = field(default_factory=list)
    errors: List[Dict[str, Any]] = field(default_factory=list)
    objects_per_label: Dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors

    def split_counts(self) -> Dict[str, Dict[str, int]]:
        counts: Dict[str, Dict[str, int]] = {}
        for entry in self.images.values():
            split = counts.setdefault(entry.split, {'images': 0, 'labels': 0, 'objects': 0, 'ignore_regions': 0})
            split['images'] += 1
            # every image has exactly one label file, possibly empty
            split['labels'] += 1
            split['objects'] += entry.n_labels
            split['ignore_regions'] += entry.n_ignores
        return dict(sorted(counts.items()))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'version': self.version,
            'config': self.config,
            'splits': self.split_counts(),
            'images': {
                name: {'set': e.set_name, 'video': e.video, 'frame': e.frame, 'split': e.split}
                for name, e in sorted(self.images.items())
            },
            'objects_per_label': dict(sorted(self.objects_per_label.items())),
            'skipped': sorted(self.skipped, key=lambda s: (s.get('video', ''), s.get('frame', -1))),
            'errors': sorted(self.errors, key=lambda e: (e.get('file', ''), e.get('error', ''))),
        }
