"""
Typed stage configuration with environment fallbacks and validation
"""
import os
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

import psutil

from src.utils.error_handling import UsageError

OCCLUSION_POLICIES = ('full-box', 'visible-box')

# Caltech convention: set00-set05 train, set06-set10 test
DEFAULT_SPLITS: Dict[str, Tuple[str, ...]] = {
    'train': tuple(f'set{i:02d}' for i in range(0, 6)),
    'test': tuple(f'set{i:02d}' for i in range(6, 11)),
}


@dataclass
class ConvertConfig:
    """seq/vbb -> YOLO conversion settings"""
    stride: int = 30
    target_size: int = 640
    classes: Tuple[str, ...] = ('person',)
    ignore_labels: Tuple[str, ...] = ('people', 'person?', 'person-fa')
    occlusion_policy: str = 'full-box'
    min_box_height: float = 0.0
    one_based: bool = True
    fill: int = 114
    png_compress_level: int = 6
    val_fraction: float = 0.0
    seed: int = 0
    splits: Dict[str, Tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_SPLITS))

    def __post_init__(self):
        self.classes = tuple(self.classes)
        self.ignore_labels = tuple(self.ignore_labels)
        self.splits = {name: tuple(sets) for name, sets in self.splits.items()}
        if self.stride < 1:
            raise UsageError("stride must be >= 1", {'stride': self.stride})
        if self.target_size <= 0:
            raise UsageError("target size must be > 0", {'target_size': self.target_size})
        if self.occlusion_policy not in OCCLUSION_POLICIES:
            raise UsageError("unknown occlusion policy", {'occlusion_policy': self.occlusion_policy})
        if not 0.0 <= self.val_fraction < 1.0:
            raise UsageError("val fraction must be in [0, 1)", {'val_fraction': self.val_fraction})
        if set(self.classes) & set(self.ignore_labels):
            raise UsageError("a label cannot be both kept and ignored")

    def class_id(self, label: str) -> Optional[int]:
        try:
            return self.classes.index(label)
        except ValueError:
            return None

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['classes'] = list(self.classes)
        data['ignore_labels'] = list(self.ignore_labels)
        data['splits'] = {k: list(v) for k, v in sorted(self.splits.items())}
        return data


@dataclass
class AnchorConfig:
    """k-means anchor settings"""
    k: int = 9
    threshold: float = 4.0
    seed: int = 0
    reference_size: int = 640
    max_iter: int = 300

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EvalConfig:
    """Detection evaluation settings"""
    iou_threshold: float = 0.5
    image_size: int = 640
    use_ignore: bool = True
    interpolate: bool = True

    def __post_init__(self):
        if not 0.0 < self.iou_threshold <= 1.0:
            raise UsageError("IoU threshold must be in (0, 1]", {'iou': self.iou_threshold})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RuntimeConfig:
    """Process-level settings"""
    jobs: int = 1
    log_level: str = 'INFO'
    structured_logging: bool = True
    metrics_file: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class Settings:
    """Environment-backed defaults for every stage"""

    def __init__(self, profile=None):
        self.profile = profile
        self.runtime = self._get_runtime_config()
        self.convert = ConvertConfig(
            stride=self._get_int('PED_TOOLKIT_STRIDE', getattr(profile, 'FRAME_STRIDE', 30)),
            target_size=self._get_int('PED_TOOLKIT_TARGET_SIZE', getattr(profile, 'TARGET_SIZE', 640)),
        )
        self.anchors = AnchorConfig(
            k=self._get_int('PED_TOOLKIT_ANCHORS_K', 9),
            threshold=self._get_float('PED_TOOLKIT_ANCHORS_THR', 4.0),
        )
        self.eval = EvalConfig(
            iou_threshold=self._get_float('PED_TOOLKIT_EVAL_IOU', 0.5),
        )

    def _get_bool(self, key: str, default: bool = False) -> bool:
        """Get boolean value from environment"""
        value = os.getenv(key, '').lower()
        return value in ('true', '1', 'yes', 'on') if value else default

    def _get_int(self, key: str, default: int) -> int:
        """Get integer value from environment"""
        try:
            return int(os.getenv(key, str(default)))
        except ValueError:
            return default

    def _get_float(self, key: str, default: float) -> float:
        try:
            return float(os.getenv(key, str(default)))
        except ValueError:
            return default

    def _get_runtime_config(self) -> RuntimeConfig:
        profile_jobs = getattr(self.profile, 'DEFAULT_JOBS', 0)
        return RuntimeConfig(
            jobs=resolve_jobs(None, self._get_int('PED_TOOLKIT_JOBS', profile_jobs)),
            log_level=os.getenv('LOG_LEVEL', getattr(self.profile, 'LOG_LEVEL', 'INFO')),
            structured_logging=self._get_bool(
                'STRUCTURED_LOGGING', getattr(self.profile, 'STRUCTURED_LOGGING', True)),
            metrics_file=os.getenv('PED_TOOLKIT_METRICS_FILE') or getattr(self.profile, 'METRICS_FILE', '') or None,
        )


def resolve_jobs(flag: Optional[int], fallback: int = 0) -> int:
    """--jobs wins, then PED_TOOLKIT_JOBS, then the logical core count"""
    for value in (flag, fallback):
        if value is not None and value > 0:
            return int(value)
    return psutil.cpu_count(logical=True) or 1


__all__ = [
    'ConvertConfig', 'AnchorConfig', 'EvalConfig', 'RuntimeConfig', 'Settings',
    'resolve_jobs', 'DEFAULT_SPLITS', 'OCCLUSION_POLICIES',
]
