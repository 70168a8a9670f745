from dataclasses import dataclass
from typing import Tuple


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in pixels, (left, top) corner plus size"""
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if self.width < 0 or self.height < 0:
            raise ValueError(f"negative box size: {self.width}x{self.height}")

    @classmethod
    def from_xyxy(cls, x1: float, y1: float, x2: float, y2: float) -> 'Box':
        return cls(x1, y1, max(0.0, x2 - x1), max(0.0, y2 - y1))

    def to_xyxy(self) -> Tuple[float, float, float, float]:
        return (self.left, self.top, self.left + self.width, self.top + self.height)

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    def to_dict(self):
        return {'left': self.left, 'top': self.top, 'width': self.width, 'height': self.height}


@dataclass(frozen=True)
class LetterboxTransform:
    """Aspect-preserving resize onto a dst canvas with centered padding"""
    scale: float
    pad_x: float
    pad_y: float
    src_w: int
    src_h: int
    dst_w: int
    dst_h: int

    @property
    def content_size(self) -> Tuple[int, int]:
        """Resized frame size in whole pixels"""
        return (int(round(self.src_w * self.scale)), int(round(self.src_h * self.scale)))

    @property
    def paste_offset(self) -> Tuple[int, int]:
        """Top-left pixel where the resized frame is pasted"""
        return (int(round(self.pad_x - 0.1)), int(round(self.pad_y - 0.1)))

    def to_dict(self):
        return {
            'scale': self.scale, 'pad_x': self.pad_x, 'pad_y': self.pad_y,
            'src_w': self.src_w, 'src_h': self.src_h, 'dst_w': self.dst_w, 'dst_h': self.dst_h,
        }


@dataclass(frozen=True)
class YoloLabel:
    """Normalized center/size label; coordinates are fractions of the image"""
    class_id: int
    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.class_id < 0:
            raise ValueError(f"class id must be >= 0, got {self.class_id}")
        for name in ('cx', 'cy', 'w', 'h'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")

    def to_xyxy(self, width: float, height: float) -> Tuple[float, float, float, float]:
        """Corners in pixels of a width x height image"""
        return (
            (self.cx - self.w / 2) * width,
            (self.cy - self.h / 2) * height,
            (self.cx + self.w / 2) * width,
            (self.cy + self.h / 2) * height,
        )
