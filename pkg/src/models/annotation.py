from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Tuple

from src.models.geometry import Box

# (left, top, width, height) exactly as stored in the vbb file (1-based)
RawBox = Tuple[float, float, float, float]


@dataclass(frozen=True)
class VbbObject:
    """One annotated object in one frame"""
    id: int
    frame: int
    pos: RawBox
    posv: RawBox
    occluded: bool
    locked: bool
    label: str

    @property
    def has_visible_box(self) -> bool:
        return any(v != 0 for v in self.posv)

    def box(self, policy: str = 'full-box', one_based: bool = True) -> Box:
        """Pixel box in 0-based image coordinates.

        This is the only place vbb coordinates are shifted. With the
        visible-box policy, objects without a visible region fall back to pos.
        """
        raw = self.posv if policy == 'visible-box' and self.has_visible_box else self.pos
        offset = 1.0 if one_based else 0.0
        left, top, width, height = raw
        return Box(float(left) - offset, float(top) - offset, max(0.0, float(width)), max(0.0, float(height)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'id': self.id,
            'frame': self.frame,
            'label': self.label,
            'pos': [float(v) for v in self.pos],
            'posv': [float(v) for v in self.posv],
            'occluded': self.occluded,
            'locked': self.locked,
        }


@dataclass(frozen=True)
class VbbFile:
    n_frame: int
    obj_lists: Tuple[Tuple[VbbObject, ...], ...]
    labels: Dict[int, str]
    max_obj: int
    # log, altered, objInit, objStr, ... kept as parsed elements, never interpreted
    extras: Dict[str, Any] = field(default_factory=dict, compare=False)

    def objects(self) -> Iterator[VbbObject]:
        for frame_objects in self.obj_lists:
            yield from frame_objects

    def count_objects(self) -> int:
        return sum(len(frame_objects) for frame_objects in self.obj_lists)

    def tracks(self) -> Dict[int, List[int]]:
        """Track id -> frames it appears in"""
        tracks: Dict[int, List[int]] = {}
        for obj in self.objects():
            tracks.setdefault(obj.id, []).append(obj.frame)
        return tracks

    def summary(self) -> Dict[str, Any]:
        per_label: Dict[str, int] = {}
        for obj in self.objects():
            per_label[obj.label] = per_label.get(obj.label, 0) + 1
        return {
            'n_frame': self.n_frame,
            'max_obj': self.max_obj,
            'n_objects': self.count_objects(),
            'n_tracks': len(self.tracks()),
            'objects_per_label': dict(sorted(per_label.items())),
            'frames_with_objects': sum(1 for frame_objects in self.obj_lists if frame_objects),
        }
