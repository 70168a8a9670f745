"""
Caltech seq/vbb -> YOLO dataset conversion.

Each video is an independent task (frames + labels + ignore files of that
video only); the manifest is merged in video-name order at the end, so the
output does not depend on the number of workers.
"""
import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import structlog
import yaml

from src import __version__
from src.config.settings import ConvertConfig
from src.formats import yolo_labels
from src.formats.seq_codec import SeqHandle, open_seq_file, read_frame
from src.formats.vbb_codec import parse_vbb
from src.models.annotation import VbbFile, VbbObject
from src.models.dataset import ImageEntry, Manifest
from src.models.geometry import LetterboxTransform, YoloLabel
from src.monitoring.metrics import record_video_result, track_stage
from src.utils.error_handling import (
    DecodeFailure,
    DegenerateBox,
    FrameMismatch,
    IoFailure,
    LabelFormatError,
    MissingAnnotation,
    ToolkitError,
    log_stage_event,
)
from src.utils.geometry import box_to_yolo, letterbox_for
from src.utils.imaging import decode_image, letterbox_image, save_png

logger = structlog.get_logger(__name__)

MANIFEST_NAME = 'manifest.json'
DATA_YAML_NAME = 'data.yaml'


def image_name(set_name: str, video: str, frame: int) -> str:
    return f'{set_name}_{video}_{frame:05d}'


def assign_split(base_split: str, name: str, config: ConvertConfig) -> str:
    """Seeded hash carve-out of a validation split from train images"""
    if base_split != 'train' or config.val_fraction <= 0:
        return base_split
    digest = hashlib.sha256(f'{config.seed}:{name}'.encode('ascii')).digest()
    u = int.from_bytes(digest[:8], 'big') / 2 ** 64
    return 'val' if u < config.val_fraction else base_split


def output_dirs(out_dir: Path, split: str) -> Tuple[Path, Path]:
    images = Path(out_dir) / 'images' / split
    labels = Path(out_dir) / 'labels' / split
    try:
        images.mkdir(parents=True, exist_ok=True)
        labels.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(payload={'path': str(out_dir), 'reason': str(exc)}) from exc
    return images, labels


@dataclass(frozen=True)
class ExtractedFrame:
    frame: int
    name: str
    split: str
    path: Path
    set_name: str = "set00"
    video: str = "V000"


@dataclass
class Extraction:
    transform: LetterboxTransform
    frames: List[ExtractedFrame] = field(default_factory=list)
    skipped: List[Dict[str, Any]] = field(default_factory=list)


def extract_frames(seq, config: ConvertConfig, out_dir, set_name: str = 'set00', video: str = 'V000',
                   split: str = 'train') -> Extraction:
    """Decode every stride-th frame, letterbox it and write a PNG.

    Corrupt payloads are skipped and reported, never fatal.
    """
    if not isinstance(seq, SeqHandle):
        with open_seq_file(seq) as handle:
            return extract_frames(handle, config, out_dir, set_name, video, split)
    handle = seq
    header = handle.header
    transform = letterbox_for(header.width, header.height, config.target_size)
    result = Extraction(transform=transform)

    for i in range(0, len(handle), config.stride):
        name = image_name(set_name, video, i)
        frame_split = assign_split(split, name, config)
        images_dir, _ = output_dirs(out_dir, frame_split)
        record = read_frame(handle, i)
        try:
            image = decode_image(record.payload)
        except DecodeFailure as exc:
            logger.warning('frame_skipped', video=f'{set_name}/{video}', frame=i,
                           offset=record.byte_offset, reason=exc.payload.get('reason'))
            result.skipped.append({
                'video': f'{set_name}/{video}', 'frame': i, 'offset': record.byte_offset, 'reason': 'decode',
            })
            continue
        path = images_dir / f'{name}.png'
        save_png(letterbox_image(image, transform, config.fill), path, config.png_compress_level)
        result.frames.append(ExtractedFrame(frame=i, name=name, split=frame_split, path=path,
                                            set_name=set_name, video=video))

    return result


def frame_labels(objects: Iterable[VbbObject], transform: LetterboxTransform,
                 config: ConvertConfig) -> Tuple[List[YoloLabel], List[YoloLabel], List[Dict[str, Any]]]:
    """-> (kept labels, ignore regions, dropped objects)"""
    kept: List[YoloLabel] = []
    ignores: List[YoloLabel] = []
    dropped: List[Dict[str, Any]] = []
    for obj in objects:
        class_id = config.class_id(obj.label)
        is_ignore = obj.label in config.ignore_labels
        if class_id is None and not is_ignore:
            continue
        box = obj.box(config.occlusion_policy, config.one_based)
        try:
            label = box_to_yolo(box, transform, class_id if class_id is not None else 0)
        except DegenerateBox:
            dropped.append({'id': obj.id, 'frame': obj.frame, 'reason': 'degenerate'})
            continue
        if is_ignore:
            ignores.append(label)
        elif label.h * transform.dst_h < config.min_box_height:
            dropped.append({'id': obj.id, 'frame': obj.frame, 'reason': 'min_height'})
        else:
            kept.append(label)
    return kept, ignores, dropped


def convert_annotations(vbb: VbbFile, transform: LetterboxTransform, config: ConvertConfig,
                        frames: Sequence[ExtractedFrame], out_dir,
                        seq_frame_count: Optional[int] = None) -> List[ImageEntry]:
    """Write one label file and one ignore file per extracted frame"""
    if seq_frame_count is not None and vbb.n_frame != seq_frame_count:
        raise FrameMismatch(payload={'vbb_frames': vbb.n_frame, 'seq_frames': seq_frame_count})

    entries = []
    for frame in frames:
        if frame.frame >= vbb.n_frame:
            raise FrameMismatch("Extracted frame has no annotation", {'frame': frame.frame, 'vbb_frames': vbb.n_frame})
        kept, ignores, dropped = frame_labels(vbb.obj_lists[frame.frame], transform, config)
        if dropped:
            logger.debug('objects_dropped', image=frame.name, dropped=dropped)
        _, labels_dir = output_dirs(out_dir, frame.split)
        n_labels = yolo_labels.write_label_file(labels_dir / f'{frame.name}.txt', kept)
        n_ignores = yolo_labels.write_label_file(labels_dir / f'{frame.name}{yolo_labels.IGNORE_SUFFIX}', ignores)
        entries.append(ImageEntry(
            name=frame.name, set_name=frame.set_name, video=frame.video, frame=frame.frame,
            split=frame.split, n_labels=n_labels, n_ignores=n_ignores,
        ))
    return entries


@dataclass(frozen=True)
class VideoJob:
    seq_path: Path
    vbb_path: Path
    set_name: str
    video: str
    split: str
    out_dir: Path
    config: ConvertConfig


@dataclass
class VideoResult:
    key: str
    split: str
    images: List[ImageEntry] = field(default_factory=list)
    skipped: List[Dict[str, Any]] = field(default_factory=list)
    errors: List[Dict[str, Any]] = field(default_factory=list)
    objects_per_label: Dict[str, int] = field(default_factory=dict)
    duration: float = 0.0

    @property
    def status(self) -> str:
        return 'failed' if self.errors else 'success'

    def split_counts(self) -> Dict[str, Tuple[int, int, int]]:
        """split -> (images, labels, ignore regions), by the split each image landed in"""
        counts: Dict[str, Tuple[int, int, int]] = {}
        for entry in self.images:
            images, labels, ignores = counts.get(entry.split, (0, 0, 0))
            counts[entry.split] = (images + 1, labels + entry.n_labels, ignores + entry.n_ignores)
        return counts


def convert_video(job: VideoJob) -> VideoResult:
    """One video end to end; errors are captured in the result"""
    key = f'{job.set_name}/{job.video}'
    result = VideoResult(key=key, split=job.split)
    start = time.perf_counter()
    try:
        if not job.vbb_path.exists():
            raise MissingAnnotation(payload={'video': str(job.seq_path), 'expected': str(job.vbb_path)})
        try:
            vbb = parse_vbb(job.vbb_path.read_bytes())
        except OSError as exc:
            raise IoFailure(payload={'path': str(job.vbb_path), 'reason': str(exc)}) from exc
        with open_seq_file(job.seq_path) as handle:
            if vbb.n_frame != len(handle):
                raise FrameMismatch(payload={'vbb_frames': vbb.n_frame, 'seq_frames': len(handle)})
            extraction = extract_frames(handle, job.config, job.out_dir, job.set_name, job.video, job.split)
            result.images = convert_annotations(vbb, extraction.transform, job.config,
                                                extraction.frames, job.out_dir, len(handle))
        result.skipped = extraction.skipped
        for obj in vbb.objects():
            result.objects_per_label[obj.label] = result.objects_per_label.get(obj.label, 0) + 1
    except ToolkitError as exc:
        result.errors.append({'file': key, 'error': type(exc).__name__, 'message': exc.message,
                              'details': {k: str(v) for k, v in exc.payload.items()}})
    result.duration = time.perf_counter() - start
    return result


def discover_videos(root, config: ConvertConfig, out_dir,
                    split_spec: Optional[Dict[str, Sequence[str]]] = None) -> List[VideoJob]:
    root = Path(root)
    spec = config.splits if split_spec is None else split_spec
    jobs = []
    for split, sets in sorted(spec.items()):
        for set_name in sorted(sets):
            set_dir = root / set_name
            if not set_dir.is_dir():
                logger.warning('set_missing', set=set_name, root=str(root))
                continue
            for seq_path in sorted(set_dir.glob('*.seq')):
                video = seq_path.stem
                jobs.append(VideoJob(
                    seq_path=seq_path,
                    vbb_path=root / 'annotations' / set_name / f'{video}.vbb',
                    set_name=set_name,
                    video=video,
                    split=split,
                    out_dir=Path(out_dir),
                    config=config,
                ))
    return jobs


def _run(jobs: List[VideoJob], workers: int) -> List[VideoResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [convert_video(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(convert_video, jobs))


@track_stage('convert')
def convert_dataset(root, config: ConvertConfig, out_dir,
                    split_spec: Optional[Dict[str, Sequence[str]]] = None, jobs: int = 1) -> Manifest:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    video_jobs = discover_videos(root, config, out_dir, split_spec)
    log_stage_event('convert', 'started', videos=len(video_jobs), workers=jobs)

    results = sorted(_run(video_jobs, jobs), key=lambda r: r.key)
    manifest = Manifest(version=__version__, config=config.to_dict())
    for result in results:
        for entry in result.images:
            manifest.images[entry.name] = entry
        manifest.skipped.extend(result.skipped)
        manifest.errors.extend(result.errors)
        for label, count in result.objects_per_label.items():
            manifest.objects_per_label[label] = manifest.objects_per_label.get(label, 0) + count
        record_video_result(result.split_counts(), [s['reason'] for s in result.skipped], status=result.status)
        log_stage_event('convert_video', result.status, video=result.key,
                        images=len(result.images), skipped=len(result.skipped),
                        duration_seconds=round(result.duration, 3))

    write_manifest(manifest, out_dir / MANIFEST_NAME)
    write_data_yaml(manifest, config, out_dir / DATA_YAML_NAME)
    log_stage_event('convert', 'finished' if manifest.ok else 'finished_with_errors',
                    images=len(manifest.images), errors=len(manifest.errors))
    return manifest


def write_manifest(manifest: Manifest, path):
    text = json.dumps(manifest.to_dict(), sort_keys=True, indent=2) + '\n'
    try:
        Path(path).write_text(text, encoding='utf-8')
    except OSError as exc:
        raise IoFailure(payload={'path': str(path), 'reason': str(exc)}) from exc


def write_data_yaml(manifest: Manifest, config: ConvertConfig, path):
    """YOLOv5 dataset config pointing at the emitted splits"""
    splits = sorted({entry.split for entry in manifest.images.values()} | set(config.splits))
    document: Dict[str, Any] = {'path': '.'}
    for split in splits:
        document[split] = f'images/{split}'
    if 'val' not in document and 'test' in document:
        document['val'] = 'images/test'
    document['nc'] = len(config.classes)
    document['names'] = list(config.classes)
    Path(path).write_text(yaml.safe_dump(document, sort_keys=True, default_flow_style=False), encoding='utf-8')


def verify_dataset(out_dir) -> List[Dict[str, Any]]:
    """Parse back every label and check image/label pairing"""
    out_dir = Path(out_dir)
    problems: List[Dict[str, Any]] = []
    images_root = out_dir / 'images'
    if not images_root.is_dir():
        return problems
    for split_dir in sorted(p for p in images_root.iterdir() if p.is_dir()):
        labels_dir = out_dir / 'labels' / split_dir.name
        image_names = {p.stem for p in split_dir.glob('*.png')}
        label_names = {p.stem for p in labels_dir.glob('*.txt') if not p.name.endswith(yolo_labels.IGNORE_SUFFIX)}
        for name in sorted(image_names - label_names):
            problems.append({'split': split_dir.name, 'image': name, 'problem': 'missing label file'})
        for name in sorted(label_names - image_names):
            problems.append({'split': split_dir.name, 'image': name, 'problem': 'label without image'})
        for path in sorted(labels_dir.glob('*.txt')):
            try:
                yolo_labels.read_label_file(path)
            except LabelFormatError as exc:
                problems.append({'split': split_dir.name, 'image': yolo_labels.label_stem(path),
                                 'problem': str(exc)})
    return problems


__all__ = [
    'image_name', 'assign_split', 'extract_frames', 'frame_labels', 'convert_annotations',
    'convert_video', 'discover_videos', 'convert_dataset', 'write_manifest', 'verify_dataset',
    'ExtractedFrame', 'Extraction', 'VideoJob', 'VideoResult',
]
