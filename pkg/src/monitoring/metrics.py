"""
Prometheus metrics for the conversion pipeline, written to a textfile at exit
"""
import time
from functools import wraps

from prometheus_client import Counter, Histogram, write_to_textfile
from prometheus_client.core import CollectorRegistry

registry = CollectorRegistry()

frames_extracted = Counter(
    'pedkit_frames_extracted_total',
    'Frames decoded, letterboxed and written',
    ['split'],
    registry=registry
)

frames_skipped = Counter(
    'pedkit_frames_skipped_total',
    'Frames skipped during extraction',
    ['reason'],
    registry=registry
)

labels_written = Counter(
    'pedkit_labels_written_total',
    'YOLO label lines written',
    ['split'],
    registry=registry
)

ignore_regions_written = Counter(
    'pedkit_ignore_regions_written_total',
    'Ignore-region lines written',
    ['split'],
    registry=registry
)

videos_converted = Counter(
    'pedkit_videos_total',
    'Videos processed by the converter',
    ['status'],
    registry=registry
)

stage_count = Counter(
    'pedkit_stage_total',
    'Pipeline stage runs',
    ['stage', 'status'],
    registry=registry
)

stage_duration = Histogram(
    'pedkit_stage_duration_seconds',
    'Pipeline stage duration in seconds',
    ['stage'],
    registry=registry
)


def track_stage(stage):
    """Decorator to track stage metrics"""
    def decorator(f):
        @wraps(f)
        def decorated_function(*args, **kwargs):
            start_time = time.perf_counter()
            status = 'success'

            try:
                return f(*args, **kwargs)
            except Exception:
                status = 'failed'
                raise
            finally:
                stage_count.labels(stage=stage, status=status).inc()
                stage_duration.labels(stage=stage).observe(time.perf_counter() - start_time)

        return decorated_function
    return decorator


def record_video_result(split_counts, skipped_reasons, status='success'):
    """Fold one worker's per-video counts into the process registry.

    split_counts maps each split the video's frames landed in to
    (images, labels, ignore regions).
    """
    videos_converted.labels(status=status).inc()
    for split, (extracted, n_labels, n_ignores) in sorted(split_counts.items()):
        frames_extracted.labels(split=split).inc(extracted)
        labels_written.labels(split=split).inc(n_labels)
        ignore_regions_written.labels(split=split).inc(n_ignores)
    for reason in skipped_reasons:
        frames_skipped.labels(reason=reason).inc()


def export_metrics(path):
    """Write the registry in Prometheus text format; no-op without a path"""
    if path:
        write_to_textfile(str(path), registry)


# Export metrics for use in other modules
__all__ = [
    'track_stage',
    'record_video_result',
    'export_metrics',
    'registry'
]
