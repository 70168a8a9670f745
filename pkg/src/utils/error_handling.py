"""
Centralized error handling and logging for pedkit
"""
import logging
import sys
from typing import Any, Dict, Optional

import structlog


class ToolkitError(Exception):
    """Base toolkit exception; exit_code is what the CLI returns for it"""

    default_message = "Toolkit error"
    exit_code = 2

    def __init__(self, message=None, payload=None, exit_code=None):
        self.message = message or self.default_message
        super().__init__(self.message)
        if exit_code is not None:
            self.exit_code = exit_code
        self.payload: Dict[str, Any] = dict(payload or {})

    def __str__(self):
        if not self.payload:
            return self.message
        context = ", ".join(f"{k}={v}" for k, v in sorted(self.payload.items()))
        return f"{self.message} ({context})"

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error': type(self).__name__,
            'message': self.message,
            'details': self.payload,
        }


class UsageError(ToolkitError):
    """Bad command line"""
    default_message = "Invalid usage"
    exit_code = 1


# ---------------------------------------------------------------------------
# .seq container
# ---------------------------------------------------------------------------

class SeqError(ToolkitError):
    default_message = "Invalid seq file"


class BadMagic(SeqError):
    default_message = "Not a seq file"


class Truncated(SeqError):
    default_message = "Seq file truncated"


class UnsupportedFormat(SeqError):
    default_message = "Unsupported seq image format"


class FrameCountMismatch(SeqError):
    default_message = "Header frame count disagrees with stored frames"


class IndexOutOfRange(SeqError):
    default_message = "Frame index out of range"


class CountMismatch(SeqError):
    default_message = "Header frame count disagrees with payload count"


class InvalidHeader(SeqError):
    default_message = "Invalid seq header"


# ---------------------------------------------------------------------------
# MAT-file / .vbb
# ---------------------------------------------------------------------------

class MatError(ToolkitError):
    default_message = "Invalid MAT-file"


class BadHeader(MatError):
    default_message = "Bad MAT-file header"


class UnsupportedElementType(MatError):
    default_message = "Unsupported MAT-file element"


class DecompressFailure(MatError):
    default_message = "Could not inflate compressed MAT element"


class MatTruncated(MatError):
    default_message = "MAT-file truncated"


class VbbError(ToolkitError):
    default_message = "Invalid vbb annotation"


class MissingField(VbbError):
    default_message = "Required vbb field missing"


class SchemaMismatch(VbbError):
    default_message = "vbb field has unexpected shape or class"


# ---------------------------------------------------------------------------
# Geometry / labels
# ---------------------------------------------------------------------------

class DegenerateBox(ToolkitError):
    default_message = "Box has zero area after clipping"


class LabelFormatError(ToolkitError):
    default_message = "Malformed label line"


# ---------------------------------------------------------------------------
# Conversion
# ---------------------------------------------------------------------------

class DecodeFailure(ToolkitError):
    default_message = "Could not decode frame payload"


class IoFailure(ToolkitError):
    default_message = "I/O failure"


class FrameMismatch(ToolkitError):
    default_message = "Annotation frame count disagrees with video"


class MissingAnnotation(ToolkitError):
    default_message = "No annotation file for video"


# ---------------------------------------------------------------------------
# Augmentation / anchors / evaluation
# ---------------------------------------------------------------------------

class WrongArity(ToolkitError):
    default_message = "Mosaic needs exactly four inputs"


class TooFewBoxes(ToolkitError):
    default_message = "Fewer boxes than clusters"


class EmptyCurve(ToolkitError):
    default_message = "Precision-recall curve is empty"


class NoClasses(ToolkitError):
    default_message = "No classes to average"


def configure_logging(level='INFO', structured=True, stream=None):
    """Configure stdlib logging and structlog; everything goes to stderr"""
    log_level = getattr(logging, str(level).upper(), logging.INFO)

    handler = logging.StreamHandler(stream or sys.stderr)
    handler.setFormatter(logging.Formatter('%(message)s'))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(log_level)

    for logger_name in ('matplotlib', 'PIL'):
        logging.getLogger(logger_name).setLevel(logging.WARNING)

    renderer = (
        structlog.processors.JSONRenderer(sort_keys=True)
        if structured
        else structlog.dev.ConsoleRenderer(colors=False)
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.format_exc_info,
            renderer,
        ],
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=False,
    )


def log_stage_event(stage, status, details: Optional[Dict[str, Any]] = None, **fields):
    """Log a pipeline stage transition"""
    logger = structlog.get_logger('pedkit.stage')
    logger.info(
        'Pipeline stage',
        stage=stage,
        status=status,
        details=details,
        **fields
    )


def log_error(error: ToolkitError, **fields):
    """Log a toolkit error with its context payload"""
    logger = structlog.get_logger('pedkit.error')
    logger.error(
        'command_failed',
        error_type=type(error).__name__,
        error_message=error.message,
        exit_code=error.exit_code,
        payload=error.payload,
        **fields
    )


# Export functions and classes
__all__ = [
    'ToolkitError', 'UsageError',
    'SeqError', 'BadMagic', 'Truncated', 'UnsupportedFormat', 'FrameCountMismatch',
    'IndexOutOfRange', 'CountMismatch', 'InvalidHeader',
    'MatError', 'BadHeader', 'UnsupportedElementType', 'DecompressFailure', 'MatTruncated',
    'VbbError', 'MissingField', 'SchemaMismatch',
    'DegenerateBox', 'LabelFormatError',
    'DecodeFailure', 'IoFailure', 'FrameMismatch', 'MissingAnnotation',
    'WrongArity', 'TooFewBoxes', 'EmptyCurve', 'NoClasses',
    'configure_logging', 'log_stage_event', 'log_error',
]
