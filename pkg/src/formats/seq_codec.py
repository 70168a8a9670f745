"""
Reader (and fixture writer) for Norpix .seq video containers.

Layout (little-endian, see docs/FORMATS.md):
    Bytes 0-3:      magic          0xFEED
    Bytes 4-27:     name           "Norpix seq" as UTF-16LE, NUL padded
    Bytes 28-31:    version        int32
    Bytes 32-35:    header size    uint32, always 1024
    Bytes 36-547:   description    UTF-16LE text, NUL padded
    Bytes 548-583:  width, height, bit depth, real bit depth, image size,
                    image format, frame count, origin, true image size (uint32 each)
    Bytes 584-591:  fps            float64
    Bytes 592-1023: reserved       zero

Frames of compressed formats follow the header as records:
    uint32 length (payload size + 4), payload, uint32 seconds,
    uint16 milliseconds, uint16 microseconds
"""
import mmap
import struct
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple, Union

import structlog

from src.models.sequence import FrameRecord, SeqHeader
from src.utils.error_handling import (
    BadMagic,
    CountMismatch,
    FrameCountMismatch,
    IndexOutOfRange,
    InvalidHeader,
    IoFailure,
    Truncated,
    UnsupportedFormat,
)

logger = structlog.get_logger(__name__)

MAGIC = 0xFEED
HEADER_SIZE = 1024
NAME = 'Norpix seq'
NAME_FIELD_SIZE = 24
DESCRIPTION_OFFSET = 36
DESCRIPTION_SIZE = 512
PARAMS_OFFSET = 548
# width, height, bit_depth, bit_depth_real, image_size_bytes, image_format,
# frame_count, origin, true_image_size
PARAMS_FORMAT = '<9I'
FPS_OFFSET = 584

# length prefix + timestamp (uint32 s, uint16 ms, uint16 us)
RECORD_PREFIX = 4
RECORD_SUFFIX = 8
RECORD_OVERHEAD = RECORD_PREFIX + RECORD_SUFFIX

JPEG_FORMATS = {102: 'jpg', 201: 'jpg'}
PNG_FORMATS = {1: 'png', 2: 'png'}
SUPPORTED_FORMATS = {**JPEG_FORMATS, **PNG_FORMATS}
SUPPORTED_VERSIONS = (3, 4)

JPEG_SOI = b'\xff\xd8'
PNG_SIGNATURE = b'\x89PNG\r\n\x1a\n'

Buffer = Union[bytes, bytearray, memoryview, mmap.mmap]


def image_extension(image_format: int) -> str:
    return SUPPORTED_FORMATS[image_format]


def _decode_text(raw: bytes) -> str:
    return raw.decode('utf-16-le', errors='replace').split('\x00', 1)[0]


def _encode_text(text: str, size: int, field_name: str) -> bytes:
    encoded = text.encode('utf-16-le')
    if len(encoded) > size:
        raise InvalidHeader(f"{field_name} longer than {size} bytes", {'length': len(encoded)})
    return encoded.ljust(size, b'\x00')


def parse_header(data: Buffer) -> SeqHeader:
    if len(data) < HEADER_SIZE:
        if len(data) >= 4 and struct.unpack_from('<I', data, 0)[0] != MAGIC:
            raise BadMagic(payload={'magic': hex(struct.unpack_from('<I', data, 0)[0])})
        raise Truncated("Seq header shorter than 1024 bytes", {'size': len(data)})

    magic, = struct.unpack_from('<I', data, 0)
    if magic != MAGIC:
        raise BadMagic(payload={'magic': hex(magic), 'offset': 0})

    version, = struct.unpack_from('<i', data, 28)
    (width, height, bit_depth, bit_depth_real, image_size_bytes,
     image_format, frame_count, _origin, true_image_size) = struct.unpack_from(PARAMS_FORMAT, data, PARAMS_OFFSET)
    fps, = struct.unpack_from('<d', data, FPS_OFFSET)
    description = _decode_text(bytes(data[DESCRIPTION_OFFSET:DESCRIPTION_OFFSET + DESCRIPTION_SIZE]))

    if image_format not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(payload={'image_format': image_format, 'offset': PARAMS_OFFSET + 20})
    if version not in SUPPORTED_VERSIONS:
        raise UnsupportedFormat("Unsupported seq version", {'version': version, 'offset': 28})
    if width == 0 or height == 0:
        raise InvalidHeader("Zero frame dimension", {'width': width, 'height': height})

    return SeqHeader(
        magic=magic,
        version=version,
        description=description,
        width=width,
        height=height,
        bit_depth=bit_depth,
        bit_depth_real=bit_depth_real,
        image_size_bytes=image_size_bytes,
        image_format=image_format,
        frame_count=frame_count,
        true_image_size=true_image_size,
        fps=fps,
    )


def scan_frames(data: Buffer) -> Tuple[Tuple[int, int], ...]:
    """(byte_offset, payload_size) of every record after the header"""
    index: List[Tuple[int, int]] = []
    offset = HEADER_SIZE
    size = len(data)
    while offset < size:
        if offset + RECORD_PREFIX > size:
            raise Truncated("Record length prefix past end of file", {'offset': offset, 'frame': len(index)})
        length, = struct.unpack_from('<I', data, offset)
        if length < RECORD_PREFIX:
            raise Truncated("Record length smaller than its own prefix", {'offset': offset, 'length': length})
        end = offset + length + RECORD_SUFFIX
        if end > size:
            raise Truncated(
                "Frame record runs past end of file",
                {'offset': offset, 'frame': len(index), 'record_end': end, 'file_size': size},
            )
        index.append((offset, length - RECORD_PREFIX))
        offset = end
    return tuple(index)


class SeqHandle:
    """Parsed header plus frame index over an immutable buffer.

    Reads never mutate the handle, so one handle may serve many threads.
    """

    def __init__(self, header: SeqHeader, index: Tuple[Tuple[int, int], ...], buffer: Buffer, source=None):
        self.header = header
        self.index = index
        self._buffer = buffer
        self.source = source

    def __len__(self):
        return len(self.index)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if isinstance(self._buffer, mmap.mmap) and not self._buffer.closed:
            self._buffer.close()

    def read_frame(self, i: int) -> FrameRecord:
        return read_frame(self, i)

    def iter_frames(self, stride: int = 1) -> Iterator[FrameRecord]:
        return iter_frames(self, stride)


def open_seq(data: Buffer, source=None) -> SeqHandle:
    header = parse_header(data)
    index = scan_frames(data)
    if len(index) != header.frame_count:
        raise FrameCountMismatch(payload={
            'header_frame_count': header.frame_count,
            'stored_frames': len(index),
            'source': source,
        })
    logger.debug('seq_opened', source=str(source) if source else None,
                 frames=len(index), width=header.width, height=header.height)
    return SeqHandle(header, index, data, source)


def open_seq_file(path) -> SeqHandle:
    """Memory-map a .seq file and open it"""
    path = Path(path)
    try:
        size = path.stat().st_size
        if size < HEADER_SIZE:
            return open_seq(path.read_bytes(), source=path)
        with open(path, 'rb') as f:
            buffer = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
    except OSError as exc:
        raise IoFailure(payload={'path': str(path), 'reason': str(exc)}) from exc
    try:
        return open_seq(buffer, source=path)
    except Exception:
        buffer.close()
        raise


def read_frame(handle: SeqHandle, i: int) -> FrameRecord:
    if not 0 <= i < len(handle.index):
        raise IndexOutOfRange(payload={'index': i, 'frame_count': len(handle.index), 'source': handle.source})
    offset, payload_size = handle.index[i]
    start = offset + RECORD_PREFIX
    payload = bytes(handle._buffer[start:start + payload_size])
    seconds, milliseconds, microseconds = struct.unpack_from('<IHH', handle._buffer, start + payload_size)
    return FrameRecord(
        index=i,
        byte_offset=offset,
        payload_size=payload_size,
        seconds=seconds,
        milliseconds=milliseconds,
        microseconds=microseconds,
        payload=payload,
    )


def iter_frames(handle: SeqHandle, stride: int = 1) -> Iterator[FrameRecord]:
    for i in range(0, len(handle.index), stride):
        yield read_frame(handle, i)


def _check_signature(image_format: int, payload: bytes, i: int):
    if image_format in JPEG_FORMATS and not payload.startswith(JPEG_SOI):
        raise InvalidHeader("JPEG payload without SOI marker", {'frame': i})
    if image_format in PNG_FORMATS and not payload.startswith(PNG_SIGNATURE):
        raise InvalidHeader("PNG payload without signature", {'frame': i})


def write_seq(header: SeqHeader, payloads: Sequence[bytes],
              timestamps: Sequence[Tuple[int, int, int]] = ()) -> bytes:
    """Serialize a seq file; meant for test fixtures, not external consumers"""
    if header.frame_count != len(payloads):
        raise CountMismatch(payload={'frame_count': header.frame_count, 'payloads': len(payloads)})
    if header.width <= 0 or header.height <= 0:
        raise InvalidHeader("Frame dimensions must be > 0", {'width': header.width, 'height': header.height})
    if header.image_format not in SUPPORTED_FORMATS:
        raise UnsupportedFormat(payload={'image_format': header.image_format})
    if header.version not in SUPPORTED_VERSIONS:
        raise UnsupportedFormat("Unsupported seq version", {'version': header.version})
    if timestamps and len(timestamps) != len(payloads):
        raise CountMismatch("One timestamp per payload required")

    head = bytearray(HEADER_SIZE)
    struct.pack_into('<I', head, 0, header.magic)
    head[4:4 + NAME_FIELD_SIZE] = _encode_text(NAME, NAME_FIELD_SIZE, 'name')
    struct.pack_into('<iI', head, 28, header.version, HEADER_SIZE)
    head[DESCRIPTION_OFFSET:DESCRIPTION_OFFSET + DESCRIPTION_SIZE] = _encode_text(
        header.description, DESCRIPTION_SIZE, 'description')
    struct.pack_into(
        PARAMS_FORMAT, head, PARAMS_OFFSET,
        header.width, header.height, header.bit_depth, header.bit_depth_real,
        header.image_size_bytes, header.image_format, header.frame_count, 0,
        header.true_image_size,
    )
    struct.pack_into('<d', head, FPS_OFFSET, header.fps)

    chunks = [bytes(head)]
    for i, payload in enumerate(payloads):
        payload = bytes(payload)
        _check_signature(header.image_format, payload, i)
        if timestamps:
            seconds, milliseconds, microseconds = timestamps[i]
        elif header.fps > 0:
            seconds, milliseconds = divmod(int(i * 1000 / header.fps), 1000)
            microseconds = 0
        else:
            seconds = milliseconds = microseconds = 0
        chunks.append(struct.pack('<I', len(payload) + RECORD_PREFIX))
        chunks.append(payload)
        chunks.append(struct.pack('<IHH', seconds, milliseconds, microseconds))
    return b''.join(chunks)


__all__ = [
    'MAGIC', 'HEADER_SIZE', 'RECORD_OVERHEAD', 'SUPPORTED_FORMATS', 'JPEG_FORMATS',
    'SeqHandle', 'open_seq', 'open_seq_file', 'read_frame', 'iter_frames', 'write_seq',
    'parse_header', 'scan_frames', 'image_extension',
]
