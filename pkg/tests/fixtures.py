"""
Synthetic seq, MAT-file and vbb builders for the test suite.
"""
import io
import struct
import zlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from src.formats.seq_codec import write_seq
from src.models.sequence import SeqHeader

# ---------------------------------------------------------------------------
# Images / seq
# ---------------------------------------------------------------------------


def jpeg_payload(width: int = 64, height: int = 48, color=(200, 30, 30), quality: int = 90) -> bytes:
    buffer = io.BytesIO()
    Image.new('RGB', (width, height), color).save(buffer, format='JPEG', quality=quality)
    return buffer.getvalue()


def png_payload(width: int = 64, height: int = 48, color=(10, 120, 220)) -> bytes:
    buffer = io.BytesIO()
    Image.new('RGB', (width, height), color).save(buffer, format='PNG')
    return buffer.getvalue()


def corrupt_jpeg_payload() -> bytes:
    """Starts like a JPEG, decodes to nothing"""
    return b'\xff\xd8\xff\xe0' + b'\x00' * 32


def make_seq(n_frames: int = 10, width: int = 64, height: int = 48, payloads: Optional[Sequence[bytes]] = None,
             image_format: int = 102, fps: float = 30.0) -> bytes:
    if payloads is None:
        payloads = [jpeg_payload(width, height, color=(i * 20 % 256, 80, 160)) for i in range(n_frames)]
    header = SeqHeader(
        width=width, height=height, image_format=image_format, frame_count=len(payloads),
        image_size_bytes=width * height * 3, fps=fps, description='pedkit fixture',
    )
    return write_seq(header, payloads)


# ---------------------------------------------------------------------------
# MAT-file Level 5 writer
# ---------------------------------------------------------------------------

miINT8, miUINT16, miINT32, miUINT32, miDOUBLE, miMATRIX, miCOMPRESSED, miUTF8 = 1, 4, 5, 6, 9, 14, 15, 16
mxCELL, mxSTRUCT, mxCHAR, mxDOUBLE, mxUINT8 = 1, 2, 4, 6, 9


@dataclass
class Struct:
    """1 x n struct array; a plain dict is written as a 1 x 1 struct"""
    records: List[Dict[str, Any]]
    fields: Optional[Tuple[str, ...]] = None

    def field_names(self) -> Tuple[str, ...]:
        if self.fields is not None:
            return self.fields
        return tuple(self.records[0]) if self.records else ()


@dataclass
class RawChars:
    """Char array stored as miUTF8 bytes, written as is"""
    data: bytes


@dataclass
class MatWriter:
    byte_order: str = '<'
    compress: bool = False
    small_elements: bool = True
    description: str = 'MATLAB 5.0 MAT-file, written by pedkit tests'
    _variables: List[Tuple[str, Any]] = field(default_factory=list)

    def add(self, name: str, value: Any) -> 'MatWriter':
        self._variables.append((name, value))
        return self

    def header(self) -> bytes:
        text = self.description.encode('ascii')[:116].ljust(116, b' ')
        return (text + b'\x00' * 8 + struct.pack(self.byte_order + 'H', 0x0100)
                + (b'IM' if self.byte_order == '<' else b'MI'))

    def to_bytes(self) -> bytes:
        chunks = [self.header()]
        for name, value in self._variables:
            element = self.matrix(name, value)
            if self.compress:
                packed = zlib.compress(element)
                element = struct.pack(self.byte_order + 'II', miCOMPRESSED, len(packed)) + packed
            chunks.append(element)
        return b''.join(chunks)

    # -- elements ---------------------------------------------------------

    def _element(self, mtype: int, data: bytes) -> bytes:
        if self.small_elements and 0 < len(data) <= 4:
            return struct.pack(self.byte_order + 'I', (len(data) << 16) | mtype) + data.ljust(4, b'\x00')
        pad = (-len(data)) % 8
        return struct.pack(self.byte_order + 'II', mtype, len(data)) + data + b'\x00' * pad

    def _prologue(self, mx_class: int, dims: Tuple[int, ...], name: str, flags: int = 0) -> bytes:
        return (
            self._element(miUINT32, struct.pack(self.byte_order + 'II', mx_class | flags, 0))
            + self._element(miINT32, struct.pack(self.byte_order + f'{len(dims)}i', *dims))
            + self._element(miINT8, name.encode('ascii'))
        )

    def _wrap(self, body: bytes) -> bytes:
        return struct.pack(self.byte_order + 'II', miMATRIX, len(body)) + body

    def matrix(self, name: str, value: Any) -> bytes:
        if isinstance(value, RawChars):
            body = self._prologue(mxCHAR, (1, len(value.data)), name) + self._element(miUTF8, value.data)
            return self._wrap(body)
        if isinstance(value, Struct):
            return self._struct(name, value)
        if isinstance(value, dict):
            return self._struct(name, Struct([value]))
        if isinstance(value, str):
            return self._char(name, value)
        if isinstance(value, list):
            return self._cell(name, value)
        return self._numeric(name, value)

    def _numeric(self, name: str, value: Any) -> bytes:
        array = np.asarray(value)
        logical = array.dtype == bool
        if array.ndim < 2:
            array = array.reshape(1, -1) if array.size else array.reshape(0, 0)
        dims = tuple(array.shape)
        if logical:
            data = array.astype(np.uint8).flatten(order='F').tobytes()
            body = self._prologue(mxUINT8, dims, name, flags=0x0200) + self._element(2, data)
        else:
            data = array.astype(np.dtype('f8').newbyteorder(self.byte_order)).flatten(order='F').tobytes()
            body = self._prologue(mxDOUBLE, dims, name) + self._element(miDOUBLE, data)
        return self._wrap(body)

    def _char(self, name: str, text: str) -> bytes:
        dims = (1, len(text)) if text else (0, 0)
        data = struct.pack(self.byte_order + f'{len(text)}H', *(ord(c) for c in text))
        return self._wrap(self._prologue(mxCHAR, dims, name) + self._element(miUINT16, data))

    def _cell(self, name: str, items: List[Any]) -> bytes:
        body = self._prologue(mxCELL, (1, len(items)), name)
        body += b''.join(self.matrix('', item) for item in items)
        return self._wrap(body)

    def _struct(self, name: str, value: Struct) -> bytes:
        names = value.field_names()
        width = max([len(n) for n in names] + [0]) + 1
        packed = b''.join(n.encode('ascii').ljust(width, b'\x00') for n in names)
        body = self._prologue(mxSTRUCT, (1, len(value.records)), name)
        body += self._element(miINT32, struct.pack(self.byte_order + 'i', width))
        body += self._element(miINT8, packed)
        for record in value.records:
            for field_name in names:
                body += self.matrix('', record[field_name])
        return self._wrap(body)


# ---------------------------------------------------------------------------
# vbb
# ---------------------------------------------------------------------------

@dataclass
class FixtureObject:
    id: int
    pos: Tuple[float, float, float, float]
    posv: Tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    occl: int = 0
    lock: int = 0


def make_vbb(n_frame: int, labels: Sequence[str], frames: Dict[int, List[FixtureObject]],
             byte_order: str = '<', compress: bool = False, extras: bool = True) -> bytes:
    """vbb file whose record A holds the given per-frame objects"""
    obj_lists: List[Any] = []
    for frame in range(n_frame):
        objects = frames.get(frame, [])
        if not objects:
            obj_lists.append(np.zeros((0, 0)))
            continue
        obj_lists.append(Struct(
            [{
                'id': float(o.id),
                'pos': np.asarray(o.pos, dtype=float),
                'occl': float(o.occl),
                'lock': float(o.lock),
                'posv': np.asarray(o.posv, dtype=float) if any(o.posv) else np.zeros((0, 0)),
            } for o in objects],
            fields=('id', 'pos', 'occl', 'lock', 'posv'),
        ))
    record: Dict[str, Any] = {
        'nFrame': float(n_frame),
        'objLists': obj_lists,
        'maxObj': float(len(labels)),
        'objLbl': list(labels),
    }
    if extras:
        record['objInit'] = np.zeros((1, len(labels)))
        record['altered'] = False
        record['log'] = np.zeros((0, 0))
        record['logLen'] = 0.0
    return MatWriter(byte_order=byte_order, compress=compress).add('A', record).to_bytes()


def random_vbb_spec(rng: np.random.Generator, max_frames: int = 6, max_ids: int = 4):
    """-> (n_frame, labels, frames) for randomized round trips"""
    n_frame = int(rng.integers(1, max_frames + 1))
    n_ids = int(rng.integers(1, max_ids + 1))
    labels = [str(rng.choice(['person', 'people', 'person?', 'person-fa'])) for _ in range(n_ids)]
    frames: Dict[int, List[FixtureObject]] = {}
    for frame in range(n_frame):
        ids = sorted(set(int(i) for i in rng.integers(1, n_ids + 1, size=int(rng.integers(0, n_ids + 1)))))
        objects = []
        for obj_id in ids:
            left, top = (float(v) for v in rng.integers(1, 500, size=2))
            width, height = (float(v) for v in rng.integers(1, 120, size=2))
            posv = (left + 1, top + 1, width / 2, height / 2) if rng.random() < 0.5 else (0.0, 0.0, 0.0, 0.0)
            objects.append(FixtureObject(obj_id, (left, top, width, height), posv,
                                         occl=int(any(posv)), lock=int(rng.integers(0, 2))))
        frames[frame] = objects
    return n_frame, labels, frames


def write_caltech_root(root, videos: Dict[Tuple[str, str], Tuple[int, Dict[int, List[FixtureObject]]]],
                       labels: Sequence[str] = ('person', 'people'), width: int = 64, height: int = 48):
    """setXX/VYYY.seq plus annotations/setXX/VYYY.vbb under root"""
    for (set_name, video), (n_frames, frames) in videos.items():
        (root / set_name).mkdir(parents=True, exist_ok=True)
        (root / 'annotations' / set_name).mkdir(parents=True, exist_ok=True)
        (root / set_name / f'{video}.seq').write_bytes(make_seq(n_frames, width, height))
        (root / 'annotations' / set_name / f'{video}.vbb').write_bytes(make_vbb(n_frames, labels, frames))
    return root
