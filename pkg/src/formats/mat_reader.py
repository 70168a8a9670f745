"""
Constrained MAT-file Level 5 reader.

Covers what .vbb files use: compressed elements, numeric, logical and char
arrays, cell arrays and structure arrays, in either byte order, with both the
8-byte tag and the packed small-element tag. Anything else is rejected.
"""
import struct
import zlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from src.utils.error_handling import BadHeader, DecompressFailure, MatError, MatTruncated, UnsupportedElementType

HEADER_SIZE = 128
VERSION = 0x0100

# data types
miINT8 = 1
miUINT8 = 2
miINT16 = 3
miUINT16 = 4
miINT32 = 5
miUINT32 = 6
miSINGLE = 7
miDOUBLE = 9
miINT64 = 12
miUINT64 = 13
miMATRIX = 14
miCOMPRESSED = 15
miUTF8 = 16
miUTF16 = 17
miUTF32 = 18

MI_DTYPES = {
    miINT8: 'i1', miUINT8: 'u1', miINT16: 'i2', miUINT16: 'u2',
    miINT32: 'i4', miUINT32: 'u4', miSINGLE: 'f4', miDOUBLE: 'f8',
    miINT64: 'i8', miUINT64: 'u8',
}

# array classes
mxCELL_CLASS = 1
mxSTRUCT_CLASS = 2
mxOBJECT_CLASS = 3
mxCHAR_CLASS = 4
mxSPARSE_CLASS = 5

MX_NUMERIC = {
    6: ('double', 'f8'), 7: ('single', 'f4'),
    8: ('int8', 'i1'), 9: ('uint8', 'u1'),
    10: ('int16', 'i2'), 11: ('uint16', 'u2'),
    12: ('int32', 'i4'), 13: ('uint32', 'u4'),
    14: ('int64', 'i8'), 15: ('uint64', 'u8'),
}

FLAG_COMPLEX = 0x0800
FLAG_LOGICAL = 0x0200


@dataclass(frozen=True)
class MatElement:
    name: str
    dims: Tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.dims)) if self.dims else 0


@dataclass(frozen=True, eq=False)
class NumericArray(MatElement):
    data: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    mx_class: str = 'double'
    logical: bool = False


@dataclass(frozen=True)
class CharArray(MatElement):
    rows: Tuple[str, ...] = ()

    @property
    def text(self) -> str:
        return '\n'.join(self.rows)


@dataclass(frozen=True)
class CellArray(MatElement):
    # column-major order
    cells: Tuple[MatElement, ...] = ()


@dataclass(frozen=True)
class StructArray(MatElement):
    field_names: Tuple[str, ...] = ()
    # column-major order, one mapping per struct element
    records: Tuple[Dict[str, MatElement], ...] = ()


@dataclass(frozen=True)
class MatFile:
    description: str
    byte_order: str
    variables: Dict[str, MatElement]

    def __getitem__(self, name: str) -> MatElement:
        return self.variables[name]

    def __contains__(self, name: str) -> bool:
        return name in self.variables


def _pad8(n: int) -> int:
    return (n + 7) & ~7


class _Reader:
    def __init__(self, byte_order: str):
        self.bo = byte_order

    def tag(self, buf, pos: int) -> Tuple[int, int, int, int]:
        """-> (data type, byte count, data start, next element position)"""
        if pos + 4 > len(buf):
            raise MatTruncated("Element tag past end of data", {'offset': pos})
        first, = struct.unpack_from(self.bo + 'I', buf, pos)
        if first >> 16:
            mtype, nbytes = first & 0xFFFF, first >> 16
            if nbytes > 4:
                raise BadHeader("Small element larger than 4 bytes", {'offset': pos, 'nbytes': nbytes})
            start, next_pos = pos + 4, pos + 8
        else:
            if pos + 8 > len(buf):
                raise MatTruncated("Element tag past end of data", {'offset': pos})
            mtype = first
            nbytes, = struct.unpack_from(self.bo + 'I', buf, pos + 4)
            start = pos + 8
            next_pos = start + (nbytes if mtype == miCOMPRESSED else _pad8(nbytes))
        if start + nbytes > len(buf):
            raise MatTruncated(
                "Element data past end of data",
                {'offset': pos, 'type': mtype, 'nbytes': nbytes, 'available': len(buf) - start},
            )
        return mtype, nbytes, start, min(next_pos, len(buf))

    def element(self, buf, pos: int) -> Tuple[MatElement, int]:
        mtype, nbytes, start, next_pos = self.tag(buf, pos)
        raw = bytes(buf[start:start + nbytes])
        if mtype == miCOMPRESSED:
            try:
                inner = zlib.decompress(raw)
            except zlib.error as exc:
                raise DecompressFailure(payload={'offset': pos, 'reason': str(exc)}) from exc
            element, _ = self.element(inner, 0)
            return element, next_pos
        if mtype == miMATRIX:
            return self.matrix(raw, pos), next_pos
        raise UnsupportedElementType(payload={'offset': pos, 'type': mtype})

    def typed(self, buf, pos: int, expected=None) -> Tuple[int, np.ndarray, int]:
        mtype, nbytes, start, next_pos = self.tag(buf, pos)
        if mtype not in MI_DTYPES and mtype not in (miUTF8, miUTF16, miUTF32):
            raise UnsupportedElementType("Unexpected sub-element type", {'offset': pos, 'type': mtype})
        if expected is not None and mtype not in expected:
            raise UnsupportedElementType("Unexpected sub-element type", {'offset': pos, 'type': mtype})
        raw = bytes(buf[start:start + nbytes])
        if mtype in MI_DTYPES:
            dtype = np.dtype(MI_DTYPES[mtype]).newbyteorder(self.bo)
            return mtype, np.frombuffer(raw, dtype=dtype, count=nbytes // dtype.itemsize), next_pos
        return mtype, np.frombuffer(raw, dtype=np.uint8), next_pos

    def matrix(self, content: bytes, origin: int) -> MatElement:
        if not content:
            return NumericArray(name='', dims=(0, 0), data=np.zeros((0, 0)))
        _, flags, pos = self.typed(content, 0, expected=(miUINT32,))
        if len(flags) < 2:
            raise MatTruncated("Array flags too short", {'offset': origin})
        flag_word = int(flags[0])
        mx_class = flag_word & 0xFF
        _, dims_arr, pos = self.typed(content, pos, expected=(miINT32,))
        dims = tuple(int(d) for d in dims_arr)
        _, name_arr, pos = self.typed(content, pos, expected=(miINT8, miUINT8))
        name = bytes(name_arr.astype(np.uint8)).decode('ascii', errors='replace')
        count = int(np.prod(dims)) if dims else 0

        if mx_class in MX_NUMERIC:
            if flag_word & FLAG_COMPLEX:
                raise UnsupportedElementType("Complex arrays are not supported", {'offset': origin, 'name': name})
            class_name, class_dtype = MX_NUMERIC[mx_class]
            _, values, pos = self.typed(content, pos)
            if len(values) != count:
                raise MatTruncated("Numeric data length disagrees with dimensions",
                                   {'offset': origin, 'name': name, 'expected': count, 'got': len(values)})
            data = values.astype(class_dtype).reshape(dims, order='F')
            logical = bool(flag_word & FLAG_LOGICAL)
            if logical:
                data = data.astype(bool)
            return NumericArray(name=name, dims=dims, data=data, mx_class=class_name, logical=logical)

        if mx_class == mxCHAR_CLASS:
            mtype, values, pos = self.typed(content, pos)
            rows = self._char_rows(mtype, values, dims)
            return CharArray(name=name, dims=dims, rows=rows)

        if mx_class == mxCELL_CLASS:
            cells: List[MatElement] = []
            for _ in range(count):
                cell, pos = self._child(content, pos)
                cells.append(cell)
            return CellArray(name=name, dims=dims, cells=tuple(cells))

        if mx_class == mxSTRUCT_CLASS:
            _, name_len, pos = self.typed(content, pos, expected=(miINT32,))
            if len(name_len) != 1 or int(name_len[0]) < 0:
                raise MatTruncated("Bad struct field name length", {'offset': origin, 'name': name})
            field_len = int(name_len[0])
            _, names_raw, pos = self.typed(content, pos, expected=(miINT8, miUINT8))
            names_bytes = bytes(names_raw.astype(np.uint8))
            field_names = tuple(
                names_bytes[i:i + field_len].split(b'\x00', 1)[0].decode('ascii', errors='replace')
                for i in range(0, len(names_bytes), field_len)
            ) if field_len else ()
            records = []
            for _ in range(count):
                record = {}
                for field_name in field_names:
                    record[field_name], pos = self._child(content, pos)
                records.append(record)
            return StructArray(name=name, dims=dims, field_names=field_names, records=tuple(records))

        kind = {mxOBJECT_CLASS: 'object', mxSPARSE_CLASS: 'sparse'}.get(mx_class, f'class {mx_class}')
        raise UnsupportedElementType(f"Unsupported array class: {kind}", {'offset': origin, 'name': name})

    def _child(self, content: bytes, pos: int) -> Tuple[MatElement, int]:
        mtype, nbytes, start, next_pos = self.tag(content, pos)
        if mtype != miMATRIX:
            raise UnsupportedElementType("Expected a matrix element", {'offset': pos, 'type': mtype})
        return self.matrix(bytes(content[start:start + nbytes]), pos), next_pos

    def _decode_chars(self, mtype: int, values: np.ndarray) -> List[str]:
        if mtype in (miUTF8, miINT8, miUINT8):
            return list(bytes(values.astype(np.uint8)).decode('utf-8'))
        if mtype == miUTF16:
            return list(bytes(values).decode('utf-16-le' if self.bo == '<' else 'utf-16-be'))
        if mtype == miUTF32:
            return list(bytes(values).decode('utf-32-le' if self.bo == '<' else 'utf-32-be'))
        if mtype in (miUINT16, miINT16):
            return [chr(int(c) & 0xFFFF) for c in values]
        raise UnsupportedElementType("Unexpected character encoding", {'type': mtype})

    def _char_rows(self, mtype: int, values: np.ndarray, dims: Tuple[int, ...]) -> Tuple[str, ...]:
        try:
            chars = self._decode_chars(mtype, values)
        except UnicodeDecodeError as exc:
            raise MatError("Undecodable character data",
                           {'type': mtype, 'reason': exc.reason, 'position': exc.start}) from exc
        if len(dims) != 2:
            raise UnsupportedElementType("Character arrays must be 2-D", {'dims': dims})
        n_rows, n_cols = dims
        if len(chars) != n_rows * n_cols:
            raise MatTruncated("Character data length disagrees with dimensions",
                               {'expected': n_rows * n_cols, 'got': len(chars)})
        grid = np.array(chars, dtype=object).reshape((n_rows, n_cols), order='F') if chars else None
        return tuple(''.join(grid[r]) for r in range(n_rows)) if grid is not None else ('',) * min(n_rows, 1)

def parse_mat(data) -> MatFile:
    if len(data) < HEADER_SIZE:
        raise BadHeader("Shorter than the 128-byte MAT header", {'size': len(data)})
    indicator = bytes(data[126:128])
    if indicator == b'IM':
        byte_order = '<'
    elif indicator == b'MI':
        byte_order = '>'
    else:
        raise BadHeader("Missing endian indicator", {'indicator': indicator.hex(), 'offset': 126})
    version, = struct.unpack_from(byte_order + 'H', data, 124)
    if version != VERSION:
        raise BadHeader("Unsupported MAT-file version", {'version': hex(version), 'offset': 124})
    description = bytes(data[:116]).decode('ascii', errors='replace').rstrip(' \x00')

    reader = _Reader(byte_order)
    variables: Dict[str, MatElement] = {}
    pos = HEADER_SIZE
    while pos < len(data):
        # zero padding after the last element
        if len(data) - pos < 8 and not any(bytes(data[pos:])):
            break
        try:
            element, pos = reader.element(data, pos)
        except (ValueError, IndexError, struct.error) as exc:
            raise MatError("Malformed element data", {'offset': pos, 'reason': str(exc)}) from exc
        variables[element.name] = element
    return MatFile(description=description, byte_order=byte_order, variables=variables)


def to_python(element: MatElement) -> Any:
    """Plain nested lists/dicts/strings, for dumps and comparisons"""
    if isinstance(element, NumericArray):
        return element.data.tolist()
    if isinstance(element, CharArray):
        return element.text
    if isinstance(element, CellArray):
        return [to_python(c) for c in element.cells]
    if isinstance(element, StructArray):
        return [{k: to_python(v) for k, v in record.items()} for record in element.records]
    raise TypeError(f"not a MAT element: {type(element).__name__}")


__all__ = [
    'MatElement', 'NumericArray', 'CharArray', 'CellArray', 'StructArray', 'MatFile',
    'parse_mat', 'to_python',
]
