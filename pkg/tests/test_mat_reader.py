import io
import struct
import zlib

import numpy as np
import pytest

from src.formats.mat_reader import CellArray, CharArray, NumericArray, StructArray, parse_mat, to_python
from src.utils.error_handling import BadHeader, DecompressFailure, MatError, MatTruncated, UnsupportedElementType
from tests.fixtures import MatWriter, RawChars, Struct


def _sample_variables():
    return {
        'scalar': 3.5,
        'matrix': np.arange(6, dtype=float).reshape(2, 3),
        'flag': True,
        'name': 'person',
        'cells': ['a', 1.0, np.zeros((0, 0))],
        'rec': {'x': 1.0, 'label': 'people'},
        'arr': Struct([{'id': 1.0}, {'id': 2.0}]),
    }


def _write(byte_order='<', compress=False, small_elements=True) -> bytes:
    writer = MatWriter(byte_order=byte_order, compress=compress, small_elements=small_elements)
    for name, value in _sample_variables().items():
        writer.add(name, value)
    return writer.to_bytes()


class TestParseMat:
    """Test the MAT-file Level 5 reader on writer-built files."""

    @pytest.mark.parametrize('byte_order', ['<', '>'])
    @pytest.mark.parametrize('compress', [False, True])
    def test_all_supported_classes(self, byte_order, compress):
        """Numeric, logical, char, cell and struct parse in both byte orders, compressed or not."""
        mat = parse_mat(_write(byte_order, compress))
        assert mat.byte_order == byte_order

        assert isinstance(mat['scalar'], NumericArray)
        assert mat['scalar'].data.tolist() == [[3.5]]
        np.testing.assert_array_equal(mat['matrix'].data, np.arange(6, dtype=float).reshape(2, 3))
        assert mat['flag'].logical and mat['flag'].data.tolist() == [[True]]
        assert isinstance(mat['name'], CharArray) and mat['name'].text == 'person'

        cells = mat['cells']
        assert isinstance(cells, CellArray) and len(cells.cells) == 3
        assert cells.cells[0].text == 'a'
        assert cells.cells[2].size == 0

        rec = mat['rec']
        assert isinstance(rec, StructArray)
        assert rec.field_names == ('x', 'label')
        assert to_python(rec) == [{'x': [[1.0]], 'label': 'people'}]
        assert to_python(mat['arr']) == [{'id': [[1.0]]}, {'id': [[2.0]]}]

    def test_small_and_full_tags_agree(self):
        """Packed small-element tags and full tags decode to the same content."""
        packed = parse_mat(_write(small_elements=True))
        full = parse_mat(_write(small_elements=False))
        for name in _sample_variables():
            assert to_python(packed[name]) == to_python(full[name])

    def test_column_major_order(self):
        """Data is reshaped in column-major order."""
        value = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        mat = parse_mat(MatWriter().add('m', value).to_bytes())
        assert mat['m'].dims == (2, 3)
        np.testing.assert_array_equal(mat['m'].data, value)

    def test_trailing_padding_ignored(self):
        """Zero bytes after the last element are not an element."""
        data = MatWriter().add('x', 1.0).to_bytes() + b'\x00' * 4
        assert list(parse_mat(data).variables) == ['x']


class TestParseMatErrors:
    """Test rejection paths."""

    def test_short_header(self):
        """Fewer than 128 bytes is a BadHeader."""
        with pytest.raises(BadHeader):
            parse_mat(b'MATLAB')

    def test_missing_endian_indicator(self):
        """Bytes 126-127 must read IM or MI."""
        data = bytearray(MatWriter().add('x', 1.0).to_bytes())
        data[126:128] = b'XX'
        with pytest.raises(BadHeader):
            parse_mat(bytes(data))

    def test_wrong_version(self):
        """Only version 0x0100 is accepted."""
        data = bytearray(MatWriter().add('x', 1.0).to_bytes())
        struct.pack_into('<H', data, 124, 0x0200)
        with pytest.raises(BadHeader):
            parse_mat(bytes(data))

    def test_truncated_element(self):
        """An element cut short is MatTruncated."""
        data = MatWriter().add('m', np.ones((4, 4))).to_bytes()
        with pytest.raises(MatTruncated):
            parse_mat(data[:-40])

    def test_invalid_utf8_chars(self):
        """Undecodable character data is a MatError, not a UnicodeDecodeError."""
        data = MatWriter().add('s', RawChars(b'\xff')).to_bytes()
        with pytest.raises(MatError):
            parse_mat(data)

    def test_odd_length_utf16(self):
        """UTF-16 data with an odd byte count is a MatError."""
        writer = MatWriter(small_elements=False)
        body = writer._prologue(4, (1, 1), 's') + writer._element(17, b'\x41\x00\x42')
        with pytest.raises(MatError):
            parse_mat(writer.header() + struct.pack('<II', 14, len(body)) + body)

    def test_utf8_chars(self):
        """Valid miUTF8 character data decodes."""
        data = MatWriter().add('s', RawChars(b'abc')).to_bytes()
        assert parse_mat(data)['s'].text == 'abc'

    def test_bad_compressed_stream(self):
        """A corrupt zlib stream is DecompressFailure."""
        writer = MatWriter()
        garbage = b'\x78\x9c' + b'\xff' * 30
        data = writer.header() + struct.pack('<II', 15, len(garbage)) + garbage
        with pytest.raises(DecompressFailure):
            parse_mat(data)

    def test_sparse_rejected(self):
        """Sparse arrays (class 5) are unsupported."""
        writer = MatWriter()
        body = writer._prologue(5, (2, 2), 's')
        element = struct.pack('<II', 14, len(body)) + body
        with pytest.raises(UnsupportedElementType):
            parse_mat(writer.header() + element)

    def test_complex_rejected(self):
        """Complex numeric arrays are unsupported."""
        writer = MatWriter()
        body = writer._prologue(6, (1, 1), 'c', flags=0x0800) + writer._element(9, struct.pack('<d', 1.0))
        element = struct.pack('<II', 14, len(body)) + body
        with pytest.raises(UnsupportedElementType):
            parse_mat(writer.header() + element)

    def test_unknown_top_level_type(self):
        """Top-level elements must be matrices or compressed matrices."""
        writer = MatWriter()
        data = writer.header() + struct.pack('<II', 9, 8) + struct.pack('<d', 1.0)
        with pytest.raises(UnsupportedElementType):
            parse_mat(data)

    def test_compressed_wrapper_holds_matrix(self):
        """A compressed wrapper around a plain double still parses as its matrix."""
        inner = MatWriter().matrix('z', 2.0)
        packed = zlib.compress(inner)
        data = MatWriter().header() + struct.pack('<II', 15, len(packed)) + packed
        assert parse_mat(data)['z'].data.tolist() == [[2.0]]


class TestScipyCrossCheck:
    """An independent writer agrees with the reader."""

    @pytest.mark.parametrize('compress', [False, True])
    def test_savemat_output(self, compress):
        """Files written by scipy.io.savemat parse to the same values."""
        scipy_io = pytest.importorskip('scipy.io')
        cells = np.empty((1, 2), dtype=object)
        cells[0, 0] = 'person'
        cells[0, 1] = 'people'
        buffer = io.BytesIO()
        scipy_io.savemat(buffer, {
            'n': 3.0,
            'm': np.arange(6, dtype=float).reshape(2, 3),
            'lbl': cells,
            'A': {'nFrame': 2.0, 'maxObj': 1.0},
        }, do_compression=compress, oned_as='row')

        mat = parse_mat(buffer.getvalue())
        assert mat['n'].data.tolist() == [[3.0]]
        np.testing.assert_array_equal(mat['m'].data, np.arange(6, dtype=float).reshape(2, 3))
        assert [c.text for c in mat['lbl'].cells] == ['person', 'people']
        assert to_python(mat['A']) == [{'nFrame': [[2.0]], 'maxObj': [[1.0]]}]
