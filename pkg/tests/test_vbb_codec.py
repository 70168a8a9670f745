import json

import numpy as np
import pytest

from src.formats.mat_reader import parse_mat, to_python
from src.formats.vbb_codec import lint, parse_vbb, vbb_to_json
from src.utils.error_handling import MissingField, SchemaMismatch
from tests.fixtures import FixtureObject, MatWriter, Struct, make_vbb, random_vbb_spec


def _one_object():
    return make_vbb(1, ['person'], {0: [FixtureObject(1, (10.0, 20.0, 30.0, 40.0))]})


class TestMinimalMat:
    """The smallest MAT-file in every encoding."""

    @pytest.mark.parametrize('byte_order', ['<', '>'])
    @pytest.mark.parametrize('compress', [False, True])
    def test_scalar_x(self, byte_order, compress):
        """x = 5.0 parses to the same tree regardless of byte order or compression."""
        mat = parse_mat(MatWriter(byte_order=byte_order, compress=compress).add('x', 5.0).to_bytes())
        assert list(mat.variables) == ['x']
        assert to_python(mat['x']) == [[5.0]]


class TestParseVbb:
    """Test mapping of record A onto VbbFile."""

    def test_empty_file(self):
        """n_frame = 0 gives no object lists."""
        vbb = parse_vbb(make_vbb(0, [], {}))
        assert vbb.n_frame == 0
        assert vbb.obj_lists == ()

    def test_one_object(self):
        """A single object keeps its exact values."""
        vbb = parse_vbb(_one_object())
        assert vbb.n_frame == 1
        (obj,) = vbb.obj_lists[0]
        assert obj.id == 1
        assert obj.frame == 0
        assert obj.pos == (10.0, 20.0, 30.0, 40.0)
        assert obj.posv == (0.0, 0.0, 0.0, 0.0)
        assert obj.label == 'person'
        assert not obj.occluded and not obj.locked

    def test_frames_without_objects(self, vbb_bytes):
        """Empty frames become empty lists and indexing is 0-based."""
        vbb = parse_vbb(vbb_bytes)
        assert len(vbb.obj_lists) == vbb.n_frame == 10
        assert [len(objs) for objs in vbb.obj_lists] == [2, 0, 0, 1, 0, 0, 0, 0, 0, 0]
        assert vbb.obj_lists[3][0].frame == 3
        assert vbb.obj_lists[3][0].occluded

    def test_labels_resolved_per_id(self, vbb_bytes):
        """objLbl is indexed by track id."""
        vbb = parse_vbb(vbb_bytes)
        assert vbb.labels == {1: 'person', 2: 'people'}
        assert [o.label for o in vbb.obj_lists[0]] == ['person', 'people']

    def test_extras_retained(self, vbb_bytes):
        """Non-required fields are kept but not interpreted."""
        vbb = parse_vbb(vbb_bytes)
        assert {'objInit', 'altered', 'log', 'logLen'} <= set(vbb.extras)

    def test_id_above_max_obj(self):
        """An id beyond maxObj is a SchemaMismatch."""
        data = make_vbb(1, ['person'], {0: [FixtureObject(2, (1.0, 1.0, 5.0, 5.0))]})
        with pytest.raises(SchemaMismatch):
            parse_vbb(data)

    def test_missing_record(self):
        """A MAT-file without record A is MissingField."""
        with pytest.raises(MissingField):
            parse_vbb(MatWriter().add('B', 1.0).to_bytes())

    def test_missing_required_field(self):
        """Dropping nFrame is MissingField."""
        data = MatWriter().add('A', {'objLists': [], 'objLbl': [], 'maxObj': 0.0}).to_bytes()
        with pytest.raises(MissingField) as exc_info:
            parse_vbb(data)
        assert exc_info.value.payload['fields'] == ['nFrame']

    def test_obj_lists_length_mismatch(self):
        """objLists must have nFrame entries."""
        data = MatWriter().add('A', {'nFrame': 3.0, 'objLists': [np.zeros((0, 0))],
                                     'objLbl': [], 'maxObj': 0.0}).to_bytes()
        with pytest.raises(SchemaMismatch):
            parse_vbb(data)

    def test_pos_wrong_shape(self):
        """pos must hold four numbers."""
        objects = Struct([{'id': 1.0, 'pos': np.ones(3), 'occl': 0.0, 'lock': 0.0, 'posv': np.zeros((0, 0))}])
        data = MatWriter().add('A', {'nFrame': 1.0, 'objLists': [objects],
                                     'objLbl': ['person'], 'maxObj': 1.0}).to_bytes()
        with pytest.raises(SchemaMismatch):
            parse_vbb(data)

    @pytest.mark.parametrize('byte_order,compress', [('<', False), ('<', True), ('>', False), ('>', True)])
    def test_randomized_round_trips(self, byte_order, compress):
        """Random fixtures parse back to their semantic content in every encoding."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            n_frame, labels, frames = random_vbb_spec(rng)
            vbb = parse_vbb(make_vbb(n_frame, labels, frames, byte_order=byte_order, compress=compress))
            assert vbb.n_frame == n_frame
            assert vbb.max_obj == len(labels)
            assert vbb.count_objects() == sum(len(v) for v in frames.values())
            for frame in range(n_frame):
                expected = frames.get(frame, [])
                got = vbb.obj_lists[frame]
                assert [(o.id, o.pos, o.posv, o.occluded, o.locked) for o in got] == [
                    (e.id, e.pos, e.posv, bool(e.occl), bool(e.lock)) for e in expected
                ]
                assert [o.label for o in got] == [labels[e.id - 1] for e in expected]


class TestVbbJson:
    """Test the canonical JSON dump."""

    def test_empty(self):
        """An empty file dumps n_frame 0 and no objects."""
        document = json.loads(vbb_to_json(parse_vbb(make_vbb(0, [], {}))))
        assert document['n_frame'] == 0
        assert document['objects'] == []

    def test_one_object(self):
        """The dump names the label."""
        text = vbb_to_json(parse_vbb(_one_object()))
        assert '"label": "person"' in text
        assert text.endswith('\n')

    def test_deterministic(self, vbb_bytes):
        """Two dumps of the same file are byte-identical."""
        assert vbb_to_json(parse_vbb(vbb_bytes)) == vbb_to_json(parse_vbb(vbb_bytes))

    def test_compression_independent(self, vbb_frames):
        """Compressed and plain files dump identically."""
        plain = make_vbb(10, ['person', 'people'], vbb_frames)
        packed = make_vbb(10, ['person', 'people'], vbb_frames, compress=True)
        assert vbb_to_json(parse_vbb(plain)) == vbb_to_json(parse_vbb(packed))


class TestLint:
    """Visible box containment warnings."""

    def test_contained_posv_is_clean(self, vbb_bytes):
        """posv inside pos raises nothing."""
        assert lint(parse_vbb(vbb_bytes)) == []

    def test_posv_outside_pos(self):
        """posv sticking out of pos is reported, not rejected."""
        data = make_vbb(1, ['person'], {0: [FixtureObject(1, (10.0, 10.0, 5.0, 5.0), posv=(8.0, 10.0, 5.0, 5.0))]})
        warnings = lint(parse_vbb(data))
        assert len(warnings) == 1
        assert warnings[0]['id'] == 1
