"""
.vbb annotation files: the MAT-file record "A" mapped onto VbbFile.

Required fields are nFrame, objLists, objLbl and maxObj; everything else in
the record is kept as parsed elements and never interpreted. Coordinates stay
1-based here, VbbObject.box() is the single conversion point.
"""
import json
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np
import structlog

from src.formats.mat_reader import CellArray, CharArray, MatElement, NumericArray, StructArray, parse_mat, to_python
from src.models.annotation import VbbFile, VbbObject
from src.utils.error_handling import MissingField, SchemaMismatch

logger = structlog.get_logger(__name__)

RECORD_NAME = 'A'
REQUIRED_FIELDS = ('nFrame', 'objLists', 'objLbl', 'maxObj')
OBJECT_FIELDS = ('id', 'pos', 'occl', 'lock', 'posv')
OPTIONAL_OBJECT_FIELDS = ('posv', 'lock')


def _scalar(element: MatElement, what: str) -> float:
    if not isinstance(element, NumericArray) or element.size != 1:
        raise SchemaMismatch(f"{what} must be a numeric scalar", {'field': what})
    return float(element.data.reshape(-1)[0])


def _box(element: MatElement, what: str, allow_empty: bool = False) -> Tuple[float, float, float, float]:
    if not isinstance(element, NumericArray):
        raise SchemaMismatch(f"{what} must be numeric", {'field': what})
    if element.size == 0 and allow_empty:
        return (0.0, 0.0, 0.0, 0.0)
    if element.size != 4:
        raise SchemaMismatch(f"{what} must hold 4 values", {'field': what, 'dims': element.dims})
    values = element.data.reshape(-1, order='F').astype(np.float64)
    return tuple(float(v) for v in values)  # type: ignore[return-value]


def _label_table(element: MatElement) -> Dict[int, str]:
    if not isinstance(element, CellArray):
        raise SchemaMismatch("objLbl must be a cell array", {'field': 'objLbl'})
    labels = {}
    for i, cell in enumerate(element.cells, start=1):
        if not isinstance(cell, CharArray):
            raise SchemaMismatch("objLbl entries must be strings", {'field': 'objLbl', 'index': i})
        labels[i] = cell.text
    return labels


def _frame_objects(element: MatElement, frame: int, labels: Dict[int, str], max_obj: int) -> Tuple[VbbObject, ...]:
    if isinstance(element, NumericArray) and element.size == 0:
        return ()
    if not isinstance(element, StructArray):
        raise SchemaMismatch("objLists entries must be struct arrays", {'field': 'objLists', 'frame': frame})
    missing = [f for f in OBJECT_FIELDS if f not in element.field_names and f not in OPTIONAL_OBJECT_FIELDS]
    if missing and element.records:
        raise MissingField(payload={'fields': missing, 'frame': frame})

    objects = []
    for record in element.records:
        obj_id = int(_scalar(record['id'], 'id'))
        if not 1 <= obj_id <= max_obj:
            raise SchemaMismatch("object id outside 1..maxObj", {'id': obj_id, 'max_obj': max_obj, 'frame': frame})
        if obj_id not in labels:
            raise SchemaMismatch("object id has no label", {'id': obj_id, 'frame': frame})
        pos = _box(record['pos'], 'pos')
        if pos[2] < 0 or pos[3] < 0:
            raise SchemaMismatch("negative box size", {'id': obj_id, 'frame': frame, 'pos': pos})
        posv = _box(record['posv'], 'posv', allow_empty=True) if 'posv' in record else (0.0, 0.0, 0.0, 0.0)
        locked = bool(_scalar(record['lock'], 'lock')) if 'lock' in record else False
        objects.append(VbbObject(
            id=obj_id,
            frame=frame,
            pos=pos,
            posv=posv,
            occluded=bool(_scalar(record['occl'], 'occl')),
            locked=locked,
            label=labels[obj_id],
        ))
    return tuple(objects)


def vbb_from_mat(mat) -> VbbFile:
    if RECORD_NAME not in mat:
        raise MissingField("Annotation record not found", {'field': RECORD_NAME})
    record = mat[RECORD_NAME]
    if not isinstance(record, StructArray) or len(record.records) != 1:
        raise SchemaMismatch("Annotation record must be a 1x1 struct", {'field': RECORD_NAME})
    fields = record.records[0]
    missing = [name for name in REQUIRED_FIELDS if name not in fields]
    if missing:
        raise MissingField(payload={'fields': missing})

    n_frame = int(_scalar(fields['nFrame'], 'nFrame'))
    max_obj = int(_scalar(fields['maxObj'], 'maxObj'))
    labels = _label_table(fields['objLbl'])

    obj_lists_el = fields['objLists']
    if isinstance(obj_lists_el, NumericArray) and obj_lists_el.size == 0:
        cells: Sequence[MatElement] = ()
    elif isinstance(obj_lists_el, CellArray):
        cells = obj_lists_el.cells
    else:
        raise SchemaMismatch("objLists must be a cell array", {'field': 'objLists'})
    if len(cells) != n_frame:
        raise SchemaMismatch("objLists length disagrees with nFrame",
                             {'n_frame': n_frame, 'obj_lists': len(cells)})

    # objLists position i is video frame i (0-based)
    obj_lists = tuple(_frame_objects(cell, frame, labels, max_obj) for frame, cell in enumerate(cells))
    extras = {name: value for name, value in fields.items() if name not in REQUIRED_FIELDS}
    return VbbFile(n_frame=n_frame, obj_lists=obj_lists, labels=labels, max_obj=max_obj, extras=extras)


def parse_vbb(data) -> VbbFile:
    return vbb_from_mat(parse_mat(data))


def vbb_to_json(vbb: VbbFile, include_extras: bool = False) -> str:
    """Stable, byte-identical JSON for identical input.

    With include_extras the uninterpreted fields are added under "extras" as
    plain nested lists and strings.
    """
    document: Dict[str, Any] = {
        'n_frame': vbb.n_frame,
        'max_obj': vbb.max_obj,
        'labels': {str(k): v for k, v in sorted(vbb.labels.items())},
        'objects': [obj.to_dict() for obj in vbb.objects()],
        'retained_fields': sorted(vbb.extras),
    }
    if include_extras:
        document['extras'] = {name: to_python(value) for name, value in sorted(vbb.extras.items())}
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=True) + '\n'


def lint(vbb: VbbFile) -> List[Dict[str, Any]]:
    """Objects whose visible box is not contained in the full box"""
    warnings = []
    for obj in vbb.objects():
        if not obj.has_visible_box:
            continue
        left, top, width, height = obj.pos
        vleft, vtop, vwidth, vheight = obj.posv
        eps = 1e-6
        if (vleft < left - eps or vtop < top - eps
                or vleft + vwidth > left + width + eps or vtop + vheight > top + height + eps):
            warnings.append({'frame': obj.frame, 'id': obj.id, 'pos': list(obj.pos), 'posv': list(obj.posv)})
    return warnings


__all__ = ['parse_vbb', 'vbb_from_mat', 'vbb_to_json', 'lint', 'REQUIRED_FIELDS']
