import os

import pytest

from src.utils.error_handling import configure_logging
from tests.fixtures import FixtureObject, make_seq, make_vbb, write_caltech_root

os.environ.setdefault('PED_TOOLKIT_ENV', 'testing')


@pytest.fixture(autouse=True, scope='session')
def quiet_logging():
    """Console logs at WARNING for the whole session."""
    configure_logging('WARNING', structured=False)


@pytest.fixture
def seq_bytes():
    """Ten 64x48 JPEG frames."""
    return make_seq(10, 64, 48)


@pytest.fixture
def seq_file(tmp_path, seq_bytes):
    path = tmp_path / 'set00' / 'V000.seq'
    path.parent.mkdir(parents=True)
    path.write_bytes(seq_bytes)
    return path


@pytest.fixture
def vbb_frames():
    """Frame 0: one person and one crowd; frame 3: one person; rest empty."""
    return {
        0: [FixtureObject(1, (11.0, 9.0, 20.0, 30.0)), FixtureObject(2, (1.0, 1.0, 30.0, 20.0))],
        3: [FixtureObject(1, (21.0, 5.0, 10.0, 40.0), posv=(21.0, 5.0, 10.0, 20.0), occl=1)],
    }


@pytest.fixture
def vbb_bytes(vbb_frames):
    return make_vbb(10, ['person', 'people'], vbb_frames)


@pytest.fixture
def vbb_file(tmp_path, vbb_bytes):
    path = tmp_path / 'annotations' / 'set00' / 'V000.vbb'
    path.parent.mkdir(parents=True)
    path.write_bytes(vbb_bytes)
    return path


@pytest.fixture
def caltech_root(tmp_path, vbb_frames):
    """Two train videos (set00) and one test video (set06)."""
    root = tmp_path / 'caltech'
    return write_caltech_root(root, {
        ('set00', 'V000'): (10, vbb_frames),
        ('set00', 'V001'): (7, {1: [FixtureObject(1, (5.0, 5.0, 10.0, 20.0))]}),
        ('set06', 'V000'): (4, {}),
    })
