import hashlib

import numpy as np
import pytest

from ymbubble import fieldcache
from ymbubble.polyforms import PolyForm

GRID = hashlib.sha256(b"grid").hexdigest()


def test_round_trip(tmp_path):
    v = np.random.default_rng(0).normal(size=(35, 4, 3))
    fieldcache.write_field(tmp_path / "f.ymbf", GRID, v, 3)
    gh, comps, back = fieldcache.read_field(tmp_path / "f.ymbf", GRID)
    assert gh == GRID and comps == 3
    assert np.array_equal(back.reshape(v.shape), v)


def test_header_layout(tmp_path):
    fieldcache.write_field(tmp_path / "f.ymbf", GRID, np.arange(3.0), 1)
    raw = (tmp_path / "f.ymbf").read_bytes()
    assert raw[:4] == b"YMBF" and len(raw) == 52 + 24
    assert raw[8:40] == bytes.fromhex(GRID)


def test_rejects_bad_files(tmp_path):
    p = tmp_path / "f.ymbf"
    fieldcache.write_field(p, GRID, np.arange(3.0), 1)
    with pytest.raises(fieldcache.CacheFormatError):
        fieldcache.read_field(p, hashlib.sha256(b"other").hexdigest())
    p.write_bytes(b"XXXX" + p.read_bytes()[4:])
    with pytest.raises(fieldcache.CacheFormatError):
        fieldcache.read_field(p)
    p.write_bytes(b"YMBF")
    with pytest.raises(fieldcache.CacheFormatError):
        fieldcache.read_field(p)


def test_polyform_store_and_env(tmp_path, monkeypatch):
    monkeypatch.setenv("YMB_CACHE_DIR", str(tmp_path))
    A = PolyForm.from_terms([((1, 1, 0, 0), 2, (1.0, 0.0, 0.0))], 2)
    key = fieldcache.entry_key(GRID, fieldcache.boundary_hash(A), 0.02, 1e-12)
    assert fieldcache.load_polyform(GRID, key) is None
    path = fieldcache.store_polyform(GRID, key, A)
    assert path.parent == tmp_path
    B = fieldcache.load_polyform(GRID, key)
    assert B.degree == 2 and np.array_equal(B.coef, A.coef)
    assert key != fieldcache.entry_key(GRID, fieldcache.boundary_hash(A), 0.04, 1e-12)
