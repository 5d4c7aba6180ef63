"""On-disk cache for solved fields.

File layout (little-endian)::

    offset  size  content
    0       4     magic b"YMBF"
    4       4     uint32 format version (1)
    8       32    sha256 digest of the grid the field was solved on
    40      4     uint32 component count (values per node or per basis function)
    44      8     uint64 number of f64 values that follow
    52      8n    float64 payload

Entries are keyed by (grid hash, boundary-data hash, eps, tol) and live in
``$YMB_CACHE_DIR`` (default ``~/.cache/ymbubble``).
"""

import hashlib
import os
import struct
from pathlib import Path

import numpy as np

from .polyforms import PolyForm, exponents

MAGIC = b"YMBF"
VERSION = 1
_HEAD = struct.Struct("<4sI32sIQ")


class CacheFormatError(ValueError):
    """Unreadable or mismatched cache file."""


def write_field(path, grid_hash, values, components):
    """Write ``values`` (any shape, flattened) with its grid hash."""
    values = np.ascontiguousarray(values, dtype="<f8").reshape(-1)
    gh = bytes.fromhex(grid_hash)
    if len(gh) != 32:
        raise ValueError("grid hash must be a sha256 hex digest")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(_HEAD.pack(MAGIC, VERSION, gh, int(components), values.size))
        f.write(values.tobytes())
    os.replace(tmp, path)


def read_field(path, grid_hash=None):
    """Return ``(grid_hash, components, values)``; checks the grid hash when given."""
    with open(path, "rb") as f:
        head = f.read(_HEAD.size)
        if len(head) != _HEAD.size:
            raise CacheFormatError("truncated header")
        magic, version, gh, comps, n = _HEAD.unpack(head)
        if magic != MAGIC:
            raise CacheFormatError("bad magic")
        if version != VERSION:
            raise CacheFormatError(f"unsupported version {version}")
        data = f.read()
    if len(data) != 8 * n:
        raise CacheFormatError("payload length mismatch")
    if grid_hash is not None and gh.hex() != grid_hash:
        raise CacheFormatError("grid hash mismatch")
    return gh.hex(), comps, np.frombuffer(data, dtype="<f8").copy()


def cache_dir():
    return Path(os.environ.get("YMB_CACHE_DIR", Path.home() / ".cache" / "ymbubble"))


def entry_key(grid_hash, boundary_hash, eps, tol, kind="field"):
    s = f"{kind}|{grid_hash}|{boundary_hash}|{float(eps)!r}|{float(tol)!r}"
    return hashlib.sha256(s.encode()).hexdigest()


def boundary_hash(A0):
    """Hash of boundary data: PolyForm coefficients or BoundaryForm arrays."""
    if hasattr(A0, "digest"):
        return A0.digest()
    h = hashlib.sha256()
    h.update(str(A0.degree).encode())
    h.update(np.ascontiguousarray(A0.coef, dtype="<f8").tobytes())
    return h.hexdigest()


def _degree_of(m):
    d = 0
    while len(exponents(d)) < m:
        d += 1
    if len(exponents(d)) != m:
        raise CacheFormatError("coefficient count is not a monomial count")
    return d


def store_polyform(grid_hash, key, form, directory=None):
    path = Path(directory or cache_dir()) / f"{key}.ymbf"
    write_field(path, grid_hash, form.coef, 3)
    return path


def load_polyform(grid_hash, key, directory=None):
    """Cached PolyForm or None when absent; mismatched files are ignored."""
    path = Path(directory or cache_dir()) / f"{key}.ymbf"
    if not path.exists():
        return None
    try:
        _, comps, vals = read_field(path, grid_hash)
    except CacheFormatError:
        return None
    m = vals.size // (4 * comps)
    return PolyForm(vals.reshape(m, 4, comps), _degree_of(m))
