"""Parameter files: a text manifest followed by raw little-endian arrays.

Layout::

    LABELBRIDGE-PARAMS 1
    meta <key> <json value>          (zero or more)
    <name> <dtype> <d0,d1,...> <offset> <nbytes>
    ...
    END
    <payload bytes, arrays concatenated in manifest order>

Offsets are relative to the start of the payload.  Scalars use the shape
token ``-``.  Arrays are stored as ``<f8`` (or ``<i8`` for integer arrays),
so a save/load round trip is bit exact.
"""

import json

import numpy as np

MAGIC = "LABELBRIDGE-PARAMS 1"


class ManifestError(ValueError):
    pass


def _dtype_for(arr):
    return "<i8" if np.issubdtype(arr.dtype, np.integer) else "<f8"


def save_arrays(path, arrays, meta=None):
    """Write an ordered mapping name -> ndarray plus a JSON-able meta dict."""
    lines = [MAGIC]
    for key, value in (meta or {}).items():
        if any(c.isspace() for c in key):
            raise ManifestError(f"meta key {key!r} contains whitespace")
        lines.append(f"meta {key} {json.dumps(value)}")
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        if any(c.isspace() for c in name):
            raise ManifestError(f"array name {name!r} contains whitespace")
        arr = np.asarray(arr)
        dt = _dtype_for(arr)
        raw = np.ascontiguousarray(arr, dtype=dt).tobytes()
        shape = ",".join(str(n) for n in arr.shape) or "-"
        lines.append(f"{name} {dt} {shape} {offset} {len(raw)}")
        blobs.append(raw)
        offset += len(raw)
    lines.append("END")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for raw in blobs:
            fh.write(raw)


def load_arrays(path):
    """Inverse of :func:`save_arrays`; returns (arrays, meta)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header_end = blob.find(b"\nEND\n")
    if header_end < 0:
        raise ManifestError(f"{path}: manifest terminator not found")
    header = blob[:header_end].decode("utf-8").split("\n")
    payload = blob[header_end + len(b"\nEND\n"):]
    if not header or header[0] != MAGIC:
        raise ManifestError(f"{path}: not a parameter file")
    meta, arrays = {}, {}
    for lineno, line in enumerate(header[1:], start=2):
        if line.startswith("meta "):
            _, key, value = line.split(" ", 2)
            meta[key] = json.loads(value)
            continue
        parts = line.split(" ")
        if len(parts) != 5:
            raise ManifestError(f"{path}:{lineno}: malformed manifest line")
        name, dt, shape, off, nbytes = parts
        if dt not in ("<f8", "<i8"):
            raise ManifestError(f"{path}:{lineno}: unsupported element type {dt}")
        shape = () if shape == "-" else tuple(int(n) for n in shape.split(","))
        off, nbytes = int(off), int(nbytes)
        if off + nbytes > len(payload):
            raise ManifestError(f"{path}:{lineno}: array {name} runs past end of file")
        arr = np.frombuffer(payload[off:off + nbytes], dtype=dt).reshape(shape)
        arrays[name] = arr.astype(np.int64 if dt == "<i8" else np.float64)
    return arrays, meta
