"""Binary model files plus a JSON sidecar.

Layout of ``<name>.bin`` (all integers little-endian uint32)::

    magic     8 bytes   b"EHKGE\\x00\\x01\\x00"
    kind      8 bytes   ascii, NUL padded ("transe", "rotate", "mure")
    dim, num_entities, num_relations, num_blocks
    per block:
        name  16 bytes  ascii, NUL padded
        rows, cols
        rows*cols little-endian float32 values, row-major

Block order is the sorted block names. ``<name>.json`` holds the entity and
relation id lists (row order), the model options and the training config.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..model import parse_entity_id
from .models import KGEModel, TransE, create_model

MAGIC = b"EHKGE\x00\x01\x00"


class ModelFileError(ValueError):
    pass


def _pad(text: str, size: int) -> bytes:
    raw = text.encode("ascii")
    if len(raw) > size:
        raise ModelFileError(f"{text!r} longer than {size} bytes")
    return raw.ljust(size, b"\x00")


def model_bytes(model: KGEModel) -> bytes:
    parts = [MAGIC, _pad(model.kind, 8),
             struct.pack("<4I", model.dim, model.num_entities, model.num_relations, len(model.params))]
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name], dtype="<f4")
        parts.append(_pad(name, 16))
        parts.append(struct.pack("<2I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def sidecar(model: KGEModel, config: dict | None = None) -> dict:
    out = {
        "kind": model.kind,
        "dim": model.dim,
        "entities": [str(e) for e in model.entities],
        "relations": [str(r) for r in model.relations],
        "config": config or {},
    }
    if isinstance(model, TransE):
        out["norm"] = model.norm
        out["normalize_entities"] = model.normalize_entities
    return out


def save_model(model: KGEModel, path, config: dict | None = None) -> Path:
    """Write ``path`` (.bin) and its sidecar (.json); returns the binary path."""
    path = Path(path).with_suffix(".bin")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(model_bytes(model))
    path.with_suffix(".json").write_text(
        json.dumps(sidecar(model, config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _read_exact(buf: memoryview, pos: int, n: int):
    if pos + n > len(buf):
        raise ModelFileError("truncated model file")
    return bytes(buf[pos:pos + n]), pos + n


def load_model(path) -> tuple:
    """Return ``(model, sidecar dict)``."""
    path = Path(path)
    if path.suffix != ".bin":
        path = path.with_suffix(".bin")
    if not path.exists():
        raise FileNotFoundError(f"model not found: {path}")
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    buf = memoryview(path.read_bytes())
    magic, pos = _read_exact(buf, 0, 8)
    if magic != MAGIC:
        raise ModelFileError("bad magic")
    kind, pos = _read_exact(buf, pos, 8)
    kind = kind.rstrip(b"\x00").decode("ascii")
    head, pos = _read_exact(buf, pos, 16)
    dim, ne, nr, nb = struct.unpack("<4I", head)
    params = {}
    for _ in range(nb):
        name, pos = _read_exact(buf, pos, 16)
        shape, pos = _read_exact(buf, pos, 8)
        rows, cols = struct.unpack("<2I", shape)
        data, pos = _read_exact(buf, pos, 4 * rows * cols)
        params[name.rstrip(b"\x00").decode("ascii")] = (
            np.frombuffer(data, dtype="<f4").reshape(rows, cols).astype(np.float64))
    if pos != len(buf):
        raise ModelFileError("trailing bytes in model file")
    entities = [parse_entity_id(e) for e in meta["entities"]]
    relations = [parse_entity_id(r) for r in meta["relations"]]
    if len(entities) != ne or len(relations) != nr:
        raise ModelFileError("sidecar id lists do not match binary header")
    opts = {k: meta[k] for k in ("norm", "normalize_entities") if k in meta}
    model = create_model(kind, ne, nr, dim, entities=entities, relations=relations, **opts)
    model.params = params
    return model, meta
