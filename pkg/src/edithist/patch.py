"""RFC 6902 JSON Patch: diff, apply and revision-chain reconstruction.

Only ``add``, ``remove`` and ``replace`` are produced or accepted. Diffs
recurse into objects key by key and compare arrays index by index, emitting
trailing adds or removes for length changes.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Mapping, Sequence

from .model import ModelError, PatchOp, PatchOperation


class PatchError(Exception):
    """A patch operation could not be applied.

    ``index`` is the position of the failing operation within its patch and
    ``revision`` the position of the patch within a chain, when known.
    """

    def __init__(self, message, index=None, operation=None, revision=None):
        self.message = message
        self.index = index
        self.operation = operation
        self.revision = revision
        where = []
        if revision is not None:
            where.append(f"revision {revision}")
        if index is not None:
            where.append(f"operation {index}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


# --- JSON pointers --------------------------------------------------------

def escape_token(token: str) -> str:
    return token.replace("~", "~0").replace("/", "~1")


def unescape_token(token: str) -> str:
    return token.replace("~1", "/").replace("~0", "~")


def split_pointer(path: str) -> list:
    if path == "":
        return []
    if not path.startswith("/"):
        raise ValueError(f"invalid JSON pointer {path!r}")
    return [unescape_token(t) for t in path[1:].split("/")]


def join_pointer(tokens: Iterable[str]) -> str:
    return "".join("/" + escape_token(str(t)) for t in tokens)


# --- structural equality --------------------------------------------------

def json_equal(a: Any, b: Any) -> bool:
    """Strict JSON equality: bools, ints and floats never compare across types."""
    if type(a) is not type(b):
        return False
    if isinstance(a, dict):
        if a.keys() != b.keys():
            return False
        return all(json_equal(a[k], b[k]) for k in a)
    if isinstance(a, list):
        return len(a) == len(b) and all(json_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, float):
        return repr(a) == repr(b)
    return a == b


def copy_json(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: copy_json(v) for k, v in value.items()}
    if isinstance(value, list):
        return [copy_json(v) for v in value]
    return value


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# --- diff -----------------------------------------------------------------

def diff(before: Any, after: Any) -> list:
    """Return the patch turning ``before`` into ``after``."""
    ops: list = []
    _diff(before, after, [], ops)
    return ops


def _diff(a, b, tokens, ops):
    if isinstance(a, dict) and isinstance(b, dict):
        for key in a:
            if key not in b:
                ops.append(PatchOperation(PatchOp.REMOVE, join_pointer(tokens + [key])))
        for key in a:
            if key in b:
                _diff(a[key], b[key], tokens + [key], ops)
        for key in b:
            if key not in a:
                ops.append(PatchOperation(PatchOp.ADD, join_pointer(tokens + [key]),
                                          copy_json(b[key])))
        return
    if isinstance(a, list) and isinstance(b, list):
        common = min(len(a), len(b))
        for i in range(common):
            _diff(a[i], b[i], tokens + [str(i)], ops)
        for i in range(len(a) - 1, common - 1, -1):
            ops.append(PatchOperation(PatchOp.REMOVE, join_pointer(tokens + [str(i)])))
        for i in range(common, len(b)):
            ops.append(PatchOperation(PatchOp.ADD, join_pointer(tokens + [str(i)]),
                                      copy_json(b[i])))
        return
    if not json_equal(a, b):
        ops.append(PatchOperation(PatchOp.REPLACE, join_pointer(tokens), copy_json(b)))


# --- apply ----------------------------------------------------------------

def coerce_patch(patch: Iterable) -> list:
    """Accept PatchOperation objects or RFC 6902 dicts; reject copy/move/test."""
    out = []
    for i, op in enumerate(patch):
        if isinstance(op, PatchOperation):
            out.append(op)
            continue
        try:
            out.append(PatchOperation.from_json(op))
        except ModelError as exc:
            raise PatchError(str(exc), index=i, operation=op) from None
    return out


def _array_index(token, container, allow_end):
    if token == "-" and allow_end:
        return len(container)
    if not token.isdigit() or (len(token) > 1 and token[0] == "0"):
        raise KeyError(f"invalid array index {token!r}")
    idx = int(token)
    limit = len(container) if allow_end else len(container) - 1
    if idx > limit:
        raise KeyError(f"array index {idx} out of range")
    return idx


def _resolve_parent(doc, tokens):
    target = doc
    for tok in tokens[:-1]:
        if isinstance(target, dict):
            if tok not in target:
                raise KeyError(f"missing key {tok!r}")
            target = target[tok]
        elif isinstance(target, list):
            target = target[_array_index(tok, target, False)]
        else:
            raise KeyError(f"cannot descend into scalar at {tok!r}")
    return target


def _apply_one(doc, op: PatchOperation):
    tokens = split_pointer(op.path)
    if not tokens:
        if op.op is PatchOp.REMOVE:
            raise KeyError("cannot remove the document root")
        return copy_json(op.value)
    parent = _resolve_parent(doc, tokens)
    last = tokens[-1]
    if isinstance(parent, dict):
        if op.op is PatchOp.ADD:
            parent[last] = copy_json(op.value)
        elif last not in parent:
            raise KeyError(f"missing key {last!r}")
        elif op.op is PatchOp.REMOVE:
            del parent[last]
        else:
            parent[last] = copy_json(op.value)
    elif isinstance(parent, list):
        if op.op is PatchOp.ADD:
            parent.insert(_array_index(last, parent, True), copy_json(op.value))
        else:
            idx = _array_index(last, parent, False)
            if op.op is PatchOp.REMOVE:
                del parent[idx]
            else:
                parent[idx] = copy_json(op.value)
    else:
        raise KeyError("parent is not a container")
    return doc


def _apply_in_place(doc, ops):
    for i, op in enumerate(ops):
        try:
            doc = _apply_one(doc, op)
        except KeyError as exc:
            raise PatchError(f"{op.op.value} {op.path!r}: {exc.args[0]}", index=i,
                             operation=op) from None
    return doc


def apply(doc: Any, patch: Iterable) -> Any:
    """Apply ``patch`` to a copy of ``doc``; the input is never modified."""
    return _apply_in_place(copy_json(doc), coerce_patch(patch))


def reconstruct(base: Any, patches: Sequence, up_to: int) -> Any:
    """Apply ``patches[0:up_to]`` in order to ``base``."""
    if not 0 <= up_to <= len(patches):
        raise IndexError(f"up_to={up_to} outside [0, {len(patches)}]")
    doc = copy_json(base)
    for r in range(up_to):
        try:
            doc = _apply_in_place(doc, coerce_patch(patches[r]))
        except PatchError as exc:
            raise PatchError(exc.message, index=exc.index, operation=exc.operation,
                             revision=r) from None
    return doc


def patch_to_json(patch: Iterable[PatchOperation]) -> list:
    return [op.to_json() for op in patch]


def patch_from_json(data: Sequence[Mapping]) -> list:
    return coerce_patch(data)
