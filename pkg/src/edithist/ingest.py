"""Revision dump ingestion and the file-backed entity/revision store.

Two input formats are supported: a subset of the MediaWiki XML export
schema whose ``<text>`` payloads hold full entity JSON, and a JSON-lines
revision log whose records already carry RFC 6902 diffs.

A store directory holds ``entities.jsonl`` (final entity snapshots),
``revisions.jsonl`` (the revision log), ``index.json`` (byte offsets per
entity) and ``stats.json``.
"""

from __future__ import annotations

import io
import json
import logging
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import IO, Iterable, Iterator, Union
from xml.parsers import expat

from . import patch as jp
from .model import (ModelError, PatchOperation, Revision, format_timestamp, parse_entity_id,
                    parse_timestamp)

log = logging.getLogger(__name__)

RECORD_KEYS = ("id", "parent_id", "entity_id", "timestamp", "username", "comment", "entity_diff")


class IngestError(Exception):
    def __init__(self, message, *, line=None, byte_offset=None, revision_id=None):
        self.line = line
        self.byte_offset = byte_offset
        self.revision_id = revision_id
        super().__init__(message)


class StoreError(Exception):
    pass


class EntityNotFound(StoreError, KeyError):
    def __str__(self):
        return self.args[0] if self.args else "entity not found"


# --- record (de)serialization ---------------------------------------------

def record_to_line(rev: Revision) -> str:
    return json.dumps(rev.to_json(), separators=(",", ":"), ensure_ascii=False)


def record_from_json(obj, line=None) -> Revision:
    """Validate one revision-log object against the seven-field schema."""
    where = f"line {line}: " if line is not None else ""
    if not isinstance(obj, dict):
        raise IngestError(f"{where}record must be a JSON object", line=line)
    missing = [k for k in RECORD_KEYS if k not in obj]
    if missing:
        raise IngestError(f"{where}missing field(s) {', '.join(missing)}", line=line)
    extra = sorted(set(obj) - set(RECORD_KEYS))
    if extra:
        raise IngestError(f"{where}unexpected field(s) {', '.join(extra)}", line=line)
    rid, parent = obj["id"], obj["parent_id"]
    if not isinstance(rid, int) or isinstance(rid, bool) or rid < 1:
        raise IngestError(f"{where}id must be a positive integer", line=line)
    if parent is not None and (not isinstance(parent, int) or isinstance(parent, bool) or parent < 1):
        raise IngestError(f"{where}parent_id must be null or a positive integer", line=line)
    if not isinstance(obj["username"], str):
        raise IngestError(f"{where}username must be a string", line=line)
    if obj["comment"] is not None and not isinstance(obj["comment"], str):
        raise IngestError(f"{where}comment must be a string or null", line=line)
    if not isinstance(obj["entity_diff"], list):
        raise IngestError(f"{where}entity_diff must be a JSON array", line=line)
    try:
        eid = parse_entity_id(obj["entity_id"])
        ts = parse_timestamp(obj["timestamp"])
        diff = tuple(PatchOperation.from_json(op) for op in obj["entity_diff"])
    except ModelError as exc:
        raise IngestError(f"{where}{exc}", line=line) from None
    return Revision(rid, parent, eid, ts, obj["username"], obj["comment"], diff)


# --- JSON lines -----------------------------------------------------------

def _lines(source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8") as fh:
            yield from fh
    else:
        yield from source


def ingest_jsonl(source) -> list:
    """Read a revision log; per-entity timestamp disorder is stably repaired."""
    records = []
    for lineno, raw in enumerate(_lines(source), start=1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise IngestError(f"line {lineno}: invalid JSON ({exc.msg})", line=lineno) from None
        records.append(record_from_json(obj, lineno))
    return _reorder_per_entity(records)


def _reorder_per_entity(records: list) -> list:
    slots: dict = {}
    for pos, rec in enumerate(records):
        slots.setdefault(rec.entity_id, []).append(pos)
    out = list(records)
    for eid, positions in slots.items():
        revs = [records[p] for p in positions]
        ordered = sorted(revs, key=lambda r: r.order_key)
        if ordered != revs:
            log.warning("revisions of %s are not in chronological order; reordering", eid)
            for p, rec in zip(positions, ordered):
                out[p] = rec
    return out


# --- MediaWiki XML --------------------------------------------------------

_REV_FIELDS = {"id", "parentid", "timestamp", "username", "ip", "comment", "text"}


class _DumpHandler:
    def __init__(self):
        self.stack: list = []
        self.page: dict | None = None
        self.rev: dict | None = None
        self.buf: list | None = None
        self.done_pages: list = []

    def start(self, name, attrs):
        parent = self.stack[-1] if self.stack else None
        self.stack.append(name)
        if name == "page":
            self.page = {"title": "", "revisions": []}
        elif name == "revision" and self.page is not None:
            self.rev = {}
        elif self.rev is not None and name in _REV_FIELDS and parent in ("revision", "contributor"):
            if name == "id" and parent != "revision":
                return
            self.buf = []
        elif self.page is not None and self.rev is None and name == "title":
            self.buf = []

    def data(self, text):
        if self.buf is not None:
            self.buf.append(text)

    def end(self, name):
        self.stack.pop()
        if self.buf is not None and (name in _REV_FIELDS or name == "title"):
            value = "".join(self.buf)
            self.buf = None
            if self.rev is not None:
                self.rev[name] = value
            elif self.page is not None and name == "title":
                self.page["title"] = value
        if name == "revision" and self.rev is not None:
            self.page["revisions"].append(self.rev)
            self.rev = None
        elif name == "page" and self.page is not None:
            self.done_pages.append(self.page)
            self.page = None


def _entity_from_title(title: str):
    tail = title.split(":", 1)[-1].strip()
    return parse_entity_id(tail)


def _page_records(page: dict) -> list:
    raw = []
    for r in page["revisions"]:
        try:
            rid = int(r.get("id", ""))
        except ValueError:
            raise IngestError(f"revision without a numeric id in page {page['title']!r}") from None
        text = r.get("text", "")
        if not text or not text.strip():
            raise IngestError(f"revision {rid} has an empty text payload", revision_id=rid)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise IngestError(f"revision {rid}: text payload is not valid JSON ({exc.msg})",
                              revision_id=rid) from None
        try:
            ts = parse_timestamp(r.get("timestamp", ""))
            eid = parse_entity_id(doc["id"]) if isinstance(doc, dict) and "id" in doc \
                else _entity_from_title(page["title"])
        except ModelError as exc:
            raise IngestError(f"revision {rid}: {exc}", revision_id=rid) from None
        parent = r.get("parentid")
        raw.append({
            "id": rid, "parent": int(parent) if parent else None, "ts": ts, "eid": eid,
            "user": r.get("username", r.get("ip", "")), "comment": r.get("comment"), "doc": doc,
        })
    ordered = sorted(raw, key=lambda r: (r["ts"], r["id"]))
    if [r["id"] for r in ordered] != [r["id"] for r in raw]:
        log.warning("page %r: revisions out of timestamp order; reordering", page["title"])
    records = []
    prev_doc: object = {}
    prev_id = None
    for r in ordered:
        if r["parent"] != prev_id:
            log.warning("revision %d: parent %s contradicts timestamp order; using %s",
                        r["id"], r["parent"], prev_id)
        diff = tuple(jp.diff(prev_doc, r["doc"]))
        records.append(Revision(r["id"], prev_id, r["eid"], r["ts"], r["user"], r["comment"], diff))
        prev_doc, prev_id = r["doc"], r["id"]
    return records


def ingest_xml_dump(source, chunk_size: int = 1 << 16) -> Iterator[Revision]:
    """Stream revision records out of a MediaWiki-style XML history dump.

    Records are yielded page by page as soon as each ``</page>`` is parsed.
    """
    handler = _DumpHandler()
    parser = expat.ParserCreate("UTF-8")
    parser.StartElementHandler = handler.start
    parser.EndElementHandler = handler.end
    parser.CharacterDataHandler = handler.data
    parser.buffer_text = True

    close = False
    if isinstance(source, (str, os.PathLike)):
        stream: IO = open(source, "rb")
        close = True
    elif isinstance(source, (bytes, bytearray)):
        stream = io.BytesIO(source)
    else:
        stream = source
    try:
        while True:
            chunk = stream.read(chunk_size)
            final = not chunk
            if isinstance(chunk, str):
                chunk = chunk.encode("utf-8")
            try:
                parser.Parse(chunk, final)
            except expat.ExpatError as exc:
                offset = parser.ErrorByteIndex
                raise IngestError(f"malformed XML at byte {offset}: {expat.ErrorString(exc.code)}",
                                  byte_offset=offset) from None
            while handler.done_pages:
                yield from _page_records(handler.done_pages.pop(0))
            if final:
                break
    finally:
        if close:
            stream.close()


# --- store ----------------------------------------------------------------

@dataclass(frozen=True)
class StoreLayout:
    entities_file: Path
    revisions_file: Path
    index_file: Path

    @classmethod
    def in_dir(cls, directory) -> "StoreLayout":
        d = Path(directory)
        return cls(d / "entities.jsonl", d / "revisions.jsonl", d / "index.json")

    @property
    def stats_file(self) -> Path:
        return self.index_file.with_name("stats.json")


@dataclass(frozen=True)
class StoreStats:
    entities: int = 0
    revisions: int = 0
    operations: int = 0
    patch_operations: int = 0


def _as_layout(out) -> StoreLayout:
    return out if isinstance(out, StoreLayout) else StoreLayout.in_dir(out)


def build_store(records: Iterable[Revision], out) -> StoreStats:
    """Write the store files and return their statistics.

    ``operations`` counts triple-level additions and removals; it equals the
    length of the stream produced by :func:`edithist.graph.extract_triple_ops`.
    """
    from .graph import triple_delta

    layout = _as_layout(out)
    current: dict = {}
    offsets: dict = {}
    n_revisions = n_ops = n_patch_ops = 0
    try:
        layout.revisions_file.parent.mkdir(parents=True, exist_ok=True)
        with open(layout.revisions_file, "wb") as fh:
            for rec in records:
                before = current.get(rec.entity_id, {})
                try:
                    after = jp.apply(before, rec.entity_diff)
                except jp.PatchError as exc:
                    raise StoreError(f"revision {rec.id} of {rec.entity_id}: {exc}") from None
                removed, added = triple_delta(before, after)
                n_ops += len(removed) + len(added)
                n_patch_ops += len(rec.entity_diff)
                current[rec.entity_id] = after
                offsets.setdefault(rec.entity_id, {"entity": None, "revisions": []})
                offsets[rec.entity_id]["revisions"].append(fh.tell())
                fh.write(record_to_line(rec).encode("utf-8") + b"\n")
                n_revisions += 1
        with open(layout.entities_file, "wb") as fh:
            for eid in sorted(current):
                offsets[eid]["entity"] = fh.tell()
                fh.write(jp.canonical_json(current[eid]).encode("utf-8") + b"\n")
        index = {str(eid): offsets[eid] for eid in sorted(offsets)}
        layout.index_file.write_text(json.dumps(index, separators=(",", ":")) + "\n")
        stats = StoreStats(len(current), n_revisions, n_ops, n_patch_ops)
        layout.stats_file.write_text(json.dumps(asdict(stats), indent=2) + "\n")
    except OSError as exc:
        raise StoreError(f"I/O failure writing store at {exc.filename}: {exc.strerror}") from exc
    return stats


class Store:
    """Read-only view over a built store directory."""

    def __init__(self, directory):
        self.layout = _as_layout(directory)
        if not self.layout.index_file.exists():
            raise StoreError(f"no store index at {self.layout.index_file}")
        raw = json.loads(self.layout.index_file.read_text())
        self._index = {parse_entity_id(k): v for k, v in raw.items()}

    def entity_ids(self) -> list:
        return sorted(self._index)

    def __contains__(self, eid) -> bool:
        return eid in self._index

    def _entry(self, eid):
        try:
            return self._index[eid]
        except KeyError:
            raise EntityNotFound(f"entity {eid} not found in store") from None

    def stats(self) -> StoreStats:
        if self.layout.stats_file.exists():
            return StoreStats(**json.loads(self.layout.stats_file.read_text()))
        return StoreStats()

    def final_document(self, eid) -> dict:
        off = self._entry(eid)["entity"]
        with open(self.layout.entities_file, "rb") as fh:
            fh.seek(off)
            return json.loads(fh.readline())

    def revisions(self, eid) -> list:
        offsets = self._entry(eid)["revisions"]
        out = []
        with open(self.layout.revisions_file, "rb") as fh:
            for off in offsets:
                fh.seek(off)
                out.append(record_from_json(json.loads(fh.readline())))
        return out

    def revision_count(self, eid) -> int:
        return len(self._entry(eid)["revisions"])

    def all_revisions(self) -> Iterator[Revision]:
        """Every record, in log order."""
        with open(self.layout.revisions_file, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if line.strip():
                    yield record_from_json(json.loads(line), lineno)

    def get_entity_at(self, eid, revision_index: int) -> dict:
        n = self.revision_count(eid)
        if not 0 <= revision_index < n:
            raise IndexError(f"revision index {revision_index} outside [0, {n}) for {eid}")
        revs = self.revisions(eid)
        return jp.reconstruct({}, [r.entity_diff for r in revs], revision_index + 1)


def get_entity_at(store: Union[Store, str, os.PathLike], eid, revision_index: int) -> dict:
    if not isinstance(store, Store):
        store = Store(store)
    if isinstance(eid, str):
        eid = parse_entity_id(eid)
    return store.get_entity_at(eid, revision_index)


def write_jsonl(records: Iterable[Revision], path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_line(rec) + "\n")
            n += 1
    return n


__all__ = [
    "IngestError", "StoreError", "EntityNotFound", "StoreLayout", "StoreStats", "Store",
    "ingest_xml_dump", "ingest_jsonl", "build_store", "get_entity_at", "record_from_json",
    "record_to_line", "write_jsonl", "format_timestamp",
]
