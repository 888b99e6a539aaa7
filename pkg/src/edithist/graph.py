"""Triple-level operation streams and the graph states built from them.

Covers extraction of addition/removal operations from revision diffs,
materialization and chronological splitting, N-Triples export of the static
and dynamic views, and PageRank/ClassRank scoring for subset selection.
"""

from __future__ import annotations

import logging
import random
import re
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

from . import patch as jp
from .model import (INSTANCE_OF, BlankNode, EntityId, Literal, OpKind, Revision, Triple,
                    TripleOperation, format_timestamp, parse_entity_id,
                    sorted_triples, statement_triples)

log = logging.getLogger(__name__)

ENTITY_NS = "http://kg.local/entity/"
REVISION_NS = "http://kg.local/revision/"
OPERATION_NS = "http://kg.local/operation/"
DATATYPE_NS = "http://kg.local/datatype/"
HIST_NS = "http://kg.local/hist#"


class ExtractionError(Exception):
    def __init__(self, message, revision_id=None):
        self.revision_id = revision_id
        super().__init__(message)


# --- extraction -----------------------------------------------------------

def triple_delta(before: Mapping, after: Mapping):
    """Triples removed and added between two snapshots of one entity."""
    old = statement_triples(before)
    new = statement_triples(after)
    return sorted_triples(old - new), sorted_triples(new - old)


def revision_deltas(revisions: Iterable[Revision]):
    """Yield ``(revision, removed, added)`` reconstructing each entity on the fly.

    Revisions must be ordered per entity; entities may interleave.
    """
    current: dict = {}
    for rev in revisions:
        before = current.get(rev.entity_id, {})
        try:
            after = jp.apply(before, rev.entity_diff)
        except jp.PatchError as exc:
            raise ExtractionError(f"revision {rev.id}: diff does not apply to the prior state "
                                  f"({exc})", rev.id) from None
        try:
            removed, added = triple_delta(before, after)
        except Exception as exc:
            raise ExtractionError(f"revision {rev.id}: cannot interpret entity content ({exc})",
                                  rev.id) from None
        current[rev.entity_id] = after
        yield rev, removed, added


def extract_triple_ops(revisions: Iterable[Revision]) -> list:
    """Addition/removal stream with global ordinals in (timestamp, revision id) order.

    Within a revision removals precede additions, so a replaced value shows
    up as its removal followed by the addition of the new value.
    """
    per_rev = list(revision_deltas(revisions))
    per_rev.sort(key=lambda item: item[0].order_key)
    ops = []
    for rev, removed, added in per_rev:
        for kind, triples in ((OpKind.REMOVAL, removed), (OpKind.ADDITION, added)):
            for t in triples:
                ops.append(TripleOperation(kind, t, rev.id, rev.timestamp, len(ops)))
    return ops


# --- states ---------------------------------------------------------------

@dataclass
class KnowledgeGraphState:
    triples: set = field(default_factory=set)
    horizon: int = -1

    def apply(self, op: TripleOperation) -> None:
        if op.kind is OpKind.ADDITION:
            self.triples.add(op.triple)
        elif op.triple in self.triples:
            self.triples.discard(op.triple)
        else:
            log.debug("removal of absent triple %s at ordinal %d ignored", op.triple, op.ordinal)
        self.horizon = op.ordinal

    def __len__(self):
        return len(self.triples)

    def __contains__(self, t):
        return t in self.triples

    def copy(self) -> "KnowledgeGraphState":
        return KnowledgeGraphState(set(self.triples), self.horizon)


def materialize(ops: Iterable[TripleOperation], up_to: int | None = None) -> KnowledgeGraphState:
    """State after every operation with ordinal <= ``up_to`` (all when None)."""
    state = KnowledgeGraphState()
    for op in ops:
        if up_to is not None and op.ordinal > up_to:
            break
        state.apply(op)
    return state


def class_membership(triples: Iterable[Triple]) -> dict:
    out: dict = defaultdict(set)
    for t in triples:
        if t.predicate == INSTANCE_OF and isinstance(t.object, EntityId):
            out[t.subject].add(t.object)
    return dict(out)


# --- chronological split --------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.70
    valid_fraction: float = 0.15

    def __post_init__(self):
        if not (0 < self.train_fraction <= 1 and 0 <= self.valid_fraction
                and self.train_fraction + self.valid_fraction <= 1 + 1e-12):
            raise ValueError("split fractions must be non-negative and sum to at most 1")

    @property
    def test_fraction(self) -> float:
        return 1 - self.train_fraction - self.valid_fraction


def split_counts(m: int, spec: SplitSpec = SplitSpec()):
    """(train, valid, test) revision counts for an entity with ``m`` revisions."""
    if m <= 0:
        return 0, 0, 0
    train_frac = Fraction(str(spec.train_fraction))
    cut_frac = train_frac + Fraction(str(spec.valid_fraction))
    train_end = max(1, int(train_frac * m))
    valid_end = min(m, max(train_end, int(cut_frac * m)))
    return train_end, valid_end - train_end, m - valid_end


@dataclass
class Split:
    train: list
    valid: list
    test: list
    assignment: dict  # revision id -> "train" | "valid" | "test"

    def ops(self, *names) -> list:
        out = []
        for name in names:
            out.extend(getattr(self, name))
        return sorted(out, key=lambda o: o.ordinal)


def assign_revisions(revisions: Iterable[Revision], spec: SplitSpec = SplitSpec()) -> dict:
    by_entity: dict = defaultdict(list)
    for rev in revisions:
        by_entity[rev.entity_id].append(rev)
    assignment = {}
    for revs in by_entity.values():
        revs.sort(key=lambda r: r.order_key)
        n_train, n_valid, _ = split_counts(len(revs), spec)
        for i, rev in enumerate(revs):
            assignment[rev.id] = ("train" if i < n_train else
                                  "valid" if i < n_train + n_valid else "test")
    return assignment


def chronological_split(revisions: Iterable[Revision], ops: Sequence[TripleOperation],
                        spec: SplitSpec = SplitSpec()) -> Split:
    """Split operations by the per-entity chronological position of their revision."""
    assignment = assign_revisions(revisions, spec)
    parts: dict = {"train": [], "valid": [], "test": []}
    for op in ops:
        parts[assignment[op.revision_id]].append(op)
    return Split(parts["train"], parts["valid"], parts["test"], assignment)


# --- N-Triples ------------------------------------------------------------

def entity_iri(eid: EntityId) -> str:
    return f"<{ENTITY_NS}{eid}>"


def _escape_literal(text: str) -> str:
    return (text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
            .replace("\r", "\\r").replace("\t", "\\t"))


def literal_term(lexical: str, datatype: str | None = None) -> str:
    body = f'"{_escape_literal(lexical)}"'
    if datatype and datatype != "string":
        body += f"^^<{DATATYPE_NS}{datatype}>"
    return body


def term(value) -> str:
    if isinstance(value, EntityId):
        return entity_iri(value)
    if isinstance(value, Literal):
        return literal_term(value.lexical, value.datatype)
    if isinstance(value, BlankNode):
        return f"_:{value.label}"
    raise TypeError(f"cannot serialize {value!r}")


def triple_line(t: Triple) -> str:
    return f"{term(t.subject)} {term(t.predicate)} {term(t.object)} ."


def _write_lines(lines: Iterable[str], out) -> int:
    lines = sorted(lines)
    with open(out, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")
    return len(lines)


def export_static(state, out) -> int:
    """Write the state's triples as sorted N-Triples; returns the triple count."""
    triples = state.triples if isinstance(state, KnowledgeGraphState) else state
    return _write_lines((triple_line(t) for t in triples), out)


def _hist(name: str) -> str:
    return f"<{HIST_NS}{name}>"


def dynamic_lines(ops: Iterable[TripleOperation], revisions: Iterable[Revision]) -> list:
    revs = {r.id: r for r in revisions}
    lines = []
    seen = set()
    for op in ops:
        r_iri = f"<{REVISION_NS}{op.revision_id}>"
        if op.revision_id not in seen:
            seen.add(op.revision_id)
            rev = revs.get(op.revision_id)
            if rev is None:
                raise KeyError(f"operation {op.ordinal} references unknown revision {op.revision_id}")
            lines.append(f"{r_iri} {_hist('revisionOf')} {entity_iri(rev.entity_id)} .")
            if rev.parent_id is not None:
                lines.append(f"{r_iri} {_hist('parentRevision')} <{REVISION_NS}{rev.parent_id}> .")
            lines.append(f"{r_iri} {_hist('timestamp')} {literal_term(format_timestamp(rev.timestamp))} .")
            lines.append(f"{r_iri} {_hist('author')} {literal_term(rev.username)} .")
        o_iri = f"<{OPERATION_NS}{op.ordinal}>"
        kind = "Addition" if op.kind is OpKind.ADDITION else "Removal"
        lines.append(f"{r_iri} {_hist('hasOperation')} {o_iri} .")
        lines.append(f"{o_iri} {_hist('opType')} {_hist(kind)} .")
        lines.append(f"{o_iri} {_hist('subject')} {term(op.triple.subject)} .")
        lines.append(f"{o_iri} {_hist('predicate')} {term(op.triple.predicate)} .")
        lines.append(f"{o_iri} {_hist('object')} {term(op.triple.object)} .")
        lines.append(f"{o_iri} {_hist('ordinal')} {literal_term(str(op.ordinal))} .")
    return lines


def export_dynamic(ops: Iterable[TripleOperation], revisions: Iterable[Revision], out) -> int:
    """Serialize revisions and their operations; returns the number of lines written."""
    return _write_lines(dynamic_lines(ops, revisions), out)


_NT_TERM = r'(<[^>]*>|_:[A-Za-z0-9_]+|"(?:[^"\\]|\\.)*"(?:\^\^<[^>]*>)?)'
_NT_LINE = re.compile(rf"^{_NT_TERM}\s+{_NT_TERM}\s+{_NT_TERM}\s*\.\s*$")
_UNESCAPE = {"\\\\": "\\", '\\"': '"', "\\n": "\n", "\\r": "\r", "\\t": "\t"}


def parse_term(text: str):
    if text.startswith("<"):
        iri = text[1:-1]
        if iri.startswith(ENTITY_NS):
            return parse_entity_id(iri[len(ENTITY_NS):])
        return iri
    if text.startswith("_:"):
        return BlankNode(text[2:])
    m = re.match(r'^"((?:[^"\\]|\\.)*)"(?:\^\^<([^>]*)>)?$', text)
    if m is None:
        raise ValueError(f"bad N-Triples term {text!r}")
    lexical = re.sub(r"\\[\\\"nrt]", lambda mm: _UNESCAPE[mm.group(0)], m.group(1))
    dtype = m.group(2)
    if dtype is None:
        return Literal(lexical, "string")
    return Literal(lexical, dtype[len(DATATYPE_NS):] if dtype.startswith(DATATYPE_NS) else dtype)


def read_ntriples(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            m = _NT_LINE.match(line.rstrip("\n"))
            if m is None:
                raise ValueError(f"{path}:{lineno}: not an N-Triples statement")
            out.append(tuple(parse_term(g) for g in m.groups()))
    return out


def read_static(path) -> set:
    return {Triple(s, p, o) for s, p, o in read_ntriples(path)}


def replay_dynamic(path) -> KnowledgeGraphState:
    """Rebuild the graph state by applying a dynamic export's operations in ordinal order."""
    fields: dict = defaultdict(dict)
    for s, p, o in read_ntriples(path):
        if isinstance(s, str) and s.startswith(OPERATION_NS) and isinstance(p, str):
            fields[s][p[len(HIST_NS):]] = o
    ops = []
    for f in fields.values():
        kind = OpKind.ADDITION if f["opType"] == HIST_NS + "Addition" else OpKind.REMOVAL
        ordinal = int(f["ordinal"].lexical)
        ops.append((ordinal, kind, Triple(f["subject"], f["predicate"], f["object"])))
    ops.sort(key=lambda x: x[0])
    state = KnowledgeGraphState()
    for ordinal, kind, t in ops:
        if kind is OpKind.ADDITION:
            state.triples.add(t)
        else:
            state.triples.discard(t)
        state.horizon = ordinal
    return state


def sample_instances(membership: Mapping, per_class: int = 300, seed: int = 42) -> set:
    """Pick up to ``per_class`` random instances from every class."""
    by_class: dict = defaultdict(list)
    for inst, classes in membership.items():
        for c in classes:
            by_class[c].append(inst)
    rng = random.Random(seed)
    chosen = set()
    for c in sorted(by_class):
        members = sorted(by_class[c])
        chosen.update(members if len(members) <= per_class else rng.sample(members, per_class))
    return chosen


def restrict_subjects(state: KnowledgeGraphState, subjects: set) -> KnowledgeGraphState:
    return KnowledgeGraphState({t for t in state.triples if t.subject in subjects}, state.horizon)


# --- PageRank / ClassRank -------------------------------------------------

def pagerank(edges: Iterable, damping: float = 0.85, iterations: int = 100) -> dict:
    """Power-iteration PageRank; dangling mass is spread uniformly."""
    if not 0 < damping < 1:
        raise ValueError("damping must lie in (0, 1)")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    edges = set(edges)
    nodes = sorted({n for e in edges for n in e}, key=_node_key)
    if not nodes:
        return {}
    idx = {n: i for i, n in enumerate(nodes)}
    # fixed edge order keeps the floating-point sums reproducible across processes
    edges = sorted(edges, key=lambda e: (idx[e[0]], idx[e[1]]))
    n = len(nodes)
    src = np.array([idx[a] for a, _ in edges], dtype=np.int64)
    dst = np.array([idx[b] for _, b in edges], dtype=np.int64)
    out_deg = np.bincount(src, minlength=n).astype(float)
    weights = 1.0 / out_deg[src] if len(src) else np.zeros(0)
    transition = sparse.csr_matrix((weights, (dst, src)), shape=(n, n))
    dangling = out_deg == 0
    rank = np.full(n, 1.0 / n)
    for _ in range(iterations):
        rank = damping * (transition @ rank + rank[dangling].sum() / n) + (1 - damping) / n
    rank /= rank.sum()
    return {node: float(rank[i]) for node, i in idx.items()}


def _node_key(node):
    return node.sort_key() if isinstance(node, EntityId) else ("", str(node))


def entity_edges(triples: Iterable[Triple]) -> set:
    return {(t.subject, t.object) for t in triples if isinstance(t.object, EntityId)}


@dataclass(frozen=True)
class ClassScore:
    class_id: EntityId
    score: float
    instance_count: int


def class_rank(instance_of: Iterable, scores: Mapping, aggregate: str = "sum") -> list:
    """Aggregate instance PageRank per class; sorted by score then class id."""
    if aggregate not in ("sum", "mean"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    members: dict = defaultdict(set)
    for inst, cls in instance_of:
        members[cls].add(inst)
    out = []
    for cls, insts in members.items():
        values = [scores.get(i, 0.0) for i in sorted(insts, key=_node_key)]
        total = float(sum(values)) if aggregate == "sum" else float(np.mean(values))
        out.append(ClassScore(cls, total, len(insts)))
    out.sort(key=lambda c: (-c.score, _node_key(c.class_id)))
    return out


def top_classes(ranking: Sequence[ClassScore], labels: Mapping, top: int = 100,
                filter_label: str | None = "Wikimedia") -> list:
    """First ``top`` classes whose label does not contain ``filter_label``."""
    out = []
    for cs in ranking:
        label = labels.get(cs.class_id, "")
        if filter_label and filter_label in label:
            continue
        out.append(cs)
        if len(out) >= top:
            break
    return out


def read_pagerank_file(path) -> dict:
    """Read ``<id> <score>`` lines (tab or space separated), ignoring unknown ids."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) < 2:
                continue
            try:
                out[parse_entity_id(parts[0])] = float(parts[1])
            except ValueError:
                continue
    return out
