"""Edit-history analyses: operation life cycles, per-class statistics,
removed properties and edit wars.

Patch operations map onto the categories below by their JSON path:

======================================  ==========  ======================
path                                    op          category
======================================  ==========  ======================
(any, prior document empty)             any         CreateEntity
/labels, /descriptions, /aliases ...    any         FingerprintChange
/claims/P                               add         AddStatementGroup
/claims/P                               remove      RemoveStatementGroup
/claims/P                               replace     ReplaceStatement
/claims/P/i                             add/remove  AddStatement/RemoveStatement
/claims/P/i, /claims/P/i/mainsnak/...   replace     ReplaceStatement
/claims/P/i/rank                        any         ChangeRank
/claims/P/i/id                          replace     ChangeOrder
/claims/P/i/qualifiers-order ...        any         ChangeOrder
/claims/P/i/qualifiers[/Q[/j]]          add/remove  AddQualifier/RemoveQualifier
/claims/P/i/qualifiers/Q/j/...          replace     ReplaceQualifier
/claims/P/i/references[/k]              add/remove  AddReference/RemoveReference
/claims/P/i/references/k/...            other       ReplaceReference
anything else                           any         FingerprintChange (warned)
======================================  ==========  ======================
"""

from __future__ import annotations

import csv
import enum
import io
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import patch as jp
from .model import EntityId, OpKind, PatchOp, PatchOperation, ObjectValue, TripleOperation

log = logging.getLogger(__name__)


class OpCategory(enum.Enum):
    CREATE_ENTITY = "CreateEntity"
    ADD_STATEMENT_GROUP = "AddStatementGroup"
    ADD_STATEMENT = "AddStatement"
    ADD_QUALIFIER = "AddQualifier"
    ADD_REFERENCE = "AddReference"
    REMOVE_STATEMENT_GROUP = "RemoveStatementGroup"
    REMOVE_STATEMENT = "RemoveStatement"
    REMOVE_QUALIFIER = "RemoveQualifier"
    REMOVE_REFERENCE = "RemoveReference"
    REPLACE_STATEMENT = "ReplaceStatement"
    REPLACE_QUALIFIER = "ReplaceQualifier"
    REPLACE_REFERENCE = "ReplaceReference"
    CHANGE_RANK = "ChangeRank"
    CHANGE_ORDER = "ChangeOrder"
    FINGERPRINT_CHANGE = "FingerprintChange"


C = OpCategory
_FINGERPRINT_KEYS = {"labels", "descriptions", "aliases"}
_ADD_REMOVE = {
    "qualifiers": (C.ADD_QUALIFIER, C.REMOVE_QUALIFIER, C.REPLACE_QUALIFIER),
    "references": (C.ADD_REFERENCE, C.REMOVE_REFERENCE, C.REPLACE_REFERENCE),
}


def categorize(patch_op, prior_doc: Mapping | None) -> OpCategory:
    """Category of one patch operation applied to ``prior_doc``."""
    if not isinstance(patch_op, PatchOperation):
        patch_op = PatchOperation.from_json(patch_op)
    if not prior_doc:
        return C.CREATE_ENTITY
    tokens = jp.split_pointer(patch_op.path)
    op = patch_op.op
    if tokens and tokens[0] in _FINGERPRINT_KEYS:
        return C.FINGERPRINT_CHANGE
    if not tokens or tokens[0] != "claims":
        log.warning("unclassifiable patch path %r; counted as a fingerprint change", patch_op.path)
        return C.FINGERPRINT_CHANGE
    depth = len(tokens)
    if depth == 1:
        return {PatchOp.ADD: C.ADD_STATEMENT_GROUP, PatchOp.REMOVE: C.REMOVE_STATEMENT_GROUP,
                PatchOp.REPLACE: C.REPLACE_STATEMENT}[op]
    if depth == 2:
        present = tokens[1] in (prior_doc.get("claims") or {})
        if op is PatchOp.ADD:
            return C.ADD_STATEMENT if present else C.ADD_STATEMENT_GROUP
        if op is PatchOp.REMOVE:
            return C.REMOVE_STATEMENT_GROUP
        return C.REPLACE_STATEMENT
    if depth == 3:
        return {PatchOp.ADD: C.ADD_STATEMENT, PatchOp.REMOVE: C.REMOVE_STATEMENT,
                PatchOp.REPLACE: C.REPLACE_STATEMENT}[op]
    part = tokens[3]
    if part == "rank":
        return C.CHANGE_RANK
    if part.endswith("-order"):
        return C.CHANGE_ORDER
    if part == "id":
        return C.CHANGE_ORDER
    if part in ("mainsnak", "type"):
        return C.REPLACE_STATEMENT
    if part in _ADD_REMOVE:
        add, remove, replace = _ADD_REMOVE[part]
        # qualifiers: /qualifiers, /qualifiers/Q, /qualifiers/Q/j are whole-snak edits
        # references: /references, /references/k are whole-reference edits
        whole = 6 if part == "qualifiers" else 5
        if len(tokens) <= whole and op is not PatchOp.REPLACE:
            return add if op is PatchOp.ADD else remove
        if part == "references" and len(tokens) > 5 and tokens[5] == "snaks-order":
            return C.CHANGE_ORDER
        return replace
    log.warning("unclassifiable patch path %r; counted as a fingerprint change", patch_op.path)
    return C.FINGERPRINT_CHANGE


def revision_categories(diff: Sequence, prior_doc: Mapping) -> list:
    """Categories of one revision's operations; a creating revision counts once."""
    ops = jp.coerce_patch(diff)
    if not prior_doc:
        return [C.CREATE_ENTITY] if ops else []
    return [categorize(op, prior_doc) for op in ops]


def entity_category_sequence(revisions: Iterable) -> list:
    """Category sequence across one entity's revision history."""
    seq = []
    doc: dict = {}
    for rev in revisions:
        seq.extend(revision_categories(rev.entity_diff, doc))
        doc = jp.apply(doc, rev.entity_diff)
    return seq


# --- transitions ----------------------------------------------------------

@dataclass
class TransitionGraph:
    state_counts: Counter = field(default_factory=Counter)
    edge_counts: Counter = field(default_factory=Counter)

    def outgoing(self, state) -> dict:
        return {b: n for (a, b), n in self.edge_counts.items() if a == state}

    def to_dot(self) -> str:
        lines = ["digraph transitions {"]
        for state in sorted(self.state_counts, key=lambda s: s.value):
            lines.append(f'  "{state.value}" [count={self.state_counts[state]}];')
        for (a, b), n in sorted(self.edge_counts.items(), key=lambda e: (e[0][0].value, e[0][1].value)):
            lines.append(f'  "{a.value}" -> "{b.value}" [weight={n}, label="{n}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["source", "target", "count"])
        for (a, b), n in sorted(self.edge_counts.items(), key=lambda e: (-e[1], e[0][0].value, e[0][1].value)):
            w.writerow([a.value, b.value, n])
        return buf.getvalue()


def transitions_from_sequences(sequences: Iterable[Sequence], prune_fraction: float = 0.10) -> TransitionGraph:
    if not 0 <= prune_fraction < 1:
        raise ValueError("prune_fraction must lie in [0, 1)")
    graph = TransitionGraph()
    for seq in sequences:
        graph.state_counts.update(seq)
        graph.edge_counts.update(zip(seq, seq[1:]))
    if prune_fraction > 0:
        totals: Counter = Counter()
        for (a, _), n in graph.edge_counts.items():
            totals[a] += n
        graph.edge_counts = Counter({e: n for e, n in graph.edge_counts.items()
                                     if n >= prune_fraction * totals[e[0]]})
    return graph


def transition_graph(store, prune_fraction: float = 0.10) -> TransitionGraph:
    """Accumulate consecutive-category transitions over every entity of a store.

    ``store`` is a :class:`edithist.ingest.Store` or a mapping of entity id to
    its ordered revisions.
    """
    if hasattr(store, "entity_ids"):
        histories = (store.revisions(e) for e in store.entity_ids())
    else:
        histories = (store[e] for e in sorted(store))
    return transitions_from_sequences((entity_category_sequence(h) for h in histories),
                                      prune_fraction)


# --- per-class statistics -------------------------------------------------

def _class_instances(membership: Mapping) -> dict:
    out: dict = defaultdict(set)
    for inst, classes in membership.items():
        for c in classes:
            out[c].add(inst)
    return out


def _op_counts(ops: Iterable[TripleOperation]) -> dict:
    """Per-subject addition/removal/replacement counts.

    A removal and an addition on the same subject and property within one
    revision form a replacement and are counted once.
    """
    groups: dict = defaultdict(lambda: [0, 0])
    for op in ops:
        key = (op.revision_id, op.triple.subject, op.triple.predicate)
        groups[key][0 if op.kind is OpKind.ADDITION else 1] += 1
    per_subject: dict = defaultdict(lambda: {"additions": 0, "removals": 0, "replacements": 0})
    for (_, subj, _), (adds, rems) in groups.items():
        rep = min(adds, rems)
        c = per_subject[subj]
        c["replacements"] += rep
        c["additions"] += adds - rep
        c["removals"] += rems - rep
    return per_subject


@dataclass(frozen=True)
class ClassOpStats:
    class_id: EntityId
    instances: int
    additions: float
    removals: float
    replacements: float

    @property
    def total(self) -> float:
        return self.additions + self.removals + self.replacements


def class_operation_stats(ops: Iterable[TripleOperation], membership: Mapping) -> list:
    """Mean per-instance operation counts per class, busiest classes first."""
    ops = list(ops)
    if not ops:
        return []
    per_subject = _op_counts(ops)
    out = []
    for cls, insts in _class_instances(membership).items():
        if not insts:
            continue
        sums = {k: sum(per_subject[i][k] for i in insts if i in per_subject)
                for k in ("additions", "removals", "replacements")}
        n = len(insts)
        out.append(ClassOpStats(cls, n, sums["additions"] / n, sums["removals"] / n,
                                sums["replacements"] / n))
    out.sort(key=lambda s: (-s.total, s.class_id.sort_key()))
    return out


def property_label(pid: EntityId, labels: Mapping | None = None) -> str:
    """Display label; properties without a known label render as deleted."""
    label = (labels or {}).get(pid)
    return label if label else f"[deleted property]({pid})"


def most_removed_properties(ops: Iterable[TripleOperation], membership: Mapping,
                            class_id: EntityId) -> list:
    """``(property, removals per instance)`` for one class, most removed first."""
    members = _class_instances(membership)
    if class_id not in members:
        raise KeyError(f"class {class_id} not found")
    insts = members[class_id]
    counts: Counter = Counter()
    for op in ops:
        if op.kind is OpKind.REMOVAL and op.triple.subject in insts:
            counts[op.triple.predicate] += 1
    ranked = [(p, n / len(insts)) for p, n in counts.items()]
    ranked.sort(key=lambda x: (-x[1], x[0].sort_key()))
    return ranked


# --- edit wars ------------------------------------------------------------

@dataclass(frozen=True)
class EditWarRecord:
    entity: EntityId
    property: EntityId
    value: ObjectValue
    add_ordinal: int
    remove_ordinal: int
    readd_ordinal: int


def detect_edit_wars(ops: Iterable[TripleOperation]) -> list:
    """Completed add, remove-or-replace, re-add cycles per (entity, property, value).

    Every re-addition that follows a removal of a previously added value is
    one war; the record points to the latest removal before the re-addition
    and the latest addition before that removal.
    """
    anchor: dict = {}
    pending: dict = {}
    wars = []
    for op in ops:
        key = (op.triple.subject, op.triple.predicate, op.triple.object)
        if op.kind is OpKind.ADDITION:
            if key in pending:
                wars.append(EditWarRecord(*key, anchor[key], pending.pop(key), op.ordinal))
            anchor[key] = op.ordinal
        elif key in anchor:
            pending[key] = op.ordinal
    return wars


def war_keys(wars: Iterable[EditWarRecord]) -> set:
    return {(w.entity, w.property, w.value) for w in wars}


def conflict_rankings(wars: Sequence[EditWarRecord], membership: Mapping):
    """(wars per property, mean wars per instance of each class), both descending."""
    per_prop = Counter(w.property for w in wars)
    prop_rank = sorted(per_prop.items(), key=lambda x: (-x[1], x[0].sort_key()))
    if not wars:
        return prop_rank, []
    per_entity = Counter(w.entity for w in wars)
    class_rank = []
    for cls, insts in _class_instances(membership).items():
        if insts:
            class_rank.append((cls, sum(per_entity[i] for i in insts) / len(insts)))
    class_rank.sort(key=lambda x: (-x[1], x[0].sort_key()))
    return prop_rank, class_rank


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([str(x) if not isinstance(x, float) else f"{x:.6g}" for x in row])
    return buf.getvalue()
