import random
from collections import Counter
from datetime import datetime, timezone

import pytest

from edithist.analytics import (OpCategory as C, categorize, class_operation_stats,
                                conflict_rankings, detect_edit_wars, entity_category_sequence,
                                most_removed_properties, property_label, transition_graph,
                                transitions_from_sequences)
from edithist.model import OpKind, Triple, TripleOperation, item, prop
from oracles import brute_force_wars, random_history

TS = datetime(2020, 1, 1, tzinfo=timezone.utc)
DOC = {"id": "Q1", "claims": {"P31": [{"mainsnak": {}, "id": "Q1$a", "rank": "normal"}]}}


@pytest.mark.parametrize("op,path,expected", [
    ("add", "/claims/P17", C.ADD_STATEMENT_GROUP),
    ("add", "/claims/P31/1", C.ADD_STATEMENT),
    ("add", "/claims/P31/-", C.ADD_STATEMENT),
    ("remove", "/claims/P31/0", C.REMOVE_STATEMENT),
    ("remove", "/claims/P31", C.REMOVE_STATEMENT_GROUP),
    ("replace", "/claims/P31/0/rank", C.CHANGE_RANK),
    ("replace", "/claims/P31/0/mainsnak/datavalue/value/id", C.REPLACE_STATEMENT),
    ("add", "/claims/P31/0/qualifiers", C.ADD_QUALIFIER),
    ("add", "/claims/P31/0/qualifiers/P580/1", C.ADD_QUALIFIER),
    ("remove", "/claims/P31/0/qualifiers/P580", C.REMOVE_QUALIFIER),
    ("replace", "/claims/P31/0/qualifiers/P580/0/datavalue", C.REPLACE_QUALIFIER),
    ("add", "/claims/P31/0/qualifiers-order", C.CHANGE_ORDER),
    ("add", "/claims/P31/0/references/0", C.ADD_REFERENCE),
    ("remove", "/claims/P31/0/references", C.REMOVE_REFERENCE),
    ("add", "/claims/P31/0/references/0/snaks/P854", C.REPLACE_REFERENCE),
    ("replace", "/labels/en/value", C.FINGERPRINT_CHANGE),
    ("add", "/aliases/de", C.FINGERPRINT_CHANGE),
])
def test_categorize(op, path, expected):
    patch = {"op": op, "path": path} if op == "remove" else {"op": op, "path": path, "value": 1}
    assert categorize(patch, DOC) is expected


def test_categorize_create_and_fallback(caplog):
    assert categorize({"op": "add", "path": "/claims", "value": {}}, {}) is C.CREATE_ENTITY
    assert categorize({"op": "add", "path": "/sitelinks/enwiki", "value": {}}, DOC) is C.FINGERPRINT_CHANGE
    assert caplog.records


def test_transition_examples():
    g = transitions_from_sequences([["A", "B", "B"]], 0)
    assert dict(g.edge_counts) == {("A", "B"): 1, ("B", "B"): 1}
    counts = {"B": 9, "C": 41, "D": 50}
    seqs = [[C.CREATE_ENTITY, dst] for dst, n in
            [(C.ADD_STATEMENT, 9), (C.ADD_QUALIFIER, 41), (C.ADD_REFERENCE, 50)] for _ in range(n)]
    pruned = transitions_from_sequences(seqs, 0.10)
    assert (C.CREATE_ENTITY, C.ADD_STATEMENT) not in pruned.edge_counts
    assert pruned.edge_counts[(C.CREATE_ENTITY, C.ADD_QUALIFIER)] == 41
    full = transitions_from_sequences(seqs, 0)
    assert sum(full.edge_counts.values()) == sum(counts.values())
    with pytest.raises(ValueError):
        transitions_from_sequences(seqs, 1.0)


def test_transition_conservation_on_fixture(corpus_store):
    g = transition_graph(corpus_store, 0)
    expected = sum(max(0, len(entity_category_sequence(corpus_store.revisions(e))) - 1)
                   for e in corpus_store.entity_ids())
    assert sum(g.edge_counts.values()) == expected
    for state in g.state_counts:
        assert sum(g.outgoing(state).values()) <= g.state_counts[state]
    dot = transition_graph(corpus_store).to_dot()
    assert dot.startswith("digraph") and "CreateEntity" in dot


def _op(kind, s, p, o, rid, n):
    return TripleOperation(kind, Triple(item(s), prop(p), item(o)), rid, TS, n)


def test_class_operation_stats():
    A, R = OpKind.ADDITION, OpKind.REMOVAL
    ops = [_op(A, 1, 17, 5, 1, 0), _op(A, 1, 18, 5, 1, 1), _op(A, 2, 17, 5, 2, 2), _op(A, 2, 18, 6, 2, 3),
           _op(R, 2, 18, 6, 3, 4), _op(A, 2, 18, 7, 3, 5)]
    membership = {item(1): {item(50)}, item(2): {item(50), item(51)}}
    stats = {s.class_id: s for s in class_operation_stats(ops, membership)}
    assert stats[item(50)].additions == 2.0
    assert stats[item(50)].replacements == 0.5 and stats[item(50)].removals == 0
    assert stats[item(51)].instances == 1 and stats[item(51)].replacements == 1
    assert class_operation_stats([], membership) == []


def test_most_removed_properties():
    R = OpKind.REMOVAL
    ops = [_op(R, i, 39, 5, i, i) for i in (1, 2, 3)]
    membership = {item(i): {item(50)} for i in (1, 2, 3)}
    assert most_removed_properties(ops, membership, item(50)) == [(prop(39), 1.0)]
    assert most_removed_properties([], membership, item(50)) == []
    with pytest.raises(KeyError):
        most_removed_properties(ops, membership, item(99))
    assert property_label(prop(999)) == "[deleted property](P999)"
    assert property_label(prop(31), {prop(31): "instance of"}) == "instance of"


def test_edit_war_examples():
    A, R = OpKind.ADDITION, OpKind.REMOVAL
    assert len(detect_edit_wars([_op(A, 1, 21, 1, 1, 0), _op(R, 1, 21, 1, 2, 1), _op(A, 1, 21, 1, 3, 2)])) == 1
    assert detect_edit_wars([_op(A, 1, 21, 1, 1, 0), _op(R, 1, 21, 1, 2, 1)]) == []
    # Add(v1), then four replacements v1 -> v2 -> v1 -> v2 -> v1
    ops = [_op(A, 1, 21, 1, 1, 0)]
    vals = [1, 2, 1, 2, 1]
    for step, (old, new) in enumerate(zip(vals, vals[1:]), 2):
        ops += [_op(R, 1, 21, old, step, len(ops)), _op(A, 1, 21, new, step, len(ops) + 1)]
    wars = detect_edit_wars(ops)
    assert Counter(w.value for w in wars)[item(1)] == 2
    for w in wars:
        assert w.add_ordinal < w.remove_ordinal < w.readd_ordinal
        assert ops[w.remove_ordinal].triple.object == w.value == ops[w.readd_ordinal].triple.object


def test_edit_wars_match_brute_force():
    rng = random.Random(11)
    for _ in range(300):
        ops = random_history(rng)
        got = [((w.entity, w.property, w.value), w.add_ordinal, w.remove_ordinal, w.readd_ordinal)
               for w in detect_edit_wars(ops)]
        assert sorted(got, key=str) == sorted(brute_force_wars(ops), key=str)


def test_edit_wars_invariant_to_interleaving():
    rng = random.Random(5)
    ops = random_history(rng, n_keys=1)
    noise = random_history(random.Random(6), n_keys=2)
    noise = [n for n in noise if n.triple.subject != ops[0].triple.subject or n.triple.predicate != ops[0].triple.predicate] if ops else noise
    merged = sorted([(i * 2, o) for i, o in enumerate(ops)] + [(i * 2 + 1, o) for i, o in enumerate(noise)],
                    key=lambda x: x[0])
    merged = [TripleOperation(o.kind, o.triple, o.revision_id, TS, n) for n, (_, o) in enumerate(merged)]
    key = (ops[0].triple.subject, ops[0].triple.predicate) if ops else None
    alone = [w.value for w in detect_edit_wars(ops)]
    within = [w.value for w in detect_edit_wars(merged) if (w.entity, w.property) == key]
    assert alone == within


def test_conflict_rankings():
    A, R = OpKind.ADDITION, OpKind.REMOVAL
    ops = []
    for p, times in ((21, 3), (31, 1)):
        for _ in range(times):
            ops += [_op(A, 1, p, 5, 0, len(ops)), _op(R, 1, p, 5, 0, len(ops) + 1)]
        ops.append(_op(A, 1, p, 5, 0, len(ops)))
    wars = detect_edit_wars(ops)
    props, classes = conflict_rankings(wars, {item(1): {item(50)}, item(2): {item(50)}})
    assert props[0] == (prop(21), 3) and props[1] == (prop(31), 1)
    assert classes == [(item(50), 2.0)]
    assert conflict_rankings([], {}) == ([], [])


def test_fixture_has_edit_wars(corpus_revisions):
    from edithist.graph import extract_triple_ops

    ops = extract_triple_ops(corpus_revisions)
    wars = detect_edit_wars(ops)
    assert wars
    assert [((w.entity, w.property, w.value), w.add_ordinal, w.remove_ordinal, w.readd_ordinal)
            for w in wars] == brute_force_wars(ops)
