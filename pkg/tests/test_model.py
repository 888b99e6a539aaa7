from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from edithist.model import (INSTANCE_OF, BlankNode, EntityDocument, EntityId, EntityKind, Literal,
                            ModelError, PatchOp, PatchOperation, Revision, Snak, SnakKind, Statement,
                            Triple, format_timestamp, is_simple_statement, item, object_from_json,
                            object_to_json, parse_entity_id, parse_timestamp, prop,
                            statement_triples, validate_revision_chain)


def test_parse_item_and_property():
    assert parse_entity_id("Q42") == EntityId(EntityKind.ITEM, 42)
    assert parse_entity_id("P31") == EntityId(EntityKind.PROPERTY, 31)
    assert parse_entity_id("P31").is_property


@pytest.mark.parametrize("bad", ["X42", "Q", "Q0", "Q-1", "q42", "Q4x2", "", "Q 42"])
def test_parse_rejects_malformed(bad):
    with pytest.raises(ModelError) as exc:
        parse_entity_id(bad)
    assert repr(bad) in str(exc.value) or bad in str(exc.value)


@given(st.sampled_from("QP"), st.integers(min_value=1, max_value=10**12))
def test_entity_id_round_trip(prefix, n):
    text = f"{prefix}{n}"
    assert str(parse_entity_id(text)) == text


def test_entity_ids_sort_numerically():
    ids = [parse_entity_id(x) for x in ["Q10", "Q9", "P2", "Q100"]]
    assert [str(x) for x in sorted(ids)] == ["P2", "Q9", "Q10", "Q100"]


def _statement(qualifiers=None, references=None):
    data = {"mainsnak": {"snaktype": "value", "property": "P31",
                         "datavalue": {"value": {"id": "Q5"}, "type": "wikibase-entityid"}},
            "id": "Q1$a"}
    if qualifiers:
        data["qualifiers"] = qualifiers
    if references:
        data["references"] = references
    return Statement.from_json(data)


def test_simple_statement_cases():
    q = {"P585": [{"snaktype": "value", "property": "P585",
                   "datavalue": {"value": {"time": "+2001-01-01T00:00:00Z"}, "type": "time"}}]}
    r = [{"snaks": {"P854": [{"snaktype": "value", "property": "P854",
                              "datavalue": {"value": "http://x", "type": "string"}}]}}]
    assert is_simple_statement(_statement())
    assert not is_simple_statement(_statement(qualifiers=q))
    assert not is_simple_statement(_statement(references=r))


def test_rank_defaults_to_normal():
    assert _statement().rank.value == "normal"


def test_snak_value_presence():
    with pytest.raises(ModelError):
        Snak(SnakKind.SOME_VALUE, prop(31), item(5))
    with pytest.raises(ModelError):
        Snak(SnakKind.VALUE, prop(31), None)
    assert Snak.from_json({"snaktype": "novalue", "property": "P31"}).datavalue is None


def test_document_claim_key_must_match_mainsnak():
    doc = {"id": "Q1", "claims": {"P17": [{"mainsnak": {"snaktype": "novalue", "property": "P31"}}]}}
    with pytest.raises(ModelError):
        EntityDocument.from_json(doc)


def test_timestamps_accept_plus_prefix_and_normalize():
    a = parse_timestamp("+2019-05-27T09:31:10Z")
    b = parse_timestamp("2019-05-27T11:31:10+02:00")
    assert a == b == datetime(2019, 5, 27, 9, 31, 10, tzinfo=timezone.utc)
    assert format_timestamp(a) == "+2019-05-27T09:31:10Z"
    with pytest.raises(ModelError):
        parse_timestamp("yesterday")


def test_patch_operation_value_presence():
    with pytest.raises(ModelError):
        PatchOperation(PatchOp.REMOVE, "/a", 1)
    with pytest.raises(ModelError):
        PatchOperation.from_json({"op": "add", "path": "/a"})
    for op in ("copy", "move", "test"):
        with pytest.raises(ModelError):
            PatchOperation.from_json({"op": op, "path": "/a", "from": "/b"})
    assert PatchOperation(PatchOp.REMOVE, "/a").to_json() == {"op": "remove", "path": "/a"}


def _rev(i, parent, minute, eid="Q1"):
    return Revision(i, parent, parse_entity_id(eid), datetime(2020, 1, 1, 0, minute, tzinfo=timezone.utc), "u", None)


def test_revision_chain_validation():
    validate_revision_chain([_rev(1, None, 0), _rev(2, 1, 1), _rev(5, 2, 2)])
    with pytest.raises(ModelError):
        validate_revision_chain([_rev(1, None, 0), _rev(2, 9, 1)])
    with pytest.raises(ModelError):
        validate_revision_chain([_rev(1, None, 5), _rev(2, 1, 1)])
    with pytest.raises(ModelError):
        validate_revision_chain([_rev(1, 7, 0)])


def test_triple_predicate_must_be_property():
    with pytest.raises(ModelError):
        Triple(item(1), item(2), item(3))


@pytest.mark.parametrize("value", [item(5), Literal("12", "quantity"), Literal("x"), BlankNode("sv1")])
def test_object_json_round_trip(value):
    assert object_from_json(object_to_json(value)) == value


def test_statement_triples_datatypes_and_snak_kinds():
    doc = {"id": "Q7", "claims": {
        "P31": [{"mainsnak": {"snaktype": "value", "property": "P31",
                              "datavalue": {"value": {"entity-type": "item", "numeric-id": 5},
                                            "type": "wikibase-entityid"}}, "id": "Q7$1"}],
        "P1082": [{"mainsnak": {"snaktype": "value", "property": "P1082",
                                "datavalue": {"value": {"amount": "+10", "unit": "1"}, "type": "quantity"}}}],
        "P625": [{"mainsnak": {"snaktype": "value", "property": "P625",
                               "datavalue": {"value": {"latitude": 1.5, "longitude": 2.5},
                                             "type": "globecoordinate"}}}],
        "P735": [{"mainsnak": {"snaktype": "somevalue", "property": "P735"}, "id": "Q7$s"},
                 {"mainsnak": {"snaktype": "novalue", "property": "P735"}, "id": "Q7$n"}],
    }}
    triples = statement_triples(doc)
    s = item(7)
    assert Triple(s, INSTANCE_OF, item(5)) in triples
    assert Triple(s, prop(1082), Literal("+10", "quantity")) in triples
    assert Triple(s, prop(625), Literal("Point(2.5 1.5)", "coordinate")) in triples
    blanks = [t for t in triples if isinstance(t.object, BlankNode)]
    assert len(blanks) == 1 and len(triples) == 4
