import random

import jsonpatch
import pytest
from hypothesis import given, strategies as st

from edithist import patch as jp
from edithist.model import PatchOp, PatchOperation

from docgen import random_pair

json_values = st.recursive(
    st.none() | st.booleans() | st.integers(-10, 10) | st.floats(allow_nan=False) | st.text(max_size=3),
    lambda children: st.lists(children, max_size=4) | st.dictionaries(st.text(max_size=3), children, max_size=4),
    max_leaves=15,
)


def test_identity_diff_is_empty():
    d = {"labels": {"en": "A"}, "claims": {"P31": [1, 2]}}
    assert jp.diff(d, jp.copy_json(d)) == []


def test_diff_adds_missing_key():
    ops = jp.diff({"labels": {"en": "A"}}, {"labels": {"en": "A", "fr": "A"}})
    assert jp.patch_to_json(ops) == [{"op": "add", "path": "/labels/fr", "value": "A"}]


def test_diff_agrees_with_reference_implementation():
    rng = random.Random(7)
    for _ in range(500):
        a, b = random_pair(rng)
        ours = jp.patch_to_json(jp.diff(a, b))
        assert jsonpatch.apply_patch(a, ours) == b


@given(json_values, json_values)
def test_round_trip_property(a, b):
    out = jp.apply(a, jp.diff(a, b))
    assert jp.json_equal(out, b)
    assert (jp.diff(a, b) == []) == jp.json_equal(a, b)


def test_type_strict_equality():
    assert not jp.json_equal(1, 1.0)
    assert not jp.json_equal(True, 1)
    assert jp.diff({"a": 1}, {"a": 1.0}) != []
    assert jp.diff({"a": True}, {"a": 1}) != []


def test_apply_basics_and_no_mutation():
    d = {"a": 1, "b": [1, 2]}
    assert jp.apply(d, []) == d
    assert jp.apply({"a": 1}, [{"op": "remove", "path": "/a"}]) == {}
    out = jp.apply(d, [{"op": "add", "path": "/b/-", "value": 3}, {"op": "replace", "path": "/a", "value": 9}])
    assert out == {"a": 9, "b": [1, 2, 3]}
    assert d == {"a": 1, "b": [1, 2]}


@pytest.mark.parametrize("doc,patch,index", [
    ({}, [{"op": "remove", "path": "/a"}], 0),
    ({"a": 1}, [{"op": "replace", "path": "/a", "value": 2}, {"op": "add", "path": "/x/y", "value": 1}], 1),
    ({"a": [1]}, [{"op": "add", "path": "/a/5", "value": 1}], 0),
    ({"a": [1]}, [{"op": "remove", "path": "/a/01"}], 0),
])
def test_apply_errors_carry_index(doc, patch, index):
    with pytest.raises(jp.PatchError) as exc:
        jp.apply(doc, patch)
    assert exc.value.index == index


def test_rejects_non_core_ops():
    with pytest.raises(Exception):
        jp.apply({"a": 1}, [{"op": "move", "from": "/a", "path": "/b"}])


def test_pointer_escaping():
    tokens = ["a/b", "m~n", ""]
    assert jp.split_pointer(jp.join_pointer(tokens)) == tokens
    assert jp.apply({}, jp.diff({}, {"a/b": {"m~n": 1}})) == {"a/b": {"m~n": 1}}


def test_reconstruct():
    base = {}
    states = [{"id": "Q1"}, {"id": "Q1", "labels": {"en": "x"}}, {"id": "Q1", "labels": {}}]
    patches, prev = [], base
    for s in states:
        patches.append(jp.diff(prev, s))
        prev = s
    assert jp.reconstruct(base, patches, 0) == base
    for i, s in enumerate(states, 1):
        assert jp.reconstruct(base, patches, i) == s
    with pytest.raises(IndexError):
        jp.reconstruct(base, patches, 4)
    bad = patches[:1] + [[PatchOperation(PatchOp.REMOVE, "/nope")]]
    with pytest.raises(jp.PatchError) as exc:
        jp.reconstruct(base, bad, 2)
    assert exc.value.revision == 1


def test_serialization_keys_are_lowercase_rfc():
    ops = jp.diff({"a": 1, "b": 2}, {"a": 2})
    data = jp.patch_to_json(ops)
    assert all(set(o) <= {"op", "path", "value"} for o in data)
    assert jp.patch_from_json(data) == ops
