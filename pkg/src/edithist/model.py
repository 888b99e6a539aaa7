"""Domain vocabulary shared by every stage of the pipeline.

Entities, snaks, statements and revisions follow the Wikibase JSON layout.
Triples and triple operations are the graph-level view derived from them.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterable, Mapping, Sequence, Union


class ModelError(ValueError):
    """Raised when a domain value cannot be parsed or validated."""


_ENTITY_RE = re.compile(r"^([QP])([1-9][0-9]*)$")


class EntityKind(enum.Enum):
    ITEM = "Q"
    PROPERTY = "P"


@dataclass(frozen=True)
class EntityId:
    kind: EntityKind
    number: int

    def __post_init__(self):
        if self.number < 1:
            raise ModelError(f"entity number must be >= 1, got {self.number}")

    def __str__(self) -> str:
        return f"{self.kind.value}{self.number}"

    def __repr__(self) -> str:
        return f"EntityId({self})"

    @property
    def is_property(self) -> bool:
        return self.kind is EntityKind.PROPERTY

    def sort_key(self):
        return (self.kind.value, self.number)

    def __lt__(self, other):
        if not isinstance(other, EntityId):
            return NotImplemented
        return self.sort_key() < other.sort_key()


def parse_entity_id(text: str) -> EntityId:
    """Parse ``Q<n>`` / ``P<n>`` into an :class:`EntityId`.

    >>> parse_entity_id("P31")
    EntityId(P31)
    """
    if not isinstance(text, str) or not text:
        raise ModelError(f"malformed entity id: {text!r}")
    m = _ENTITY_RE.match(text.strip())
    if m is None:
        raise ModelError(f"malformed entity id: {text!r}")
    return EntityId(EntityKind(m.group(1)), int(m.group(2)))


def item(number: int) -> EntityId:
    return EntityId(EntityKind.ITEM, number)


def prop(number: int) -> EntityId:
    return EntityId(EntityKind.PROPERTY, number)


INSTANCE_OF = prop(31)


# --- triple objects -------------------------------------------------------

@dataclass(frozen=True, order=True)
class Literal:
    """A literal value as (lexical form, datatype tag)."""

    lexical: str
    datatype: str = "string"


@dataclass(frozen=True, order=True)
class BlankNode:
    label: str


ObjectValue = Union[EntityId, Literal, BlankNode]


def object_sort_key(value: ObjectValue):
    if isinstance(value, EntityId):
        return (0, value.kind.value, value.number, "")
    if isinstance(value, Literal):
        return (1, value.datatype, 0, value.lexical)
    return (2, "", 0, value.label)


def object_to_json(value: ObjectValue) -> dict:
    if isinstance(value, EntityId):
        return {"type": "entity", "value": str(value)}
    if isinstance(value, Literal):
        return {"type": "literal", "value": value.lexical, "datatype": value.datatype}
    return {"type": "bnode", "value": value.label}


def object_from_json(data: Mapping) -> ObjectValue:
    kind = data.get("type")
    if kind == "entity":
        return parse_entity_id(data["value"])
    if kind == "literal":
        return Literal(data["value"], data.get("datatype", "string"))
    if kind == "bnode":
        return BlankNode(data["value"])
    raise ModelError(f"unknown object type {kind!r}")


# --- snaks and statements -------------------------------------------------

class SnakKind(enum.Enum):
    VALUE = "value"
    SOME_VALUE = "somevalue"
    NO_VALUE = "novalue"


class Rank(enum.Enum):
    PREFERRED = "preferred"
    NORMAL = "normal"
    DEPRECATED = "deprecated"


_MODELED_DATATYPES = ("wikibase-entityid", "string", "monolingualtext", "quantity", "time",
                      "globecoordinate")


def normalize_datavalue(datavalue: Mapping) -> ObjectValue | None:
    """Map a Wikibase ``datavalue`` to a triple object; unmodeled types give None."""
    dtype = datavalue.get("type")
    value = datavalue.get("value")
    if dtype == "wikibase-entityid":
        if isinstance(value, Mapping):
            if "id" in value:
                return parse_entity_id(value["id"])
            prefix = "P" if value.get("entity-type") == "property" else "Q"
            return parse_entity_id(f"{prefix}{value['numeric-id']}")
        return parse_entity_id(str(value))
    if dtype == "string":
        return Literal(str(value), "string")
    if dtype == "monolingualtext":
        return Literal(str(value["text"]), "string")
    if dtype == "quantity":
        return Literal(str(value["amount"]), "quantity")
    if dtype == "time":
        return Literal(str(value["time"]), "time")
    if dtype == "globecoordinate":
        return Literal(f"Point({value['longitude']} {value['latitude']})", "coordinate")
    return None


@dataclass(frozen=True)
class Snak:
    kind: SnakKind
    property: EntityId
    datavalue: ObjectValue | None = None

    def __post_init__(self):
        if (self.kind is SnakKind.VALUE) != (self.datavalue is not None):
            raise ModelError("datavalue must be present iff the snak is a value snak")
        if not self.property.is_property:
            raise ModelError(f"snak property must be a property id, got {self.property}")

    @classmethod
    def from_json(cls, data: Mapping) -> "Snak":
        kind = SnakKind(data.get("snaktype", "value"))
        pid = parse_entity_id(data["property"])
        value = None
        if kind is SnakKind.VALUE:
            value = normalize_datavalue(data.get("datavalue") or {})
            if value is None:
                # unmodeled datatypes keep their raw type tag as an opaque literal
                raw = data.get("datavalue") or {}
                value = Literal(repr(raw.get("value")), str(raw.get("type", "unknown")))
        return cls(kind, pid, value)


def _flatten_snak_map(data) -> tuple:
    if not data:
        return ()
    if isinstance(data, Mapping):
        return tuple(Snak.from_json(s) for pid in data for s in data[pid])
    return tuple(Snak.from_json(s) for s in data)


@dataclass(frozen=True)
class Statement:
    mainsnak: Snak
    rank: Rank = Rank.NORMAL
    qualifiers: tuple = ()
    references: tuple = ()
    statement_id: str = ""

    @classmethod
    def from_json(cls, data: Mapping) -> "Statement":
        refs = tuple(_flatten_snak_map(ref.get("snaks", {})) for ref in data.get("references", ()))
        return cls(
            mainsnak=Snak.from_json(data["mainsnak"]),
            rank=Rank(data.get("rank", "normal")),
            qualifiers=_flatten_snak_map(data.get("qualifiers")),
            references=refs,
            statement_id=str(data.get("id", "")),
        )


def is_simple_statement(statement: Statement) -> bool:
    return not statement.qualifiers and not statement.references


@dataclass(frozen=True)
class EntityDocument:
    id: EntityId
    labels: Mapping[str, str] = field(default_factory=dict)
    descriptions: Mapping[str, str] = field(default_factory=dict)
    aliases: Mapping[str, tuple] = field(default_factory=dict)
    claims: Mapping[EntityId, tuple] = field(default_factory=dict)

    @classmethod
    def from_json(cls, data: Mapping) -> "EntityDocument":
        def term(v):
            return v["value"] if isinstance(v, Mapping) else str(v)

        claims = {}
        for key, group in (data.get("claims") or {}).items():
            pid = parse_entity_id(key)
            statements = tuple(Statement.from_json(s) for s in group)
            for s in statements:
                if s.mainsnak.property != pid:
                    raise ModelError(
                        f"statement under {pid} has mainsnak property {s.mainsnak.property}")
            claims[pid] = statements
        aliases = {}
        for lang, values in (data.get("aliases") or {}).items():
            aliases[lang] = tuple(term(v) for v in values)
        return cls(
            id=parse_entity_id(data["id"]),
            labels={k: term(v) for k, v in (data.get("labels") or {}).items()},
            descriptions={k: term(v) for k, v in (data.get("descriptions") or {}).items()},
            aliases=aliases,
            claims=claims,
        )


# --- timestamps -----------------------------------------------------------

def parse_timestamp(text: str) -> datetime:
    """Parse ISO 8601 (optionally ``+``-prefixed) and normalize to UTC."""
    if not isinstance(text, str) or not text:
        raise ModelError(f"malformed timestamp: {text!r}")
    raw = text.strip()
    if raw.startswith("+"):
        raw = raw[1:]
    if raw.endswith("Z") or raw.endswith("z"):
        raw = raw[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ModelError(f"malformed timestamp: {text!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return "+" + ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


# --- revisions and patches ------------------------------------------------

class PatchOp(enum.Enum):
    ADD = "add"
    REMOVE = "remove"
    REPLACE = "replace"


@dataclass(frozen=True)
class PatchOperation:
    op: PatchOp
    path: str
    value: Any = None

    def __post_init__(self):
        if self.op is PatchOp.REMOVE and self.value is not None:
            raise ModelError("remove operations carry no value")
        if self.path and not self.path.startswith("/"):
            raise ModelError(f"invalid JSON pointer {self.path!r}")

    def to_json(self) -> dict:
        out = {"op": self.op.value, "path": self.path}
        if self.op is not PatchOp.REMOVE:
            out["value"] = self.value
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "PatchOperation":
        if not isinstance(data, Mapping):
            raise ModelError(f"patch operation must be an object, got {type(data).__name__}")
        try:
            op = PatchOp(data.get("op"))
        except ValueError:
            raise ModelError(f"unsupported patch op {data.get('op')!r}") from None
        path = data.get("path")
        if not isinstance(path, str):
            raise ModelError("patch operation needs a string path")
        if op is not PatchOp.REMOVE and "value" not in data:
            raise ModelError(f"{op.value} operation at {path!r} has no value")
        return cls(op, path, data.get("value") if op is not PatchOp.REMOVE else None)


@dataclass(frozen=True)
class Revision:
    id: int
    parent_id: int | None
    entity_id: EntityId
    timestamp: datetime
    username: str
    comment: str | None
    entity_diff: tuple = ()

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "parent_id": self.parent_id,
            "entity_id": str(self.entity_id),
            "timestamp": format_timestamp(self.timestamp),
            "username": self.username,
            "comment": self.comment,
            "entity_diff": [p.to_json() for p in self.entity_diff],
        }

    @property
    def order_key(self):
        return (self.timestamp, self.id)


def validate_revision_chain(revisions: Sequence[Revision]) -> None:
    """Check that one entity's revisions form a parent-linked, time-ordered chain."""
    prev = None
    for rev in revisions:
        if prev is None:
            if rev.parent_id is not None:
                raise ModelError(f"first revision {rev.id} has parent {rev.parent_id}")
        else:
            if rev.entity_id != prev.entity_id:
                raise ModelError(f"revision {rev.id} belongs to {rev.entity_id}, not {prev.entity_id}")
            if rev.parent_id != prev.id:
                raise ModelError(f"revision {rev.id} has parent {rev.parent_id}, expected {prev.id}")
            if rev.order_key <= prev.order_key:
                raise ModelError(f"revision {rev.id} is not after revision {prev.id}")
        prev = rev


# --- triples --------------------------------------------------------------

@dataclass(frozen=True)
class Triple:
    subject: EntityId
    predicate: EntityId
    object: ObjectValue

    def __post_init__(self):
        if not self.predicate.is_property:
            raise ModelError(f"predicate must be a property, got {self.predicate}")

    def sort_key(self):
        return (self.subject.sort_key(), self.predicate.sort_key(), object_sort_key(self.object))

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def __str__(self):
        return f"({self.subject}, {self.predicate}, {self.object})"


class OpKind(enum.Enum):
    ADDITION = "addition"
    REMOVAL = "removal"


@dataclass(frozen=True)
class TripleOperation:
    kind: OpKind
    triple: Triple
    revision_id: int
    timestamp: datetime
    ordinal: int

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "subject": str(self.triple.subject),
            "predicate": str(self.triple.predicate),
            "object": object_to_json(self.triple.object),
            "revision_id": self.revision_id,
            "timestamp": format_timestamp(self.timestamp),
            "ordinal": self.ordinal,
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "TripleOperation":
        return cls(
            kind=OpKind(data["kind"]),
            triple=Triple(parse_entity_id(data["subject"]), parse_entity_id(data["predicate"]),
                          object_from_json(data["object"])),
            revision_id=int(data["revision_id"]),
            timestamp=parse_timestamp(data["timestamp"]),
            ordinal=int(data["ordinal"]),
        )


def statement_triples(doc: Mapping) -> set:
    """Triples carried by the main snaks of an entity document.

    Qualifiers, references and rank are ignored; no-value snaks produce no
    triple and some-value snaks produce a blank node keyed by statement id.
    """
    if not doc or "id" not in doc:
        return set()
    subject = parse_entity_id(doc["id"])
    out = set()
    for key, group in (doc.get("claims") or {}).items():
        pid = parse_entity_id(key)
        for pos, st in enumerate(group):
            snak = st.get("mainsnak") or {}
            kind = snak.get("snaktype", "value")
            if kind == "novalue":
                continue
            if kind == "somevalue":
                sid = st.get("id") or f"{subject}-{pid}-{pos}"
                out.add(Triple(subject, pid, BlankNode(_bnode_label(sid))))
                continue
            value = normalize_datavalue(snak.get("datavalue") or {})
            if value is not None:
                out.add(Triple(subject, pid, value))
    return out


def _bnode_label(statement_id: str) -> str:
    return "sv" + re.sub(r"[^A-Za-z0-9]", "_", statement_id)


def sorted_triples(triples: Iterable[Triple]) -> list:
    return sorted(triples, key=Triple.sort_key)
