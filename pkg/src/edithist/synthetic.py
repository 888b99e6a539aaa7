"""Deterministic synthetic revision histories.

``fixture_corpus`` builds a small Wikibase-like history touching every kind
of edit the pipeline distinguishes (fingerprint changes, statements with all
modelled datatypes, qualifiers, references, ranks, some/no-value snaks,
value replacements, removals and add/remove/re-add cycles). ``typed_graph``
builds a 200-instance graph whose classes are inferable from the other
relations, used to smoke-test the learning stages.
"""

from __future__ import annotations

import copy
import random
from datetime import datetime, timedelta, timezone
from xml.sax.saxutils import escape

from . import patch as jp
from .model import Revision, format_timestamp, parse_entity_id

EPOCH = datetime(2015, 1, 1, tzinfo=timezone.utc)
CALENDAR = "http://www.wikidata.org/entity/Q1985727"
GLOBE = "http://www.wikidata.org/entity/Q2"
USERS = ["Alanna", "Borislav", "Chidi", "Dagny", "Emeka", "Fumiko", "203.0.113.7", "198.51.100.23"]


# --- document building ----------------------------------------------------

def entity_value(eid: str) -> dict:
    kind = "property" if eid.startswith("P") else "item"
    return {"value": {"entity-type": kind, "numeric-id": int(eid[1:]), "id": eid},
            "type": "wikibase-entityid"}


def string_value(text: str) -> dict:
    return {"value": text, "type": "string"}


def quantity_value(amount: int) -> dict:
    return {"value": {"amount": f"{amount:+d}", "unit": "1"}, "type": "quantity"}


def time_value(year: int, month: int = 1, day: int = 1) -> dict:
    return {"value": {"time": f"+{year:04d}-{month:02d}-{day:02d}T00:00:00Z", "timezone": 0,
                      "before": 0, "after": 0, "precision": 11, "calendarmodel": CALENDAR},
            "type": "time"}


def coordinate_value(lat: float, lon: float) -> dict:
    return {"value": {"latitude": lat, "longitude": lon, "altitude": None,
                      "precision": 0.0001, "globe": GLOBE}, "type": "globecoordinate"}


def monolingual_value(text: str, lang: str = "en") -> dict:
    return {"value": {"text": text, "language": lang}, "type": "monolingualtext"}


_DATATYPES = {"wikibase-entityid": "wikibase-item", "string": "string", "quantity": "quantity",
              "time": "time", "globecoordinate": "globe-coordinate",
              "monolingualtext": "monolingualtext"}


def snak(pid: str, datavalue: dict | None = None, snaktype: str = "value",
         datatype: str = "string") -> dict:
    out = {"snaktype": snaktype, "property": pid}
    if snaktype == "value":
        out["datavalue"] = datavalue
        out["datatype"] = _DATATYPES[datavalue["type"]]
    else:
        out["datatype"] = datatype
    return out


def statement(sid: str, main: dict, rank: str = "normal") -> dict:
    return {"mainsnak": main, "type": "statement", "id": sid, "rank": rank}


def new_document(eid: str, label: str | None = None) -> dict:
    doc = {"type": "property" if eid.startswith("P") else "item", "id": eid,
           "labels": {}, "descriptions": {}, "aliases": {}, "claims": {}}
    if doc["type"] == "property":
        doc["datatype"] = "wikibase-item"
    if label:
        doc["labels"]["en"] = {"language": "en", "value": label}
    return doc


def add_claim(doc: dict, sid: str, main: dict, rank: str = "normal") -> dict:
    st = statement(sid, main, rank)
    doc["claims"].setdefault(main["property"], []).append(st)
    return st


def remove_claim(doc: dict, pid: str, index: int) -> dict:
    group = doc["claims"][pid]
    st = group.pop(index)
    if not group:
        del doc["claims"][pid]
    return st


# --- histories to revisions -----------------------------------------------

def revisions_from_histories(histories) -> list:
    """``histories``: iterable of ``(timestamp, entity id, user, comment, snapshot)``.

    Snapshots are diffed against the entity's previous snapshot. Revision ids
    follow global (timestamp, input position) order starting at 1.
    """
    events = sorted(enumerate(histories), key=lambda x: (x[1][0], x[0]))
    last: dict = {}
    prev_id: dict = {}
    out = []
    for rid, (_, (ts, eid, user, comment, doc)) in enumerate(events, 1):
        diff = tuple(jp.diff(last.get(eid, {}), doc))
        out.append(Revision(rid, prev_id.get(eid), parse_entity_id(eid), ts, user, comment, diff))
        last[eid] = copy.deepcopy(doc)
        prev_id[eid] = rid
    return out


def snapshots_by_entity(revisions) -> dict:
    """Entity id -> list of (revision, full document) in revision order."""
    docs: dict = {}
    out: dict = {}
    for rev in sorted(revisions, key=lambda r: r.order_key):
        doc = jp.apply(docs.get(rev.entity_id, {}), rev.entity_diff)
        docs[rev.entity_id] = doc
        out.setdefault(rev.entity_id, []).append((rev, doc))
    return out


def _title(eid) -> str:
    s = str(eid)
    return f"Property:{s}" if s.startswith("P") else s


def write_xml_dump(revisions, out) -> None:
    """Serialize ``revisions`` as a MediaWiki-style export with full JSON texts."""
    pages = snapshots_by_entity(revisions)
    lines = ['<mediawiki xmlns="http://www.mediawiki.org/xml/export-0.10/" version="0.10" xml:lang="en">',
             "  <siteinfo>", "    <sitename>Wikidata</sitename>", "  </siteinfo>"]
    for page_id, eid in enumerate(sorted(pages), 1):
        ns = 120 if str(eid).startswith("P") else 0
        lines += ["  <page>", f"    <title>{escape(_title(eid))}</title>", f"    <ns>{ns}</ns>",
                  f"    <id>{page_id}</id>"]
        for rev, doc in pages[eid]:
            lines.append("    <revision>")
            lines.append(f"      <id>{rev.id}</id>")
            if rev.parent_id is not None:
                lines.append(f"      <parentid>{rev.parent_id}</parentid>")
            lines.append(f"      <timestamp>{format_timestamp(rev.timestamp)[1:]}</timestamp>")
            lines.append("      <contributor>")
            if rev.username and rev.username[0].isdigit():
                lines.append(f"        <ip>{escape(rev.username)}</ip>")
            else:
                lines.append(f"        <username>{escape(rev.username)}</username>")
                lines.append(f"        <id>{USERS.index(rev.username) + 1 if rev.username in USERS else 0}</id>")
            lines.append("      </contributor>")
            if rev.comment is not None:
                lines.append(f"      <comment>{escape(rev.comment)}</comment>")
            lines.append("      <model>wikibase-item</model>")
            lines.append("      <format>application/json</format>")
            lines.append(f'      <text xml:space="preserve">{escape(jp.canonical_json(doc))}</text>')
            lines.append("    </revision>")
        lines.append("  </page>")
    lines.append("</mediawiki>")
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


# --- the fixture corpus ---------------------------------------------------

CLASS_LABELS = ["human", "city", "river", "mountain", "film", "book", "painting", "company",
                "Wikimedia category", "Wikimedia disambiguation page", "album", "species"]
PROPERTY_LABELS = {"P31": "instance of", "P279": "subclass of", "P17": "country",
                   "P361": "part of", "P1082": "population", "P569": "date of birth",
                   "P625": "coordinate location", "P1476": "title", "P856": "official website",
                   "P585": "point in time", "P854": "reference URL", "P735": "given name"}
ENTITY_PROPS = ["P31", "P17", "P361", "P735"]


class _CorpusBuilder:
    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.clock = EPOCH
        self.events: list = []
        self.docs: dict = {}
        self.removed: dict = {}
        self.sid = 0

    def tick(self) -> datetime:
        self.clock += timedelta(minutes=self.rng.randint(1, 90), seconds=self.rng.randint(0, 59))
        return self.clock

    def emit(self, eid: str, comment: str) -> None:
        self.events.append((self.tick(), eid, self.rng.choice(USERS), comment,
                            copy.deepcopy(self.docs[eid])))

    def next_sid(self, eid: str) -> str:
        self.sid += 1
        return f"{eid}$S{self.sid:05d}"

    def entity_main(self, pid: str, pool: list) -> dict:
        return snak(pid, entity_value(self.rng.choice(pool)))

    # each edit returns a comment or None when not applicable
    def edit(self, eid: str, classes: list, instances: list):
        rng = self.rng
        doc = self.docs[eid]
        claims = [(pid, i) for pid in sorted(doc["claims"]) for i in range(len(doc["claims"][pid]))]
        choice = rng.choices(
            ["label", "description", "alias", "add_type", "add_entity", "add_literal",
             "replace", "remove", "qualifier", "reference", "rank", "somevalue", "readd",
             "remove_label", "change_type"],
            weights=[6, 5, 4, 6, 8, 8, 7, 6, 4, 4, 3, 2, 8, 1, 4])[0]
        if choice == "label":
            lang = rng.choice(["en", "es", "de"])
            doc["labels"][lang] = {"language": lang, "value": f"{eid} name {rng.randint(1, 99)}"}
            return f"/* wbsetlabel-set:1|{lang} */"
        if choice == "description":
            doc["descriptions"]["en"] = {"language": "en", "value": f"an entity {rng.randint(1, 999)}"}
            return "/* wbsetdescription-set:1|en */"
        if choice == "alias":
            doc["aliases"].setdefault("en", []).append({"language": "en", "value": f"aka {rng.randint(1, 999)}"})
            return "/* wbsetaliases-add:1|en */"
        if choice == "remove_label" and doc["labels"]:
            del doc["labels"][sorted(doc["labels"])[0]]
            return "/* wbsetlabel-remove:1 */"
        if choice == "add_type":
            add_claim(doc, self.next_sid(eid), self.entity_main("P31", classes))
            return "/* wbsetclaim-create:2||1 */ instance of"
        if choice == "add_entity":
            pid = rng.choice(ENTITY_PROPS[1:])
            add_claim(doc, self.next_sid(eid), self.entity_main(pid, instances))
            return "/* wbsetclaim-create:2||1 */"
        if choice == "add_literal":
            pid, dv = rng.choice([
                ("P1082", quantity_value(rng.randint(100, 900000))),
                ("P569", time_value(rng.randint(1800, 2000), rng.randint(1, 12), rng.randint(1, 28))),
                ("P625", coordinate_value(round(rng.uniform(-60, 60), 4), round(rng.uniform(-170, 170), 4))),
                ("P1476", monolingual_value(f"Title {rng.randint(1, 99)}", rng.choice(["en", "fr"]))),
                ("P856", string_value(f"https://example.org/{eid.lower()}/{rng.randint(1, 50)}")),
            ])
            add_claim(doc, self.next_sid(eid), snak(pid, dv))
            return "/* wbsetclaim-create:2||1 */"
        if choice == "somevalue":
            kind = rng.choice(["somevalue", "novalue"])
            add_claim(doc, self.next_sid(eid), snak("P735", snaktype=kind, datatype="wikibase-item"))
            return f"/* wbsetclaim-create:2||1 */ {kind}"
        if choice == "readd" and self.removed.get(eid):
            pid, main = self.removed[eid].pop(rng.randrange(len(self.removed[eid])))
            add_claim(doc, self.next_sid(eid), main)
            return "/* wbsetclaim-create:2||1 */ restore"
        if not claims:
            return None
        pid, i = rng.choice(claims)
        st = doc["claims"][pid][i]
        main = st["mainsnak"]
        if choice == "change_type":
            if "P31" not in doc["claims"]:
                return None
            st = rng.choice(doc["claims"]["P31"])
            old = st["mainsnak"]
            st["mainsnak"] = self.entity_main("P31", classes)
            self.removed.setdefault(eid, []).append(("P31", old))
            return "/* wbsetclaim-update:2||1 */ instance of"
        if choice == "replace" and main["snaktype"] == "value":
            dv = main["datavalue"]
            if dv["type"] == "wikibase-entityid":
                pool = classes if pid == "P31" else instances
                new = self.entity_main(pid, pool)
            elif dv["type"] == "quantity":
                new = snak(pid, quantity_value(rng.randint(100, 900000)))
            elif dv["type"] == "string":
                new = snak(pid, string_value(f"https://example.net/{rng.randint(1, 500)}"))
            else:
                return None
            self.removed.setdefault(eid, []).append((pid, main))
            st["mainsnak"] = new
            return "/* wbsetclaim-update:2||1 */"
        if choice == "remove":
            gone = remove_claim(doc, pid, i)
            if gone["mainsnak"]["snaktype"] == "value":
                self.removed.setdefault(eid, []).append((pid, gone["mainsnak"]))
            return "/* wbremoveclaims-remove:1| */"
        if choice == "qualifier":
            q = snak("P585", time_value(rng.randint(1950, 2020)))
            st.setdefault("qualifiers", {}).setdefault("P585", []).append(q)
            st["qualifiers-order"] = sorted(st["qualifiers"])
            return "/* wbsetqualifier-add:1| */"
        if choice == "reference":
            ref = {"hash": f"h{rng.getrandbits(40):010x}",
                   "snaks": {"P854": [snak("P854", string_value(f"https://source.example/{rng.randint(1, 99)}"))]},
                   "snaks-order": ["P854"]}
            st.setdefault("references", []).append(ref)
            return "/* wbsetreference-add:1| */"
        if choice == "rank":
            st["rank"] = rng.choice([r for r in ("preferred", "normal", "deprecated") if r != st["rank"]])
            return "/* wbsetclaim-update:2||1 */ rank"
        return None


def fixture_corpus(seed: int = 42, n_instances: int = 60, min_revisions: int = 8,
                   max_revisions: int = 14) -> list:
    """Revision list of a small multi-entity history (deterministic in ``seed``)."""
    b = _CorpusBuilder(seed)
    classes = [f"Q{i}" for i in range(1, len(CLASS_LABELS) + 1)]
    instances = [f"Q{100 + i}" for i in range(n_instances)]
    for pid, label in PROPERTY_LABELS.items():
        b.docs[pid] = new_document(pid, label)
        b.emit(pid, "/* wbeditentity-create:0| */")
    for cid, label in zip(classes, CLASS_LABELS):
        b.docs[cid] = new_document(cid, label)
        b.emit(cid, "/* wbeditentity-create:0| */")
    for cid in classes[1:]:
        add_claim(b.docs[cid], b.next_sid(cid), snak("P279", entity_value("Q1" if cid in ("Q2", "Q3") else "Q8")))
        b.emit(cid, "/* wbsetclaim-create:2||1 */ subclass of")
    budget = {eid: b.rng.randint(min_revisions, max_revisions) for eid in instances}
    for eid in instances:
        b.docs[eid] = new_document(eid, f"{eid} name")
        add_claim(b.docs[eid], b.next_sid(eid), b.entity_main("P31", classes[:8]))
        b.emit(eid, "/* wbeditentity-create:0| */")
        budget[eid] -= 1
    # a guaranteed add/remove/re-add cycle on the first instance
    war = instances[0]
    main = b.docs[war]["claims"]["P31"][0]["mainsnak"]
    remove_claim(b.docs[war], "P31", 0)
    b.emit(war, "/* wbremoveclaims-remove:1| */")
    add_claim(b.docs[war], b.next_sid(war), copy.deepcopy(main))
    b.emit(war, "/* wbsetclaim-create:2||1 */ restore")
    budget[war] -= 2
    active = [e for e in instances if budget[e] > 0]
    while active:
        eid = b.rng.choice(active)
        comment = None
        for _ in range(20):
            comment = b.edit(eid, classes, instances)
            if comment is not None:
                break
        if comment is None:
            b.docs[eid]["descriptions"]["en"] = {"language": "en", "value": f"fallback {budget[eid]}"}
            comment = "/* wbsetdescription-set:1|en */"
        b.emit(eid, comment)
        budget[eid] -= 1
        if budget[eid] <= 0:
            active.remove(eid)
    return revisions_from_histories(b.events)


def entity_labels(revisions) -> dict:
    """English labels of the final documents."""
    out = {}
    for eid, snaps in snapshots_by_entity(revisions).items():
        label = snaps[-1][1].get("labels", {}).get("en")
        if label:
            out[eid] = label["value"]
    return out


# --- typed graph for learning smoke tests ----------------------------------

TYPED_CLASSES = 10
FEATURES_PER_CLASS = 3


def typed_graph(seed: int = 42, instances_per_class: int = 20, held_out_per_class: int = 5,
                near_miss: bool = False) -> list:
    """Revisions of ``10 * instances_per_class`` instances, ten each.

    Instance ``i`` of class ``k`` carries two of class ``k``'s three feature
    links (P1552) and a link to the class hub (P361). Typed instances get
    their P31 early, in the train part. Held-out instances only receive their
    class in the last revision (test part). With ``near_miss`` the held-out
    instances get the true class early, lose it to a sibling class, and
    regain it in the last revision.
    """
    rng = random.Random(seed)
    cls = lambda k: f"Q{1 + k}"  # noqa: E731
    feat = lambda k, j: f"Q{11 + FEATURES_PER_CLASS * k + j}"  # noqa: E731
    hub = lambda k: f"Q{41 + k}"  # noqa: E731
    events = []
    clock = EPOCH
    for j in range(instances_per_class):
        for k in range(TYPED_CLASSES):
            eid = f"Q{1000 + j * TYPED_CLASSES + k}"
            held = j < held_out_per_class
            feats = rng.sample(range(FEATURES_PER_CLASS), 2)
            for doc in _typed_snapshots(eid, k, feats, held, near_miss, cls, feat, hub):
                clock += timedelta(minutes=1 + rng.randint(0, 5))
                events.append((clock, eid, rng.choice(USERS[:6]), "/* synthetic */", doc))
    return revisions_from_histories(events)


def _typed_snapshots(eid, k, feats, held, near_miss, cls, feat, hub) -> list:
    doc = new_document(eid, f"instance of class {k}")
    snaps = []
    n = 0

    def add(pid, target):
        nonlocal n
        n += 1
        add_claim(doc, f"{eid}$T{n:03d}", snak(pid, entity_value(target)))

    def desc(text):
        doc["descriptions"]["en"] = {"language": "en", "value": text}

    add("P1552", feat(k, feats[0]))
    snaps.append(copy.deepcopy(doc))
    add("P1552", feat(k, feats[1]))
    snaps.append(copy.deepcopy(doc))
    add("P361", hub(k))
    snaps.append(copy.deepcopy(doc))
    for r in range(3, 10):
        if r == 3 and (not held or near_miss):
            add("P31", cls(k))
        elif r == 4 and held and near_miss:
            remove_claim(doc, "P31", 0)
            add("P31", cls((k + 1) % TYPED_CLASSES))
        elif r == 9 and held:
            add("P31", cls(k))
        else:
            desc(f"revision {r}")
        snaps.append(copy.deepcopy(doc))
    return snaps
