"""Walk through an edit history: build a store, reconstruct snapshots, mine it.

Run with ``python3 demos/01_history_analytics.py``. Uses the synthetic corpus
that also backs the test fixtures, so nothing needs downloading.
"""
import tempfile
from collections import Counter

from edithist import synthetic
from edithist.analytics import (class_operation_stats, conflict_rankings, detect_edit_wars,
                                most_removed_properties, transition_graph)
from edithist.graph import class_membership, extract_triple_ops, materialize
from edithist.ingest import Store, build_store

revisions = synthetic.fixture_corpus()
labels = synthetic.entity_labels(revisions)
print(len(revisions), "revisions over", len({r.entity_id for r in revisions}), "entities")

# the store keeps one diff per revision, any snapshot is rebuilt on demand
workdir = tempfile.mkdtemp()
build_store(revisions, workdir)
store = Store(workdir)
eid = max(store.entity_ids(), key=store.revision_count)
n = store.revision_count(eid)
first, last = store.get_entity_at(eid, 0), store.get_entity_at(eid, n - 1)
print(f"{eid}: {n} revisions, claims grew from {len(first.get('claims', {}))} to {len(last.get('claims', {}))} properties")

# %% what kind of edit tends to follow what
g = transition_graph(store)
print("\nmost frequent category transitions (10% pruning)")
for (a, b), k in g.edge_counts.most_common(6):
    print(f"  {a.value:>22} -> {b.value:<22} {k}")

# %% triple-level operations and the classes that churn most
ops = extract_triple_ops(sorted(revisions, key=lambda r: r.order_key))
print("\noperation kinds:", dict(Counter(op.kind.value for op in ops)))
membership = class_membership(materialize(ops).triples)
stats = class_operation_stats(ops, membership)
for s in stats[:3]:
    print(f"  {labels.get(s.class_id, s.class_id)!s:>16}: {s.instances} instances, "
          f"{s.additions:.1f} add / {s.removals:.1f} rem / {s.replacements:.1f} repl per instance")
busiest = stats[0].class_id
print(f"most removed properties on {labels.get(busiest)}:",
      [(str(p), round(v, 2)) for p, v in most_removed_properties(ops, membership, busiest)[:3]])

# %% add / remove / re-add cycles
wars = detect_edit_wars(ops)
props, classes = conflict_rankings(wars, membership)
print(f"\n{len(wars)} edit wars")
print("  by property:", [(str(p), k) for p, k in props[:3]])
print("  by class   :", [(labels.get(c, str(c)), round(v, 2)) for c, v in classes[:3]])
