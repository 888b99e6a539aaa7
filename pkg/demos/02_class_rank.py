"""Rank classes by the PageRank mass of their instances."""
from edithist import synthetic
from edithist.graph import (class_rank, entity_edges, extract_triple_ops, materialize, pagerank,
                            top_classes)
from edithist.model import INSTANCE_OF

revisions = sorted(synthetic.fixture_corpus(), key=lambda r: r.order_key)
labels = synthetic.entity_labels(revisions)
state = materialize(extract_triple_ops(revisions))

edges = entity_edges(state.triples)
pr = pagerank(edges)
print(len(edges), "entity edges, PageRank mass", round(sum(pr.values()), 12))

instance_of = [(s, o) for s, p, o in state.triples if p == INSTANCE_OF]
for agg in ("sum", "mean"):
    ranking = top_classes(class_rank(instance_of, pr, aggregate=agg), labels, top=5)
    print(f"\ntop classes by {agg} (Wikimedia-labelled classes dropped)")
    for cs in ranking:
        print(f"  {labels.get(cs.class_id, '')!s:>18} {cs.score:.4f}  ({cs.instance_count} instances)")
