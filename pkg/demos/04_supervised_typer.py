"""Random-walk embeddings plus a random forest as a type predictor, compared
against TransE trained with the inverse sampler.

The forest learns from history labels: triples that were added and kept are
positives, triples that were later removed are negatives. A history without
removals cannot train it, so this runs on the synthetic Wikidata-like corpus.
"""
from edithist import synthetic
from edithist.evaluation import comparison_text, compare_models
from edithist.kge.training import TrainConfig
from edithist.pipeline import (evaluate_scorer, kge_scorer, prepare, supervised_scorer,
                               train_kge, train_supervised)
from edithist.typer import ForestConfig, WalkEmbeddingConfig

prep = prepare(synthetic.fixture_corpus())

forest, emb = train_supervised(prep, WalkEmbeddingConfig(seed=7),
                               ForestConfig(num_trees=30, seed=7))
print(len(emb), "embedded tokens,", len(forest.trees), "trees, classes:", len(forest.classes))

kge = train_kge(prep, "transe", TrainConfig(dim=32, epochs=100, batch_size=64,
                                            learning_rate=0.5, num_negatives=4, seed=7), "inverse")
reports, outcomes = {}, {}
for name, scorer in [("forest", supervised_scorer(forest, emb)), ("transe", kge_scorer(kge.model))]:
    results, rep = evaluate_scorer(prep, scorer)
    reports[name], outcomes[name] = rep, [r.rank == 1 for r in results]
    print(f"{name:>7}: MRR {rep.mrr:.3f} MR {rep.mr:.2f} hits@1 {rep.hits_at[1]:.3f}")

print()
print(comparison_text(compare_models(reports, outcomes)))
