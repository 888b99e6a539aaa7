"""Glue between the stages: split a revision history, train a typer, rank classes."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analytics import detect_edit_wars, war_keys
from .evaluation import (build_test_sample, candidate_classes, evaluate_rankings, known_types,
                         ranking_report)
from .graph import Split, SplitSpec, chronological_split, extract_triple_ops, materialize
from .kge.sampling import SamplerConfig, SamplerKind, Side
from .kge.training import TrainConfig, entity_triples, train, vocabulary
from .model import INSTANCE_OF, EntityId, OpKind, TripleOperation
from .typer import (ForestConfig, WalkEmbeddingConfig, label_from_history, rank_types,
                    train_forest, walk_embeddings)

log = logging.getLogger(__name__)


@dataclass
class Prepared:
    split: Split
    fit_ops: list            # operations the models may learn from
    train_triples: list      # entity-valued triples of the materialized fit state
    removals: list
    war_triples: set
    sample: list
    candidates: list
    known: dict = field(default_factory=dict)


def prepare(revisions, spec: SplitSpec = SplitSpec(), include_valid: bool = True) -> Prepared:
    """Split ``revisions`` chronologically and derive everything the typers need."""
    revisions = sorted(revisions, key=lambda r: r.order_key)
    ops = extract_triple_ops(revisions)
    return prepare_split(chronological_split(revisions, ops, spec), include_valid)


def prepare_split(split: Split, include_valid: bool = True) -> Prepared:
    """With ``include_valid`` the models learn from train and valid together, as
    for final test-set runs; otherwise from the train part alone.
    """
    parts = ("train", "valid") if include_valid else ("train",)
    fit_ops = split.ops(*parts)
    state = materialize(fit_ops)
    removals = [op.triple for op in fit_ops
                if op.kind is OpKind.REMOVAL and isinstance(op.triple.object, EntityId)]
    wars = war_keys(detect_edit_wars(fit_ops))
    return Prepared(
        split=split, fit_ops=fit_ops,
        train_triples=entity_triples(state.triples), removals=removals, war_triples=wars,
        sample=build_test_sample(split), candidates=candidate_classes(split.train),
        known=known_types(split.ops("train", "valid")),
    )


# --- split directories ----------------------------------------------------

SPLIT_PARTS = ("train", "valid", "test")


def write_split_dir(split: Split, spec: SplitSpec, out_dir) -> dict:
    """``<part>.jsonl`` operation files plus ``split.json``; returns the summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for part in SPLIT_PARTS:
        with open(out / f"{part}.jsonl", "w", encoding="utf-8") as fh:
            for op in getattr(split, part):
                fh.write(json.dumps(op.to_json(), sort_keys=True, ensure_ascii=False) + "\n")
    counts = {part: 0 for part in SPLIT_PARTS}
    for part in split.assignment.values():
        counts[part] += 1
    summary = {
        "train_fraction": spec.train_fraction, "valid_fraction": spec.valid_fraction,
        "revisions": counts,
        "operations": {part: len(getattr(split, part)) for part in SPLIT_PARTS},
        "assignment": {str(k): v for k, v in sorted(split.assignment.items())},
    }
    (out / "split.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n",
                                    encoding="utf-8")
    return summary


def read_split_dir(path) -> Split:
    d = Path(path)
    if not (d / "split.json").exists():
        raise FileNotFoundError(f"split not found: {d}")
    summary = json.loads((d / "split.json").read_text(encoding="utf-8"))
    parts = {}
    for part in SPLIT_PARTS:
        with open(d / f"{part}.jsonl", encoding="utf-8") as fh:
            parts[part] = [TripleOperation.from_json(json.loads(line)) for line in fh if line.strip()]
    assignment = {int(k): v for k, v in summary["assignment"].items()}
    return Split(parts["train"], parts["valid"], parts["test"], assignment)


SAMPLERS = {
    "basic": SamplerKind.BASIC,
    "edits": SamplerKind.EDIT_HISTORY,
    "edits-no-wars": SamplerKind.EDIT_HISTORY_NO_WARS,
    "inverse": SamplerKind.INVERSE,
}


def train_kge(prep: Prepared, kind: str, config: TrainConfig, sampler: str = "basic",
              side: Side = Side.BOTH, max_reject_retries: int = 100, **model_kwargs):
    entities, relations = vocabulary(prep.train_triples, prep.candidates)
    scfg = SamplerConfig(SAMPLERS[sampler], config.num_negatives, side, config.seed,
                         max_reject_retries)
    return train(prep.train_triples, kind, config, scfg, removals=prep.removals,
                 war_triples=prep.war_triples, entities=entities, relations=relations,
                 **model_kwargs)


def kge_scorer(model, predicate=INSTANCE_OF):
    """``score_fn(entity, candidates)`` over the embedded candidates."""
    def score(entity, candidates):
        if entity not in model.entity_index or predicate not in model.relation_index:
            return {}
        kept = [c for c in candidates if c in model.entity_index]
        if not kept:
            return {}
        t = np.array([model.entity_index[c] for c in kept])
        h = np.full(len(t), model.entity_index[entity])
        r = np.full(len(t), model.relation_index[predicate])
        return dict(zip(kept, model.score(h, r, t).tolist()))
    return score


def train_supervised(prep: Prepared, walk_config: WalkEmbeddingConfig = WalkEmbeddingConfig(),
                     forest_config: ForestConfig = ForestConfig(), dedup: bool = False):
    """Walk embeddings over the fit graph and a forest over labelled train operations."""
    graph = list(prep.train_triples)
    embeddings = walk_embeddings(graph, walk_config)
    labelled = [inst for inst in label_from_history(prep.split.train, dedup=dedup)
                if isinstance(inst.triple.object, EntityId)
                and all(str(x) in embeddings for x in inst.triple)]
    forest = train_forest(labelled, embeddings, forest_config)
    return forest, embeddings


def supervised_scorer(forest, embeddings, predicate=INSTANCE_OF):
    def score(entity, candidates):
        if str(entity) not in embeddings:
            return {}
        return dict(rank_types(forest, entity, candidates, embeddings, predicate))
    return score


def evaluate_scorer(prep: Prepared, score_fn):
    """Filtered ranking results and report over the prepared test sample."""
    results = evaluate_rankings(prep.sample, prep.candidates, score_fn, prep.known)
    skipped = len(prep.sample) - len(results)
    if skipped:
        log.warning("%d of %d test cases could not be ranked", skipped, len(prep.sample))
    return results, (ranking_report(results) if results else None)
