"""Margin-ranking SGD training for the embedding models.

The batch loss is ``sum(max(0, margin - f(pos) + f(neg))) / B`` over every
(positive, corruption) pair of a batch of ``B`` positives; the reported epoch
loss is the total over the epoch divided by the number of positives.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable

import numpy as np

from ..model import EntityId
from .models import KGEModel, create_model
from .sampling import NegativeSampler, RemovalIndex, SamplerConfig

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 64
    epochs: int = 10
    batch_size: int = 128
    learning_rate: float = 0.01
    num_negatives: int = 1
    margin: float = 1.0
    seed: int = 42

    def __post_init__(self):
        for name in ("dim", "epochs", "batch_size", "num_negatives"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if self.learning_rate < 0 or self.margin <= 0:
            raise ValueError("learning_rate must be >= 0 and margin > 0")

    def to_json(self) -> dict:
        return asdict(self)


# best configurations of the reference grid search, keyed by model
PRESETS = {
    "rotate": TrainConfig(dim=768, epochs=13, batch_size=64, learning_rate=0.009, num_negatives=5),
    "transe": TrainConfig(dim=64, epochs=10, batch_size=521, learning_rate=0.024, num_negatives=7),
    "mure": TrainConfig(dim=150, epochs=21, batch_size=256, learning_rate=0.088, num_negatives=28),
}


@dataclass
class TrainResult:
    model: KGEModel
    losses: list = field(default_factory=list)


def entity_triples(triples: Iterable) -> list:
    """Keep only triples whose object is an entity; sorted for determinism."""
    out = {(s, p, o) for s, p, o in triples if isinstance(o, EntityId)}
    return sorted(out, key=lambda t: (t[0].sort_key(), t[1].sort_key(), t[2].sort_key()))


def vocabulary(triples, extra_entities=()):
    ents, rels = set(extra_entities), set()
    for s, p, o in triples:
        ents.add(s)
        ents.add(o)
        rels.add(p)
    key = lambda x: x.sort_key() if hasattr(x, "sort_key") else x  # noqa: E731
    return sorted(ents, key=key), sorted(rels, key=key)


def encode(triples, model: KGEModel, skip_unknown: bool = False) -> np.ndarray:
    rows = []
    for s, p, o in triples:
        try:
            rows.append((model.entity_index[s], model.relation_index[p], model.entity_index[o]))
        except KeyError:
            if not skip_unknown:
                raise
    return np.array(rows, dtype=np.int64).reshape(-1, 3)


def _batch_rng(seed, epoch, batch):
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, batch]))


def sgd_step(model: KGEModel, pos: np.ndarray, neg: np.ndarray, lr: float, margin: float) -> float:
    """One margin-ranking update; returns the summed loss of the batch."""
    B, n = neg.shape[:2]
    ps, pgrad = model.score_grad(pos[:, 0], pos[:, 1], pos[:, 2])
    flat = neg.reshape(-1, 3)
    ns, ngrad = model.score_grad(flat[:, 0], flat[:, 1], flat[:, 2])
    ns = ns.reshape(B, n)
    hinge = margin - ps[:, None] + ns
    active = hinge > 0
    loss = float(hinge[active].sum())
    if lr == 0 or not active.any():
        return loss
    # d loss / d score: -count for positives, +1 per active corruption
    wp = -active.sum(axis=1).astype(float) / B
    wn = active.reshape(-1).astype(float) / B
    touched = [pos[:, 0], pos[:, 2], flat[:, 0], flat[:, 2]]
    for grads, w in ((pgrad, wp), (ngrad, wn)):
        for name, items in grads.items():
            P = model.params[name]
            for rows, g in items:
                np.add.at(P, rows, -lr * w[:, None] * g)
    model.post_step(np.concatenate(touched))
    return loss


def train(triples, kind: str, config: TrainConfig, sampler: SamplerConfig | None = None,
          removals: Iterable = (), war_triples: Iterable = (), entities=None, relations=None,
          on_epoch: Callable | None = None, **model_kwargs) -> TrainResult:
    """Train a ``kind`` model on ``triples`` (original ids) and return it with epoch losses.

    ``removals`` and ``war_triples`` feed the edit-history samplers; triples
    mentioning ids outside the vocabulary are ignored there.
    """
    triples = list(triples)
    if not triples:
        raise TrainingError("empty training graph")
    sampler = replace(sampler or SamplerConfig(seed=config.seed), num_negatives=config.num_negatives)
    if entities is None or relations is None:
        ents, rels = vocabulary(triples)
        entities = entities if entities is not None else ents
        relations = relations if relations is not None else rels
    model = create_model(kind, len(entities), len(relations), config.dim,
                         entities=entities, relations=relations, **model_kwargs)
    model.init_params(np.random.default_rng(config.seed))
    data = encode(triples, model)
    index = RemovalIndex(map(tuple, encode(removals, model, skip_unknown=True)),
                         map(tuple, encode(war_triples, model, skip_unknown=True)))
    neg = NegativeSampler(sampler, model.num_entities, index)

    result = TrainResult(model)
    bs = config.batch_size
    for epoch in range(config.epochs):
        order = np.random.default_rng(np.random.SeedSequence([config.seed, epoch])).permutation(len(data))
        total = 0.0
        for b, start in enumerate(range(0, len(data), bs)):
            pos = data[order[start:start + bs]]
            corr = neg.sample(pos, _batch_rng(sampler.seed, epoch, b))
            with np.errstate(over="ignore", invalid="ignore"):
                loss = sgd_step(model, pos, corr, config.learning_rate, config.margin)
            if not np.isfinite(loss) or not model.all_finite():
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {b}", epoch, b)
            total += loss
        result.losses.append(total / len(data))
        log.debug("epoch %d loss %.6f", epoch, result.losses[-1])
        if on_epoch is not None:
            on_epoch(epoch, result.losses[-1], model)
    return result


def with_overrides(config: TrainConfig, **overrides) -> TrainConfig:
    return replace(config, **{k: v for k, v in overrides.items() if v is not None})
