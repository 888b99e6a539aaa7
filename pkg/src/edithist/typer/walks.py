"""Random-walk entity embeddings: uniform walks over outgoing edges, then
skip-gram with negative sampling on the resulting token sequences.

A walk from ``e0`` is ``[e0, p1, e1, p2, e2, ...]`` with at most ``max_depth``
hops. Entities without outgoing edges produce the one-token walk ``[e0]``,
which contributes no training pairs, so their vectors stay at initialization.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from ..model import EntityId


@dataclass(frozen=True)
class WalkEmbeddingConfig:
    vector_size: int = 50
    epochs: int = 50
    max_depth: int = 5
    walks_per_entity: int = 50
    window: int = 5
    negatives: int = 5
    learning_rate: float = 0.025
    batch_size: int = 512
    seed: int = 42

    def __post_init__(self):
        for name in ("vector_size", "epochs", "max_depth", "walks_per_entity", "window",
                     "negatives", "batch_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


def _token(x) -> str:
    return str(x)


def adjacency(triples) -> dict:
    """Sorted outgoing ``(predicate, object)`` edges per entity; entity objects only."""
    adj: dict = defaultdict(list)
    nodes = set()
    for s, p, o in triples:
        nodes.add(s)
        if isinstance(o, EntityId):
            nodes.add(o)
            adj[s].append((p, o))
    key = lambda e: e.sort_key() if hasattr(e, "sort_key") else e  # noqa: E731
    out = {}
    for n in sorted(nodes, key=key):
        out[n] = sorted(set(adj.get(n, ())), key=lambda po: (key(po[0]), key(po[1])))
    return out


def generate_walks(adj: dict, max_depth: int, walks_per_entity: int, seed: int = 42) -> list:
    """Token lists; entity ``i`` (in ``adj`` order) is walked with seed ``(seed, i)``."""
    walks = []
    for i, start in enumerate(adj):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        for _ in range(walks_per_entity):
            walk = [_token(start)]
            node = start
            for _ in range(max_depth):
                edges = adj.get(node)
                if not edges:
                    break
                p, o = edges[int(rng.integers(len(edges)))]
                walk.append(_token(p))
                walk.append(_token(o))
                node = o
            walks.append(walk)
    return walks


def _pairs(walks, index, window):
    centers, contexts = [], []
    for walk in walks:
        ids = [index[t] for t in walk]
        n = len(ids)
        for i in range(n):
            lo, hi = max(0, i - window), min(n, i + window + 1)
            for j in range(lo, hi):
                if j != i:
                    centers.append(ids[i])
                    contexts.append(ids[j])
    return np.array(centers, dtype=np.int64), np.array(contexts, dtype=np.int64)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def skipgram(walks, config: WalkEmbeddingConfig, vocab=None) -> tuple:
    """Train SGNS; returns ``(tokens, vectors)`` with ``vectors[i]`` for ``tokens[i]``."""
    tokens = sorted({t for w in walks for t in w} | set(vocab or ()))
    index = {t: i for i, t in enumerate(tokens)}
    V, d = len(tokens), config.vector_size
    rng = np.random.default_rng(config.seed)
    W = (rng.random((V, d)) - 0.5) / d
    C = np.zeros((V, d))
    centers, contexts = _pairs(walks, index, config.window)
    if len(centers) == 0:
        return tokens, W
    freq = np.bincount(np.concatenate([centers, contexts]), minlength=V).astype(float) ** 0.75
    noise = np.cumsum(freq / freq.sum())
    noise[-1] = 1.0
    total = config.epochs * len(centers)
    seen = 0
    k = config.negatives
    for epoch in range(config.epochs):
        erng = np.random.default_rng(np.random.SeedSequence([config.seed, epoch]))
        order = erng.permutation(len(centers))
        for start in range(0, len(order), config.batch_size):
            sel = order[start:start + config.batch_size]
            lr = config.learning_rate * max(1e-4, 1.0 - seen / total)
            seen += len(sel)
            c, o = centers[sel], contexts[sel]
            negs = np.searchsorted(noise, erng.random((len(sel), k)))
            targets = np.concatenate([o[:, None], negs], axis=1)  # (b, 1+k)
            labels = np.zeros(targets.shape)
            labels[:, 0] = 1.0
            wc = W[c]                                              # (b, d)
            ct = C[targets]                                        # (b, 1+k, d)
            g = (labels - _sigmoid(np.einsum("bd,bkd->bk", wc, ct))) * lr
            # rows repeated within a batch get the mean of their updates, so small
            # vocabularies do not multiply the step size by the repeat count
            tflat = targets.reshape(-1)
            dW = np.zeros((V, d))
            dC = np.zeros((V, d))
            np.add.at(dW, c, np.einsum("bk,bkd->bd", g, ct))
            np.add.at(dC, tflat, (g[..., None] * wc[:, None, :]).reshape(-1, d))
            W += dW / np.maximum(np.bincount(c, minlength=V), 1)[:, None]
            C += dC / np.maximum(np.bincount(tflat, minlength=V), 1)[:, None]
    return tokens, W


def walk_embeddings(triples, config: WalkEmbeddingConfig = WalkEmbeddingConfig()) -> dict:
    """Map every entity and predicate id (as string) to its vector."""
    triples = list(triples)
    if not triples:
        raise ValueError("cannot embed an empty graph")
    adj = adjacency(triples)
    walks = generate_walks(adj, config.max_depth, config.walks_per_entity, config.seed)
    extra = {_token(p) for _, p, _ in triples}
    tokens, W = skipgram(walks, config, vocab=extra)
    return {t: W[i] for i, t in enumerate(tokens)}
