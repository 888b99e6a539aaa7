"""Type refinement as binary classification over concatenated triple embeddings."""

from __future__ import annotations

import json
import logging
import struct
from pathlib import Path

import numpy as np

from ..model import INSTANCE_OF
from .forest import ForestConfig, RandomForest

log = logging.getLogger(__name__)

EPSILON = 1e-9


def triple_features(triple, embeddings) -> np.ndarray:
    """``embed(s) || embed(p) || embed(o)``; raises KeyError for unembedded ids."""
    s, p, o = triple
    return np.concatenate([embeddings[str(s)], embeddings[str(p)], embeddings[str(o)]])


def train_forest(instances, embeddings, config: ForestConfig = ForestConfig()) -> RandomForest:
    instances = list(instances)
    X = np.array([triple_features(i.triple, embeddings) for i in instances])
    y = np.array([i.label for i in instances])
    forest = RandomForest(config).fit(X, y)
    log.info("forest trained on %d instances, oob accuracy %s", len(y), forest.oob_accuracy)
    return forest


def rank_types(forest: RandomForest, entity, candidates, embeddings, predicate=INSTANCE_OF):
    """Candidates as ``(candidate, log P(y=1))`` in descending order, ties by id."""
    candidates = list(candidates)
    if not candidates:
        raise ValueError("empty candidate set")
    kept, rows = [], []
    for c in candidates:
        try:
            rows.append(triple_features((entity, predicate, c), embeddings))
        except KeyError:
            log.warning("candidate %s is not embedded; skipped", c)
            continue
        kept.append(c)
    if not kept:
        return []
    p = np.clip(forest.positive_proba(np.array(rows)), EPSILON, 1 - EPSILON)
    scored = [(c, float(lp)) for c, lp in zip(kept, np.log(p))]
    scored.sort(key=lambda x: (-x[1], x[0].sort_key() if hasattr(x[0], "sort_key") else x[0]))
    return scored


def save_embeddings(embeddings: dict, path) -> None:
    """``path``.bin holds little-endian float32 rows; ``path``.json lists the tokens."""
    path = Path(path)
    tokens = sorted(embeddings)
    dim = len(embeddings[tokens[0]]) if tokens else 0
    mat = np.array([embeddings[t] for t in tokens], dtype="<f4").reshape(len(tokens), dim)
    path.with_suffix(".bin").write_bytes(struct.pack("<2I", len(tokens), dim) + mat.tobytes())
    path.with_suffix(".json").write_text(json.dumps({"tokens": tokens, "dim": dim}), encoding="utf-8")


def load_embeddings(path) -> dict:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text(encoding="utf-8"))
    raw = path.with_suffix(".bin").read_bytes()
    n, dim = struct.unpack("<2I", raw[:8])
    mat = np.frombuffer(raw[8:], dtype="<f4").reshape(n, dim).astype(np.float64)
    return {t: mat[i] for i, t in enumerate(meta["tokens"])}


def save_supervised(forest: RandomForest, embeddings: dict, out_dir, config: dict | None = None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    forest.save(out / "forest.json")
    save_embeddings(embeddings, out / "embeddings")
    (out / "supervised.json").write_text(json.dumps(config or {}, sort_keys=True, indent=2) + "\n",
                                         encoding="utf-8")
    return out


def load_supervised(out_dir):
    out = Path(out_dir)
    if not (out / "forest.json").exists():
        raise FileNotFoundError(f"model not found: {out}")
    return RandomForest.load(out / "forest.json"), load_embeddings(out / "embeddings")
