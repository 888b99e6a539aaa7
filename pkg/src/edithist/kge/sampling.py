"""Negative samplers: basic random corruption plus three edit-history variants.

Triples are ``(head, relation, tail)`` integer tuples in the model's index
space. The removal index holds the removed triples of the training history;
war-involved triples are flagged so the no-wars variants can skip them.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np


class SamplerError(RuntimeError):
    pass


class SamplerKind(enum.Enum):
    BASIC = "basic"
    EDIT_HISTORY = "edits"
    EDIT_HISTORY_NO_WARS = "edits-no-wars"
    INVERSE = "inverse"


class Side(enum.Enum):
    HEAD = "head"
    TAIL = "tail"
    BOTH = "both"


@dataclass(frozen=True)
class SamplerConfig:
    kind: SamplerKind = SamplerKind.BASIC
    num_negatives: int = 1
    corrupt_side: Side = Side.BOTH
    seed: int = 42
    max_reject_retries: int = 100

    def __post_init__(self):
        if self.num_negatives < 1:
            raise ValueError("num_negatives must be >= 1")


class RemovalIndex:
    """Removed triples keyed by (head, relation) and (relation, tail)."""

    def __init__(self, removals: Iterable[tuple] = (), war_triples: Iterable[tuple] = ()):
        self.removals = set(map(tuple, removals))
        self.wars = set(map(tuple, war_triples))
        self.by_hr: dict = defaultdict(list)
        self.by_rt: dict = defaultdict(list)
        for t in sorted(self.removals):
            self.by_hr[(t[0], t[1])].append(t)
            self.by_rt[(t[1], t[2])].append(t)

    def fetch(self, triple, omit_edit_wars: bool = False, side: Side = Side.TAIL) -> list:
        """Removal-derived corruption candidates for ``triple``, sorted."""
        h, r, t = triple
        found = []
        if side in (Side.TAIL, Side.BOTH):
            found.extend(self.by_hr.get((h, r), ()))
        if side in (Side.HEAD, Side.BOTH):
            found.extend(x for x in self.by_rt.get((r, t), ()) if x not in found)
        if omit_edit_wars:
            found = [x for x in found if x not in self.wars]
        # the positive itself is never a corruption of itself
        return [x for x in found if x != tuple(triple)]


def fetch_corruptions(triple, removals: Iterable[tuple], omit_edit_wars: bool = False,
                      side: Side = Side.TAIL, war_triples: Iterable[tuple] = ()) -> set:
    """Set form of removal candidate fetching over arbitrary hashable triples."""
    h, r, t = triple
    wars = set(war_triples)
    out = set()
    for x in removals:
        x = tuple(x)
        if omit_edit_wars and x in wars:
            continue
        if side in (Side.TAIL, Side.BOTH) and x[0] == h and x[1] == r:
            out.add(x)
        if side in (Side.HEAD, Side.BOTH) and x[1] == r and x[2] == t:
            out.add(x)
    out.discard(tuple(triple))
    return out


def _random_entities(rng, originals, num_entities):
    """Uniform entities different from ``originals`` (elementwise)."""
    draw = rng.integers(0, num_entities - 1, size=np.shape(originals))
    return draw + (draw >= originals)


def random_corruptions(rng: np.random.Generator, triples: np.ndarray, n: int,
                       num_entities: int, side: Side = Side.BOTH) -> np.ndarray:
    """``(B, n, 3)`` corruptions replacing exactly one of head/tail per row."""
    if num_entities < 2:
        raise SamplerError("random corruption needs at least two entities")
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    out = np.repeat(triples[:, None, :], n, axis=1)
    if side is Side.HEAD:
        head = np.ones(out.shape[:2], dtype=bool)
    elif side is Side.TAIL:
        head = np.zeros(out.shape[:2], dtype=bool)
    else:
        head = rng.random(out.shape[:2]) < 0.5
    col = np.where(head, 0, 2)
    rows, negs = np.indices(out.shape[:2])
    orig = out[rows, negs, col]
    out[rows, negs, col] = _random_entities(rng, orig, num_entities)
    return out


def basic_negative_sampling(rng, triples, n: int, num_entities: int, side: Side = Side.BOTH):
    return random_corruptions(rng, triples, n, num_entities, side)


def edit_history_negative_sampling(rng, triples, index: RemovalIndex, n: int, num_entities: int,
                                   omit_edit_wars: bool = False, side: Side = Side.BOTH,
                                   max_retries: int = 100) -> np.ndarray:
    """Removal candidates padded with random corruptions, shuffled, first ``n`` kept."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    out = np.empty((len(triples), n, 3), dtype=np.int64)
    for i, t in enumerate(triples):
        key = tuple(int(x) for x in t)
        pool = dict.fromkeys(index.fetch(key, omit_edit_wars, side))
        budget = max_retries + n
        while len(pool) < n:
            need = n - len(pool)
            cands = random_corruptions(rng, t, need, num_entities, side)[0]
            for c in cands:
                c = tuple(int(x) for x in c)
                # the no-wars variant never lets a war-involved triple in, not even as padding
                if not (omit_edit_wars and c in index.wars):
                    pool.setdefault(c)
            budget -= need
            if budget <= 0 and len(pool) < n:
                raise SamplerError(f"cannot find {n} distinct corruptions for triple {key}")
        cand = np.array(list(pool), dtype=np.int64)
        out[i] = cand[rng.permutation(len(cand))[:n]]
    return out


def inverse_negative_sampling(rng, triples, index: RemovalIndex, n: int, num_entities: int,
                              omit_edit_wars: bool = False, side: Side = Side.BOTH,
                              max_retries: int = 100) -> np.ndarray:
    """Random corruptions, redrawn while they hit the triple's removal candidates."""
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    out = random_corruptions(rng, triples, n, num_entities, side)
    for i, t in enumerate(triples):
        key = tuple(int(x) for x in t)
        banned = set(index.fetch(key, omit_edit_wars, side))
        if not banned:
            continue
        for j in range(n):
            tries = 0
            while tuple(int(x) for x in out[i, j]) in banned:
                if tries >= max_retries:
                    raise SamplerError(
                        f"no admissible corruption for triple {key} after {max_retries} retries")
                out[i, j] = random_corruptions(rng, t, 1, num_entities, side)[0, 0]
                tries += 1
    return out


class NegativeSampler:
    """Dispatches a :class:`SamplerConfig` to the matching sampling routine."""

    def __init__(self, config: SamplerConfig, num_entities: int, index: RemovalIndex | None = None):
        if config.kind is not SamplerKind.BASIC and index is None:
            raise SamplerError(f"{config.kind.value} sampler needs a removal index")
        self.config = config
        self.num_entities = num_entities
        self.index = index or RemovalIndex()

    def sample(self, triples, rng: np.random.Generator) -> np.ndarray:
        c = self.config
        if c.kind is SamplerKind.BASIC:
            return basic_negative_sampling(rng, triples, c.num_negatives, self.num_entities,
                                           c.corrupt_side)
        if c.kind is SamplerKind.INVERSE:
            return inverse_negative_sampling(rng, triples, self.index, c.num_negatives,
                                             self.num_entities, False, c.corrupt_side,
                                             c.max_reject_retries)
        return edit_history_negative_sampling(
            rng, triples, self.index, c.num_negatives, self.num_entities,
            c.kind is SamplerKind.EDIT_HISTORY_NO_WARS, c.corrupt_side, c.max_reject_retries)
