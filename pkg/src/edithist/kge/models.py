"""TransE, RotatE and MuRE scoring functions with analytic gradients.

All scores follow the "higher is more plausible" convention:

* TransE  ``-||s + r - o||_p``
* RotatE  ``-||s * r - o||`` with ``r = exp(i * phase)`` (unit modulus)
* MuRE    ``-||R * s - (o + r)||^2 + b_s + b_o`` with diagonal ``R``

Parameters live in float64 arrays keyed by block name; ``score_grad``
returns, per block, the row indices touched and the gradient of each score
with respect to those rows.
"""

from __future__ import annotations

import copy as _copy

import numpy as np

_EPS = 1e-12


class KGEModel:
    kind = "base"
    entity_blocks: tuple = ()
    relation_blocks: tuple = ()

    def __init__(self, num_entities: int, num_relations: int, dim: int, params=None,
                 entities=None, relations=None):
        self.num_entities = num_entities
        self.num_relations = num_relations
        self.dim = dim
        self.params: dict = params if params is not None else {}
        self.entities = list(entities) if entities is not None else list(range(num_entities))
        self.relations = list(relations) if relations is not None else list(range(num_relations))
        self.entity_index = {e: i for i, e in enumerate(self.entities)}
        self.relation_index = {r: i for i, r in enumerate(self.relations)}

    # -- construction --
    def init_params(self, rng: np.random.Generator) -> None:
        bound = 6.0 / np.sqrt(self.dim)
        for name in self.entity_blocks:
            self.params[name] = rng.uniform(-bound, bound, (self.num_entities, self.dim))
        for name in self.relation_blocks:
            self.params[name] = rng.uniform(-bound, bound, (self.num_relations, self.dim))

    def copy(self):
        clone = _copy.copy(self)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone

    def post_step(self, touched_entities=None) -> None:
        """Projection applied after every parameter update."""

    # -- scoring --
    def score(self, h, r, t) -> np.ndarray:
        raise NotImplementedError

    def score_grad(self, h, r, t):
        """Return ``(scores, {block: [(rows, grads), ...]})``."""
        raise NotImplementedError

    def score_triple(self, triple) -> float:
        """Score one ``(subject, predicate, object)`` given in original ids."""
        s, p, o = triple
        try:
            h = self.entity_index[s]
            t = self.entity_index[o]
            r = self.relation_index[p]
        except KeyError as exc:
            raise KeyError(f"{exc.args[0]} is not embedded") from None
        return float(self.score(np.array([h]), np.array([r]), np.array([t]))[0])

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.params.values())


class TransE(KGEModel):
    kind = "transe"
    entity_blocks = ("entity",)
    relation_blocks = ("relation",)

    def __init__(self, *args, norm: int = 2, normalize_entities: bool = True, **kwargs):
        super().__init__(*args, **kwargs)
        self.norm = norm
        self.normalize_entities = normalize_entities

    def init_params(self, rng):
        super().init_params(rng)
        if self.normalize_entities:
            self._normalize(np.arange(self.num_entities))

    def _normalize(self, rows):
        E = self.params["entity"]
        n = np.linalg.norm(E[rows], axis=-1, keepdims=True)
        E[rows] = E[rows] / np.maximum(n, _EPS)

    def post_step(self, touched_entities=None):
        if self.normalize_entities:
            rows = np.arange(self.num_entities) if touched_entities is None else np.unique(touched_entities)
            self._normalize(rows)

    def _diff(self, h, r, t):
        E, R = self.params["entity"], self.params["relation"]
        return E[h] + R[r] - E[t]

    def score(self, h, r, t):
        d = self._diff(h, r, t)
        if self.norm == 1:
            return -np.abs(d).sum(-1)
        return -np.sqrt((d * d).sum(-1))

    def score_grad(self, h, r, t):
        d = self._diff(h, r, t)
        if self.norm == 1:
            scores = -np.abs(d).sum(-1)
            g = -np.sign(d)
        else:
            n = np.sqrt((d * d).sum(-1))
            scores = -n
            g = -d / np.maximum(n, _EPS)[..., None]
        return scores, {"entity": [(h, g), (t, -g)], "relation": [(r, g)]}


class RotatE(KGEModel):
    kind = "rotate"
    entity_blocks = ("entity_re", "entity_im")
    relation_blocks = ("phase",)

    def init_params(self, rng):
        bound = 6.0 / np.sqrt(self.dim)
        self.params["entity_re"] = rng.uniform(-bound, bound, (self.num_entities, self.dim))
        self.params["entity_im"] = rng.uniform(-bound, bound, (self.num_entities, self.dim))
        self.params["phase"] = rng.uniform(0.0, 2 * np.pi, (self.num_relations, self.dim))

    def relation_vectors(self) -> np.ndarray:
        """Unit-modulus complex relation vectors."""
        return np.exp(1j * self.params["phase"])

    def post_step(self, touched_entities=None):
        np.mod(self.params["phase"], 2 * np.pi, out=self.params["phase"])

    def _parts(self, h, r, t):
        a, b = self.params["entity_re"][h], self.params["entity_im"][h]
        c, e = self.params["entity_re"][t], self.params["entity_im"][t]
        th = self.params["phase"][r]
        cos, sin = np.cos(th), np.sin(th)
        u = a * cos - b * sin - c
        v = a * sin + b * cos - e
        return a, b, cos, sin, u, v

    def score(self, h, r, t):
        *_, u, v = self._parts(h, r, t)
        return -np.sqrt((u * u + v * v).sum(-1))

    def score_grad(self, h, r, t):
        a, b, cos, sin, u, v = self._parts(h, r, t)
        n = np.sqrt((u * u + v * v).sum(-1))
        inv = 1.0 / np.maximum(n, _EPS)[..., None]
        ga = -(u * cos + v * sin) * inv
        gb = -(-u * sin + v * cos) * inv
        gth = -(u * (-a * sin - b * cos) + v * (a * cos - b * sin)) * inv
        return -n, {
            "entity_re": [(h, ga), (t, u * inv)],
            "entity_im": [(h, gb), (t, v * inv)],
            "phase": [(r, gth)],
        }


class MuRE(KGEModel):
    kind = "mure"
    entity_blocks = ("entity",)
    relation_blocks = ("rel_diag", "rel_vec")

    def init_params(self, rng):
        bound = 6.0 / np.sqrt(self.dim)
        self.params["entity"] = rng.uniform(-bound, bound, (self.num_entities, self.dim))
        self.params["rel_diag"] = rng.uniform(-bound, bound, (self.num_relations, self.dim))
        self.params["rel_vec"] = rng.uniform(-bound, bound, (self.num_relations, self.dim))
        self.params["bias"] = np.zeros((self.num_entities, 1))

    def _diff(self, h, r, t):
        E = self.params["entity"]
        return self.params["rel_diag"][r] * E[h] - (E[t] + self.params["rel_vec"][r])

    def score(self, h, r, t):
        d = self._diff(h, r, t)
        b = self.params["bias"]
        return -(d * d).sum(-1) + b[h, 0] + b[t, 0]

    def score_grad(self, h, r, t):
        E, Rd = self.params["entity"], self.params["rel_diag"]
        d = self._diff(h, r, t)
        b = self.params["bias"]
        scores = -(d * d).sum(-1) + b[h, 0] + b[t, 0]
        ones = np.ones(d.shape[:-1] + (1,))
        return scores, {
            "entity": [(h, -2 * d * Rd[r]), (t, 2 * d)],
            "rel_diag": [(r, -2 * d * E[h])],
            "rel_vec": [(r, 2 * d)],
            "bias": [(h, ones), (t, ones)],
        }


MODELS = {"transe": TransE, "rotate": RotatE, "mure": MuRE}


def create_model(kind: str, num_entities: int, num_relations: int, dim: int, *,
                 entities=None, relations=None, **kwargs) -> KGEModel:
    try:
        cls = MODELS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown model {kind!r}; choose from {sorted(MODELS)}") from None
    if cls is not TransE:
        kwargs.pop("norm", None)
        kwargs.pop("normalize_entities", None)
    return cls(num_entities, num_relations, dim, entities=entities, relations=relations, **kwargs)


def dense_gradient(model: KGEModel, h, r, t, weights=None) -> dict:
    """Gradient of ``sum(weights * score)`` as full-size arrays (used by tests and SGD)."""
    scores, parts = model.score_grad(h, r, t)
    if weights is None:
        weights = np.ones_like(scores)
    out = {name: np.zeros_like(arr) for name, arr in model.params.items()}
    w = np.asarray(weights)[..., None]
    for name, items in parts.items():
        for rows, g in items:
            np.add.at(out[name], rows.reshape(-1), (w * g).reshape(-1, g.shape[-1]))
    return out
