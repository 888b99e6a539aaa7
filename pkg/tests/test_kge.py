import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edithist.kge import (PRESETS, MuRE, NegativeSampler, RemovalIndex, RotatE, SamplerConfig,
                          SamplerError, SamplerKind, Side, TrainConfig, TrainingError, TransE,
                          basic_negative_sampling, create_model, edit_history_negative_sampling,
                          fetch_corruptions, inverse_negative_sampling, train)
from edithist.kge.hpo import Range, random_search, sample_params
from edithist.kge.io import ModelFileError, load_model, model_bytes, save_model
from edithist.kge.training import sgd_step, with_overrides
from edithist.model import INSTANCE_OF, item, prop
from oracles import gradient_check


# --- scoring ----------------------------------------------------------------

def test_transe_perfect_fit():
    m = TransE(2, 1, 2, normalize_entities=False)
    m.params = {"entity": np.array([[1.0, 0.0], [1.0, 1.0]]), "relation": np.array([[0.0, 1.0]])}
    assert m.score(np.array([0]), np.array([0]), np.array([1]))[0] == 0.0
    m.norm = 1
    assert m.score(np.array([1]), np.array([0]), np.array([0]))[0] == pytest.approx(-2.0)


def test_rotate_identity_rotation():
    rng = np.random.default_rng(0)
    m = RotatE(2, 1, 4)
    m.init_params(rng)
    m.params["phase"][:] = 0.0
    assert m.score(np.array([1]), np.array([0]), np.array([1]))[0] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(np.abs(m.relation_vectors()), 1.0)


def test_mure_identity():
    m = MuRE(2, 1, 3)
    m.init_params(np.random.default_rng(0))
    m.params["rel_diag"][:] = 1.0
    m.params["rel_vec"][:] = 0.0
    assert m.score(np.array([0]), np.array([0]), np.array([0]))[0] == pytest.approx(0.0)


def test_unknown_model_kind():
    with pytest.raises(ValueError):
        create_model("complex", 2, 1, 2)


@pytest.mark.parametrize("kind,kw", [("transe", {}), ("transe", {"norm": 1}), ("rotate", {}), ("mure", {})])
def test_gradients_match_finite_differences(kind, kw):
    rng = np.random.default_rng(123)
    for _ in range(20):
        assert gradient_check(kind, rng, **kw) < 1e-4


def test_sgd_step_follows_loss_gradient():
    rng = np.random.default_rng(7)
    m = MuRE(5, 2, 3)
    m.init_params(rng)
    pos = np.array([[0, 0, 1], [2, 1, 3]])
    neg = np.array([[[0, 0, 4], [3, 0, 1]], [[2, 1, 0], [4, 1, 3]]])

    def loss(model):
        ps = model.score(pos[:, 0], pos[:, 1], pos[:, 2])
        ns = model.score(neg[..., 0].ravel(), neg[..., 1].ravel(), neg[..., 2].ravel()).reshape(2, 2)
        return np.maximum(0, 5.0 - ps[:, None] + ns).sum() / len(pos)

    before = m.copy()
    lr = 1e-3
    sgd_step(m, pos, neg, lr, 5.0)
    eps = 1e-6
    for name, P in before.params.items():
        for idx in np.ndindex(P.shape):
            old = P[idx]
            P[idx] = old + eps
            up = loss(before)
            P[idx] = old - eps
            down = loss(before)
            P[idx] = old
            expected = old - lr * (up - down) / (2 * eps)
            assert m.params[name][idx] == pytest.approx(expected, abs=1e-9)


# --- fetching and samplers -----------------------------------------------

Q = item


def test_fetch_corruptions_examples():
    removals = [(Q(1), INSTANCE_OF, Q(5)), (Q(1), INSTANCE_OF, Q(6)), (Q(2), INSTANCE_OF, Q(5))]
    t = (Q(1), INSTANCE_OF, Q(7))
    assert fetch_corruptions(t, removals, side=Side.TAIL) == set(removals[:2])
    assert fetch_corruptions(t, removals, True, Side.TAIL, war_triples=[removals[0]]) == {removals[1]}
    assert fetch_corruptions((Q(9), INSTANCE_OF, Q(7)), removals, side=Side.TAIL) == set()
    assert fetch_corruptions((Q(9), INSTANCE_OF, Q(5)), removals, side=Side.HEAD) == {removals[0], removals[2]}


def test_index_fetch_matches_set_form():
    rng = np.random.default_rng(1)
    removals = {tuple(int(x) for x in rng.integers(0, 6, 3)) for _ in range(40)}
    wars = set(list(sorted(removals))[::3])
    index = RemovalIndex(removals, wars)
    for t in [tuple(int(x) for x in rng.integers(0, 6, 3)) for _ in range(50)]:
        for side in Side:
            for omit in (False, True):
                assert set(index.fetch(t, omit, side)) == fetch_corruptions(t, removals, omit, side, wars)


def _differs_in_one(pos, corr):
    diff = pos != corr
    return bool(diff.sum() == 1 and not diff[1])


def test_basic_sampler_examples():
    rng = np.random.default_rng(0)
    out = basic_negative_sampling(rng, np.array([[0, 0, 1]]), 2, 10)
    assert out.shape == (1, 2, 3)
    assert all(_differs_in_one(np.array([0, 0, 1]), c) for c in out[0])
    tail = basic_negative_sampling(rng, np.array([[3, 0, 1]] * 50), 4, 10, Side.TAIL)
    assert (tail[..., 0] == 3).all()
    a = basic_negative_sampling(np.random.default_rng(5), np.array([[0, 0, 1]] * 8), 3, 10)
    b = basic_negative_sampling(np.random.default_rng(5), np.array([[0, 0, 1]] * 8), 3, 10)
    assert (a == b).all()
    with pytest.raises(SamplerError):
        basic_negative_sampling(rng, np.array([[0, 0, 0]]), 1, 1)


def test_edit_history_all_from_removals_when_enough():
    removals = [(0, 0, k) for k in range(2, 7)]  # five candidates for (0, 0, 1)
    index = RemovalIndex(removals)
    rng = np.random.default_rng(0)
    for _ in range(200):
        out = edit_history_negative_sampling(rng, np.array([[0, 0, 1]]), index, 3, 50, side=Side.TAIL)
        rows = {tuple(c) for c in out[0]}
        assert len(rows) == 3 and rows <= set(removals)


def test_edit_history_pads_with_random():
    index = RemovalIndex([(0, 0, 2)])
    rng = np.random.default_rng(0)
    seen_candidate = 0
    for _ in range(300):
        out = edit_history_negative_sampling(rng, np.array([[0, 0, 1]]), index, 3, 50)
        rows = [tuple(c) for c in out[0]]
        assert len(rows) == 3 and len(set(rows)) == 3
        seen_candidate += (0, 0, 2) in rows
        assert sum(r != (0, 0, 2) for r in rows) >= 2
    # the lone candidate survives the shuffle in most but not all draws
    assert 0 < seen_candidate <= 300


def test_edit_history_empty_reduces_to_random():
    rng = np.random.default_rng(0)
    out = edit_history_negative_sampling(rng, np.array([[0, 0, 1]]), RemovalIndex(), 3, 20)
    assert all(_differs_in_one(np.array([0, 0, 1]), c) for c in out[0])


def test_inverse_examples():
    index = RemovalIndex([(0, 0, 1)])
    rng = np.random.default_rng(0)
    # pool {0: Q1, 1: Q5, 2: Q6}; tail corruptions of (0, 0, 2) may be 0 or 1, and 1 is banned
    out = inverse_negative_sampling(rng, np.array([[0, 0, 2]] * 20), index, 3, 3, side=Side.TAIL)
    assert (out[..., 2] == 0).all()
    a = inverse_negative_sampling(np.random.default_rng(9), np.array([[0, 0, 2]] * 5), RemovalIndex(), 2, 9)
    b = basic_negative_sampling(np.random.default_rng(9), np.array([[0, 0, 2]] * 5), 2, 9)
    assert (a == b).all()
    with pytest.raises(SamplerError) as exc:
        inverse_negative_sampling(rng, np.array([[0, 0, 1]]), RemovalIndex([(0, 0, 0)]), 1, 2,
                                  side=Side.TAIL, max_retries=10)
    assert "(0, 0, 1)" in str(exc.value)


def test_sampler_requires_index_for_history_kinds():
    with pytest.raises(SamplerError):
        NegativeSampler(SamplerConfig(SamplerKind.INVERSE), 10)
    NegativeSampler(SamplerConfig(SamplerKind.BASIC), 10)


triples_st = st.lists(st.tuples(*[st.integers(0, 7)] * 3), min_size=1, max_size=30)


@settings(max_examples=60, deadline=None)
@given(triples_st, triples_st, st.integers(1, 4), st.sampled_from(list(Side)), st.integers(0, 2**31))
def test_sampler_contracts(removals, positives, n, side, seed):
    wars = set(removals[::2])
    index = RemovalIndex(removals, wars)
    pos = np.array(positives)
    rng = np.random.default_rng(seed)
    for kind in SamplerKind:
        out = NegativeSampler(SamplerConfig(kind, n, side, seed), 8, index).sample(pos, rng)
        assert out.shape == (len(pos), n, 3)
        for p, corr in zip(pos, out):
            key = tuple(int(x) for x in p)
            fetched = set(index.fetch(key, kind is SamplerKind.EDIT_HISTORY_NO_WARS, side))
            rows = [tuple(int(x) for x in c) for c in corr]
            if kind is SamplerKind.INVERSE:
                assert not (set(rows) & set(index.fetch(key, False, side)))
            if kind is SamplerKind.EDIT_HISTORY and len(fetched) >= n:
                assert set(rows) <= fetched
            if kind is SamplerKind.EDIT_HISTORY_NO_WARS:
                assert not (set(rows) & wars)
            if kind in (SamplerKind.BASIC, SamplerKind.INVERSE):
                assert all(_differs_in_one(p, np.array(c)) for c in rows)


# --- training ---------------------------------------------------------------

def _toy_graph():
    """Two clusters; members of cluster k link to hub k and are instances of class k."""
    triples = []
    for k in range(2):
        hub, cls = item(100 + k), item(200 + k)
        for i in range(12):
            e = item(1 + k * 20 + i)
            triples.append((e, prop(361), hub))
            if i < 9:
                triples.append((e, INSTANCE_OF, cls))
    return triples


def test_lr_zero_keeps_initialization():
    cfg = TrainConfig(dim=8, epochs=1, batch_size=4, learning_rate=0.0, seed=3)
    res = train(_toy_graph(), "mure", cfg)
    init = create_model("mure", res.model.num_entities, res.model.num_relations, 8)
    init.init_params(np.random.default_rng(3))
    for name in init.params:
        assert np.allclose(res.model.params[name], init.params[name])


@pytest.mark.parametrize("kind", ["transe", "rotate", "mure"])
def test_loss_decreases(kind):
    cfg = TrainConfig(dim=16, epochs=30, batch_size=8, learning_rate=0.05, num_negatives=2)
    res = train(_toy_graph(), kind, cfg)
    assert res.losses[-1] < res.losses[0]
    assert len(res.losses) == 30


def test_toy_graph_held_out_scores_beat_corruptions():
    cfg = TrainConfig(dim=16, epochs=60, batch_size=8, learning_rate=0.1, num_negatives=2)
    res = train(_toy_graph(), "transe", cfg)
    m = res.model
    held = [(item(1 + k * 20 + i), INSTANCE_OF, item(200 + k)) for k in range(2) for i in range(9, 12)]
    wrong = [(item(1 + k * 20 + i), INSTANCE_OF, item(201 - k)) for k in range(2) for i in range(9, 12)]
    score = lambda ts: m.score(*np.array([[m.entity_index[s], m.relation_index[p], m.entity_index[o]]  # noqa: E731
                                          for s, p, o in ts]).T).mean()
    assert score(held) > score(wrong)


def test_nan_aborts_with_position():
    cfg = TrainConfig(dim=4, epochs=50, batch_size=4, learning_rate=1e12, num_negatives=2)
    with pytest.raises(TrainingError) as exc:
        train(_toy_graph(), "mure", cfg)
    assert exc.value.epoch is not None and exc.value.batch is not None
    assert "epoch" in str(exc.value)


def test_training_is_deterministic():
    cfg = TrainConfig(dim=8, epochs=3, batch_size=5, learning_rate=0.05, num_negatives=3)
    a = train(_toy_graph(), "rotate", cfg)
    b = train(_toy_graph(), "rotate", cfg)
    assert model_bytes(a.model) == model_bytes(b.model)
    assert a.losses == b.losses
    c = train(_toy_graph(), "rotate", with_overrides(cfg, seed=7))
    assert model_bytes(c.model) != model_bytes(a.model)


def test_rotate_phases_stay_wrapped_and_unit_modulus():
    def check(epoch, loss, model):
        ph = model.params["phase"]
        assert ((ph >= 0) & (ph < 2 * np.pi)).all()
        assert np.allclose(np.abs(model.relation_vectors()), 1.0, atol=1e-9)

    train(_toy_graph(), "rotate", TrainConfig(dim=8, epochs=4, batch_size=4, learning_rate=0.5),
          on_epoch=check)


def test_transe_entities_stay_normalized():
    res = train(_toy_graph(), "transe", TrainConfig(dim=8, epochs=3, batch_size=4, learning_rate=0.5))
    assert np.allclose(np.linalg.norm(res.model.params["entity"], axis=1), 1.0)


def test_tuned_presets():
    assert (PRESETS["rotate"].dim, PRESETS["rotate"].epochs, PRESETS["rotate"].batch_size,
            PRESETS["rotate"].learning_rate, PRESETS["rotate"].num_negatives) == (768, 13, 64, 0.009, 5)
    assert (PRESETS["transe"].dim, PRESETS["transe"].batch_size, PRESETS["transe"].num_negatives) == (64, 521, 7)
    assert (PRESETS["mure"].dim, PRESETS["mure"].epochs, PRESETS["mure"].learning_rate) == (150, 21, 0.088)
    for kind, cfg in PRESETS.items():
        res = train(_toy_graph(), kind, with_overrides(cfg, epochs=1))
        assert res.model.dim == cfg.dim and np.isfinite(res.losses[0])


def test_invalid_configs():
    with pytest.raises(ValueError):
        TrainConfig(dim=0)
    with pytest.raises(ValueError):
        TrainConfig(margin=0)
    with pytest.raises(TrainingError):
        train([], "transe", TrainConfig())


def test_sampler_negatives_follow_train_config():
    cfg = TrainConfig(dim=4, epochs=1, batch_size=4, num_negatives=3)
    sampler = SamplerConfig(SamplerKind.BASIC, num_negatives=1)
    assert train(_toy_graph(), "transe", cfg, sampler).losses


# --- persistence ------------------------------------------------------------

@pytest.mark.parametrize("kind", ["transe", "rotate", "mure"])
def test_model_file_round_trip(tmp_path, kind):
    res = train(_toy_graph(), kind, TrainConfig(dim=6, epochs=2, batch_size=8))
    path = save_model(res.model, tmp_path / "m", res and {"dim": 6})
    loaded, meta = load_model(path)
    assert meta["kind"] == kind and meta["config"] == {"dim": 6}
    assert loaded.entities == res.model.entities and loaded.relations == res.model.relations
    assert model_bytes(loaded) == path.read_bytes()
    h, r, t = np.array([0, 1]), np.array([0, 0]), np.array([2, 3])
    assert np.allclose(loaded.score(h, r, t), res.model.score(h, r, t), atol=1e-5)
    head = path.read_bytes()[:8]
    assert head == b"EHKGE\x00\x01\x00"


def test_model_file_errors(tmp_path):
    with pytest.raises(FileNotFoundError, match="model not found"):
        load_model(tmp_path / "nope.bin")
    res = train(_toy_graph(), "transe", TrainConfig(dim=4, epochs=1))
    path = save_model(res.model, tmp_path / "m")
    raw = path.read_bytes()
    path.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(ModelFileError):
        load_model(path)
    path.write_bytes(raw[:-3])
    with pytest.raises(ModelFileError):
        load_model(path)
    assert json.loads(path.with_suffix(".json").read_text())["norm"] == 2


# --- random search ----------------------------------------------------------

SPACE = {"lr": Range(1e-3, 1.0, log=True), "dim": Range(8, 64, integer=True), "neg": [1, 2, 4],
         "margin": 1.0}


def test_random_search_budget_one(tmp_path):
    best, trials = random_search(SPACE, 1, lambda p: p["lr"], log_path=tmp_path / "log.jsonl")
    assert len(trials) == 1 and best == trials[0].params
    assert len((tmp_path / "log.jsonl").read_text().splitlines()) == 1


def test_random_search_prefers_better_and_repeats():
    best, trials = random_search(SPACE, 6, lambda p: -abs(p["lr"] - 0.1))
    assert best == max(trials, key=lambda t: t.score).params
    _, again = random_search(SPACE, 6, lambda p: -abs(p["lr"] - 0.1))
    assert [t.params for t in trials] == [t.params for t in again]
    with pytest.raises(ValueError):
        random_search(SPACE, 0, lambda p: 0.0)


def test_sample_params_types():
    p = sample_params(SPACE, np.random.default_rng(0))
    assert isinstance(p["dim"], int) and 8 <= p["dim"] <= 64
    assert 1e-3 <= p["lr"] <= 1.0 and p["neg"] in (1, 2, 4) and p["margin"] == 1.0
