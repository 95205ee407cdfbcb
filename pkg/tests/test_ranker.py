import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperdisc.embed import EmbeddingTable, UnrepresentableTermError
from hyperdisc.encoders import EncoderConfig
from hyperdisc.nn import make_rng
from hyperdisc.ranker import (
    CandidateIndex,
    Model,
    TrainerConfig,
    TrainingPair,
    ZeroNormError,
    cosine,
    cosine_grad,
    fit,
    hinge_loss,
    margin_for,
    predict,
    rank_candidates,
    sample_negatives,
    score,
    split_pairs,
    train_epoch,
    validation_mrr,
    write_predictions,
)
from hyperdisc.toy import toy_taxonomy

finite = st.floats(-10, 10, allow_nan=False)
vec3 = st.lists(finite, min_size=3, max_size=3).map(np.array).filter(lambda v: np.linalg.norm(v) > 1e-3)


def tea_model(entries):
    dim = len(next(iter(entries.values())))
    table = EmbeddingTable(dim, {k: np.asarray(v, float) for k, v in entries.items()})
    return Model.create(EncoderConfig("TEA", dim, 4), table)


# -- cosine and score --

def test_cosine_examples():
    assert cosine([1, 0], [1, 0]) == 1.0
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 0], [-1, 0]) == -1.0
    assert cosine([1, 1], [1, 0]) == pytest.approx(1 / math.sqrt(2), abs=1e-12)


def test_cosine_zero_norm():
    with pytest.raises(ZeroNormError):
        cosine([0, 0], [1, 0])
    with pytest.raises(ZeroNormError):
        cosine_grad(np.zeros(2), np.ones(2))


@settings(max_examples=200, deadline=None)
@given(vec3, vec3, st.floats(0.01, 100))
def test_cosine_properties(x, y, c):
    s = cosine(x, y)
    assert -1 <= s <= 1
    assert s == pytest.approx(cosine(y, x), abs=1e-12)
    assert cosine(c * x, y) == pytest.approx(s, abs=1e-12)
    assert cosine(x, x) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(vec3, vec3)
def test_cosine_grad_finite_differences(x, y):
    c, dx, dy = cosine_grad(x, y)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        num_x = (cosine_grad(x + e, y)[0] - cosine_grad(x - e, y)[0]) / (2 * h)
        num_y = (cosine_grad(x, y + e)[0] - cosine_grad(x, y - e)[0]) / (2 * h)
        assert abs(num_x - dx[i]) < 1e-5 * max(1, 1 / np.linalg.norm(x)) ** 2
        assert abs(num_y - dy[i]) < 1e-5 * max(1, 1 / np.linalg.norm(y)) ** 2


def test_score_self_and_word_order_for_tea():
    m = tea_model({"a": [1, 2], "b": [3, -1], "c": [0, 1]})
    assert score(m, "a", "a") == pytest.approx(1.0, abs=1e-12)
    assert score(m, "a b", "b a") == pytest.approx(1.0, abs=1e-12)


def test_score_recomposes_gru_encodings():
    rng = np.random.default_rng(0)
    table = EmbeddingTable(3, {w: rng.normal(size=3) for w in ("a", "b", "c")})
    m = Model.create(EncoderConfig("GRU", 3, 5), table, seed=4)
    u, v = m.encode("a b"), m.encode("c")
    expected = float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
    assert score(m, "a b", "c") == pytest.approx(expected, abs=1e-12)
    # order matters for a recurrent encoder
    assert not np.allclose(m.encode("a b"), m.encode("b a"))


def test_score_unrepresentable():
    m = tea_model({"a": [1.0, 0.0]})
    with pytest.raises(UnrepresentableTermError):
        score(m, "zzz", "a")


# -- hinge loss and negatives --

def test_hinge_examples():
    assert hinge_loss(0.9, 0.2, 0.1) == 0.0
    assert hinge_loss(0.5, 0.7, 0.1) == pytest.approx(0.3)
    assert hinge_loss(0.6, 0.5, 0.1) == 0.0
    assert margin_for("x", "x", 0.1) == 0.0
    assert margin_for("x", "y", 0.1) == 0.1
    with pytest.raises(ValueError):
        hinge_loss(0.1, 0.1, -1)


@settings(max_examples=200)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 2), st.floats(0, 1))
def test_hinge_properties(sp, sn, delta, bump):
    loss = hinge_loss(sp, sn, delta)
    assert loss >= 0
    assert loss >= delta + sn - sp
    # raising s_pos never raises the loss
    assert hinge_loss(sp + bump, sn, delta) <= loss + 1e-15
    assert hinge_loss(sp, sn, delta + bump) >= loss


def test_negatives_exclude_gold_and_query():
    rng = make_rng(0)
    assert sample_negatives(rng, ["a", "b", "c"], {"a"}, 3, query="c") == ["b", "b", "b"]
    out = sample_negatives(make_rng(1), list("abcdefg"), {"a", "b"}, 50, query="c")
    assert len(out) == 50 and not set(out) & {"a", "b", "c"}


def test_negatives_infeasible():
    with pytest.raises(ValueError):
        sample_negatives(make_rng(0), ["a", "b"], {"a", "b"}, 1)
    with pytest.raises(ValueError):
        sample_negatives(make_rng(0), ["a", "b"], {"a"}, 1, query="b")


def test_negatives_deterministic():
    vocab = [f"w{i}" for i in range(30)]
    assert sample_negatives(make_rng(7), vocab, {"w0"}, 20) == sample_negatives(make_rng(7), vocab, {"w0"}, 20)


def test_negatives_uniform():
    vocab = list("abcdefgh")
    counts = Counter(sample_negatives(make_rng(3), vocab, {"a", "b"}, 100_000))
    for c in "cdefgh":
        assert abs(counts[c] / 100_000 - 1 / 6) < 0.02


# -- training --

def _tiny_setup():
    table = EmbeddingTable(2, {"q": np.array([1.0, 0.2]), "p": np.array([0.1, 1.0]), "a": np.array([1.0, 0.0])})
    return table, [TrainingPair("q", frozenset(["p"]))], ["p", "a"]


def test_train_epoch_zero_loss_leaves_params():
    table = EmbeddingTable(2, {"q": np.array([1.0, 0.0]), "p": np.array([1.0, 0.1]), "a": np.array([-1.0, 0.0])})
    m = Model.create(EncoderConfig("GRU", 2, 3), table, seed=1)
    for t in m.tensors():
        t.values[...] = 0.0
    m.params.W_h.values[...] = np.eye(3, 2)
    m.params.b_z.values[:] = 50.0
    before = [t.values.copy() for t in m.tensors()]
    stats = train_epoch(m, [TrainingPair("q", frozenset(["p"]))], ["p", "a"],
                        TrainerConfig(negatives_per_positive=1, dropout_p=0.0))
    assert stats.mean_loss == 0.0 and stats.violations == 0
    assert all(np.array_equal(b, t.values) for b, t in zip(before, m.tensors()))
    assert m.epochs_trained == 1


def test_train_epoch_tea_loss_and_no_params():
    table, pairs, vocab = _tiny_setup()
    m = Model.create(EncoderConfig("TEA", 2, 4), table)
    stats = train_epoch(m, pairs, vocab, TrainerConfig(negatives_per_positive=1, dropout_p=0.0, margin=0.1))
    expected = 0.1 + cosine(table["q"], table["a"]) - cosine(table["q"], table["p"])
    assert stats.mean_loss == pytest.approx(expected, abs=1e-12)
    assert stats.violations == 1 and m.tensors() == []


def test_train_epoch_single_step_oracle():
    """RCNN with one level and lambda pinned near 0 is h = tanh(W x + b); check one AdaGrad step by hand."""
    table, pairs, vocab = _tiny_setup()
    cfg = EncoderConfig("RCNN", 2, 2, rcnn_order=1)
    m = Model.create(cfg, table, seed=0)
    p = m.params
    p.W_lam.values[...] = 0.0
    p.U_lam.values[...] = 0.0
    p.b_lam.values[...] = -50.0
    W0 = np.array([[0.3, -0.2], [0.1, 0.4]])
    b0 = np.array([0.05, -0.1])
    p.W_levels.values[0] = W0
    p.b.values[...] = b0
    lr, eps, delta = 0.05, 1e-6, 0.5

    enc = {w: np.tanh(W0 @ table[w] + b0) for w in ("q", "p", "a")}

    def cos_and_grads(x, y):
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        c = x @ y / (nx * ny)
        return c, y / (nx * ny) - c * x / nx**2, x / (nx * ny) - c * y / ny**2

    s_pos, du_p, dp = cos_and_grads(enc["q"], enc["p"])
    s_neg, du_a, da = cos_and_grads(enc["q"], enc["a"])
    loss = delta + s_neg - s_pos
    assert loss > 0
    gW = np.zeros((2, 2))
    gb = np.zeros(2)
    for w, up in (("q", du_a - du_p), ("p", -dp), ("a", da)):
        pre = up * (1 - enc[w] ** 2)
        gW += np.outer(pre, table[w])
        gb += pre
    W1 = W0 - lr * gW / (np.sqrt(gW**2) + eps)
    b1 = b0 - lr * gb / (np.sqrt(gb**2) + eps)

    stats = train_epoch(m, pairs, vocab, TrainerConfig(margin=delta, negatives_per_positive=1, batch_size=1,
                                                       learning_rate=lr, dropout_p=0.0, epsilon=eps))
    assert stats.mean_loss == pytest.approx(loss, abs=1e-12)
    np.testing.assert_allclose(p.W_levels.values[0], W1, atol=1e-9)
    np.testing.assert_allclose(p.b.values, b1, atol=1e-9)


def test_train_epoch_drops_unrepresentable_pairs():
    table, pairs, vocab = _tiny_setup()
    m = Model.create(EncoderConfig("GRU", 2, 3), table)
    data = pairs + [TrainingPair("nothere", frozenset(["p"])), TrainingPair("q", frozenset(["gone"]))]
    stats = train_epoch(m, data, vocab, TrainerConfig(negatives_per_positive=2))
    assert stats.pairs_used == 1 and stats.pairs_dropped == 2


def test_train_epoch_empty_data():
    table, _, vocab = _tiny_setup()
    with pytest.raises(ValueError):
        train_epoch(Model.create(EncoderConfig("GRU", 2, 3), table), [], vocab, TrainerConfig())


def test_training_pair_validation():
    with pytest.raises(ValueError):
        TrainingPair("a", frozenset())
    with pytest.raises(ValueError):
        TrainingPair("a", frozenset(["a"]))


@pytest.mark.parametrize("kind", ["GRU", "LSTM", "CNN", "RCNN"])
def test_loss_mostly_non_increasing_without_dropout(kind):
    # negatives are resampled each epoch, so tiny models wobble once the loss nears zero
    ok = 0
    for seed in range(5):
        data = toy_taxonomy(seed)
        m = Model.create(EncoderConfig(kind, 10, 200, cnn_filter_widths=(2,)), data.table, seed=seed)
        cfg = TrainerConfig(dropout_p=0.0, seed=seed)
        losses = [train_epoch(m, data.pairs, data.vocab, cfg).mean_loss for _ in range(5)]
        ok += all(b <= a for a, b in zip(losses, losses[1:]))
    assert ok >= 4


def test_training_is_deterministic():
    data = toy_taxonomy(1)
    runs = []
    for _ in range(2):
        m = Model.create(EncoderConfig("GRU", 10, 8), data.table, seed=3)
        for _ in range(2):
            train_epoch(m, data.pairs, data.vocab, TrainerConfig(seed=3))
        runs.append([t.values.copy() for t in m.tensors()])
    assert all(np.array_equal(a, b) for a, b in zip(*runs))


def test_trained_model_puts_gold_first():
    data = toy_taxonomy(2)
    m = Model.create(EncoderConfig("GRU", 10, 16), data.table, seed=2)
    fit(m, data.pairs, [], data.vocab, TrainerConfig(epochs=5, seed=2))
    results = predict(m, [p.term for p in data.pairs], data.vocab, topk=1)
    hits = sum(r.candidates[0] in p.gold_hypernyms for r, p in zip(results, data.pairs))
    assert hits >= 0.9 * len(data.pairs)


def test_fit_restores_best_snapshot():
    data = toy_taxonomy(0)
    m = Model.create(EncoderConfig("RCNN", 10, 8), data.table, seed=0)
    train, val = split_pairs(data.pairs, 0)
    logs = []
    res = fit(m, train, val, data.vocab, TrainerConfig(epochs=3), log=logs.append)
    assert len(res.history) == 4 and len(logs) == 4
    assert logs[0].startswith("epoch 0 loss nan val_mrr")
    assert res.best_mrr == max(h[2] for h in res.history)
    assert validation_mrr(m, val, data.vocab) == res.best_mrr


def test_split_pairs():
    pairs = [TrainingPair(f"t{i}", frozenset(["h"])) for i in range(20)]
    train, val = split_pairs(pairs, 5)
    assert len(val) == 2 and len(train) == 18
    assert sorted(p.term for p in train + val) == sorted(p.term for p in pairs)
    assert split_pairs(pairs, 5) == (train, val)
    assert split_pairs(pairs[:2], 0)[1] and split_pairs(pairs[:1], 0) == (pairs[:1], [])


# -- ranking --

def test_rank_tea_order():
    m = tea_model({"q": [1, 0], "x": [1, 0], "y": [1, 1], "z": [0, 1]})
    r = rank_candidates(m, "q", ["z", "y", "x"])
    assert r.candidates == ["x", "y", "z"]
    assert [round(s, 4) for _, s in r.items] == [1.0, 0.7071, 0.0]


def test_rank_length_one_vocab_and_topk():
    m = tea_model({"q": [1, 0], "x": [0.5, 0.5], "y": [0, 1]})
    assert rank_candidates(m, "q", ["x"]).candidates == ["x"]
    assert rank_candidates(m, "q", ["x", "y"], topk=1).candidates == ["x"]
    with pytest.raises(ValueError):
        rank_candidates(m, "q", ["x"], topk=0)


def test_rank_scale_invariance():
    base = {"q": [1.0, 0.3], "x": [0.2, 1.0], "y": [1.0, -1.0], "z": [0.7, 0.7]}
    scaled = {k: [3 * v for v in vals] for k, vals in base.items()}
    vocab = ["x", "y", "z"]
    assert rank_candidates(tea_model(base), "q", vocab).candidates == \
        rank_candidates(tea_model(scaled), "q", vocab).candidates


def test_rank_excludes_query_and_breaks_ties_by_name():
    m = tea_model({"q": [1, 0], "b": [2, 0], "a": [1, 0]})
    assert rank_candidates(m, "Q", ["q", "b", "a"]).candidates == ["a", "b"]


def test_rank_unrepresentable_and_skipped():
    m = tea_model({"q": [1, 0], "x": [0, 1]})
    with pytest.raises(UnrepresentableTermError):
        rank_candidates(m, "nope", ["x"])
    index = CandidateIndex(m, ["x", "gone", "x"])
    assert index.names == ["x"] and index.skipped == ["gone"]


def test_predict_and_write():
    import io

    m = tea_model({"q": [1, 0], "x": [0, 1], "y": [1, 1]})
    results = predict(m, ["q", "nope"], ["x", "y"])
    assert results[1] is None
    buf = io.StringIO()
    write_predictions(results, buf)
    assert buf.getvalue() == "y\tx\n\n"
