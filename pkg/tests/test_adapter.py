import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cale.adapter import (
    AdapterParams,
    TrainConfig,
    adapt,
    adapt_rows,
    batch_gradient,
    gradient_check,
    identity_init,
    pair_loss,
    parse_train_config,
    read_adapter,
    train,
    write_adapter,
    _lr_at,
)
from cale.embeddings import EmbeddingMatrix, cosine_similarity
from cale.errors import CaleError, ConfigError, FormatError
from cale.pairs import ConceptRel, LemmaRel, PairRecord, Split


def make_pairs_and_embeddings(rng, n=40, d=6):
    ids = [f"o{i}" for i in range(n)]
    rows = rng.normal(size=(n, d)).astype(np.float32)
    emb = EmbeddingMatrix(ids=ids, rows=rows)
    pairs = []
    for i in range(n):
        j = (i * 7 + 3) % n
        if i == j:
            continue
        label = i % 2
        pairs.append(
            PairRecord(f"o{i}", f"o{j}", LemmaRel.SL if i % 3 else LemmaRel.DL,
                       ConceptRel.SC if label else ConceptRel.DC, label, Split.TRAIN)
        )
    return pairs, emb


def test_adapt_identity_and_scaling():
    e = np.array([3.0, -1.0, 2.0])
    ident = identity_init(3, 3)
    np.testing.assert_allclose(adapt(e, ident), e)
    doubled = AdapterParams(weight=2.0 * np.eye(3))
    u = np.array([1.0, 2.0, 0.5])
    assert cosine_similarity(adapt(e, doubled), adapt(u, doubled)) == pytest.approx(
        cosine_similarity(e, u), abs=1e-12
    )


def test_adapt_swap_matrix():
    p = AdapterParams(weight=np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(adapt(np.array([3.0, 4.0]), p), [4.0, 3.0])


def test_adapt_dimension_mismatch():
    p = AdapterParams(weight=np.eye(3))
    with pytest.raises(ValueError):
        adapt(np.ones(4), p)
    with pytest.raises(ValueError):
        adapt_rows(np.ones((2, 4)), p)


def test_adapt_identity_padded_rectangular():
    p = identity_init(d_in=2, d_out=4)
    np.testing.assert_allclose(adapt(np.array([5.0, 7.0]), p), [5.0, 7.0, 0.0, 0.0])


def test_adapt_with_bias():
    p = AdapterParams(weight=np.eye(2), bias=np.array([1.0, -1.0]))
    np.testing.assert_allclose(adapt(np.array([2.0, 2.0]), p), [3.0, 1.0])


def test_pair_loss_perfect_positive():
    v = np.array([0.5, 1.5])
    assert pair_loss(v, v, 1, 0.7) == 0.0


def test_pair_loss_satisfied_margin():
    u = np.array([1.0, 0.0])
    v = np.array([0.0, 1.0])  # distance 1 >= margin
    assert pair_loss(u, v, 0, 0.7) == 0.0


def test_pair_loss_derived_value():
    u = np.array([1.0, 2.0])
    v = np.array([2.0, 1.0])  # distance 0.2
    assert pair_loss(u, v, 0, 0.7) == pytest.approx(0.125, rel=1e-9)


def test_pair_loss_zero_vector():
    with pytest.raises(ValueError):
        pair_loss(np.zeros(2), np.ones(2), 1, 0.7)


def test_pair_loss_similarity_objective():
    u = np.array([1.0, 2.0])
    v = np.array([2.0, 1.0])  # similarity 0.8
    # literal quadratic-on-similarity reading: y=1 -> 0.5 * s^2
    assert pair_loss(u, v, 1, 0.7, objective="similarity") == pytest.approx(0.5 * 0.8 ** 2, rel=1e-9)


@given(st.integers(min_value=0, max_value=1), st.floats(min_value=0.05, max_value=1.9))
@settings(max_examples=30)
def test_pair_loss_symmetric_and_nonnegative(y, margin):
    rng = np.random.default_rng(y * 1000 + int(margin * 100))
    u = rng.normal(size=5)
    v = rng.normal(size=5)
    a = pair_loss(u, v, y, margin)
    b = pair_loss(v, u, y, margin)
    assert a == pytest.approx(b, rel=1e-12)
    assert a >= 0.0


def test_batch_gradient_flat_region_is_zero():
    # positive pair at distance 0 and negative pair beyond the margin
    p = identity_init(2, 2)
    batch = [
        (np.array([1.0, 0.0]), np.array([2.0, 0.0]), 1),
        (np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0),
    ]
    g_w, g_b, loss = batch_gradient(batch, p, margin=0.7)
    assert loss == 0.0
    assert np.array_equal(g_w, np.zeros((2, 2)))
    assert g_b is None


def test_batch_gradient_matches_finite_differences():
    p = identity_init(2, 2)
    batch = [(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 1)]
    err = gradient_check(p, batch, margin=0.7, step=1e-4)
    assert err < 1e-4


def test_batch_gradient_duplicated_batch_invariance():
    rng = np.random.default_rng(3)
    p = AdapterParams(weight=rng.normal(size=(3, 4)))
    pair = (rng.normal(size=4), rng.normal(size=4), 0)
    g1, _, l1 = batch_gradient([pair], p, margin=0.7)
    g2, _, l2 = batch_gradient([pair, pair], p, margin=0.7)
    np.testing.assert_allclose(g1, g2, rtol=1e-15, atol=0)
    assert l1 == pytest.approx(l2, rel=1e-15)


def test_gradient_check_random_and_step_degradation(rng):
    p = AdapterParams(weight=rng.normal(size=(3, 3)))
    batch = [(rng.normal(size=3), rng.normal(size=3), int(rng.integers(0, 2))) for _ in range(4)]
    small = gradient_check(p, batch, margin=0.7, step=1e-4)
    assert small < 1e-4
    big = gradient_check(p, batch, margin=0.7, step=1e-1)
    assert big > small


def test_gradient_check_zero_region_reports_zero():
    p = identity_init(2, 2)
    batch = [(np.array([1.0, 0.0]), np.array([0.0, 1.0]), 0)]  # hinge satisfied
    assert gradient_check(p, batch, margin=0.7, step=1e-4) == 0.0


def test_hinge_kink_one_sided():
    # cosine distance exactly at the margin: hinge term and gradient both 0
    m = 0.7
    u = np.array([1.0, 0.0])
    v = np.array([1.0 - m, math.sqrt(1.0 - (1.0 - m) ** 2)])
    p = identity_init(2, 2)
    g_w, _, loss = batch_gradient([(u, v, 0)], p, margin=m)
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(g_w, 0.0, atol=1e-12)

    def loss_at(w):
        return pair_loss(w @ u, w @ v, 0, m)

    h = 1e-6
    for i in range(2):
        for j in range(2):
            w_up = np.eye(2)
            w_up[i, j] += h
            w_dn = np.eye(2)
            w_dn[i, j] -= h
            assert abs(loss_at(w_up) - loss_at(np.eye(2))) / h < 1e-3
            assert abs(loss_at(w_dn) - loss_at(np.eye(2))) / h < 1e-3


def test_train_lr_zero_is_noop(rng):
    pairs, emb = make_pairs_and_embeddings(rng)
    cfg = TrainConfig(learning_rate=0.0, batch_size=4, d_out=8)
    params, trace = train(pairs, emb, cfg)
    np.testing.assert_array_equal(params.weight, identity_init(6, 8).weight.astype(np.float32))
    assert len(trace) == math.ceil(len(pairs) / 4)


def test_train_deterministic(rng):
    pairs, emb = make_pairs_and_embeddings(rng)
    cfg = TrainConfig(learning_rate=1e-3, batch_size=1, d_out=8)
    p1, t1 = train(pairs, emb, cfg)
    p2, t2 = train(pairs, emb, cfg)
    assert p1.weight.tobytes() == p2.weight.tobytes()
    assert t1 == t2
    p3, _ = train(pairs, emb, TrainConfig(learning_rate=1e-3, batch_size=1, d_out=8, seed=7))
    assert p1.weight.tobytes() != p3.weight.tobytes()


def test_train_batched_matches_contract(rng):
    pairs, emb = make_pairs_and_embeddings(rng)
    cfg = TrainConfig(learning_rate=1e-3, batch_size=8, d_out=6, epochs=2)
    params, trace = train(pairs, emb, cfg)
    assert len(trace) == 2 * math.ceil(len(pairs) / 8)
    assert np.isfinite(params.weight).all()


def test_train_errors(rng):
    pairs, emb = make_pairs_and_embeddings(rng)
    with pytest.raises(CaleError, match="empty"):
        train([], emb, TrainConfig())
    missing = [PairRecord("nope", "o1", LemmaRel.SL, ConceptRel.SC, 1, Split.TRAIN)]
    with pytest.raises(KeyError, match="nope"):
        train(missing, emb, TrainConfig())


def test_lr_schedule_shape():
    lr = 1.0
    total, warmup = 100, 24
    values = [_lr_at(t, total, warmup, lr) for t in range(total)]
    assert values[0] == pytest.approx(1 / 24)
    assert values[warmup - 1] == pytest.approx(1.0)
    assert values[warmup] == pytest.approx(1.0)
    assert all(values[i] >= values[i + 1] for i in range(warmup, total - 1))
    assert values[-1] == pytest.approx(1 / 76)
    flat = [_lr_at(t, 10, 0, lr) for t in range(10)]
    assert flat[0] == 1.0 and flat[-1] == pytest.approx(0.1)


def test_train_config_defaults_and_validation():
    cfg = TrainConfig()
    assert cfg.margin == 0.7
    assert cfg.learning_rate == 6.02e-6
    assert cfg.warmup_ratio == 0.24
    assert cfg.weight_decay == 0.05
    assert cfg.adam_beta1 == 0.9
    assert cfg.adam_beta2 == 0.999
    assert cfg.adam_epsilon == 1e-8
    assert cfg.epochs == 1
    assert cfg.seed == 42
    assert cfg.d_out == 1024
    with pytest.raises(ValueError):
        TrainConfig(margin=0.0)
    with pytest.raises(ValueError):
        TrainConfig(margin=2.5)
    with pytest.raises(ValueError):
        TrainConfig(warmup_ratio=1.0)
    with pytest.raises(ValueError):
        TrainConfig(objective="other")


def test_parse_train_config(tmp_path):
    path = tmp_path / "cfg.txt"
    path.write_text("margin=0.5\nbatch_size=16\nobjective=similarity\n# comment\n", encoding="utf-8")
    cfg = parse_train_config(path)
    assert cfg.margin == 0.5 and cfg.batch_size == 16 and cfg.objective == "similarity"
    path.write_text("unknown_key=1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_train_config(path)
    path.write_text("margin=abc\n", encoding="utf-8")
    with pytest.raises(ConfigError, match=":1:"):
        parse_train_config(path)


def test_adapter_round_trip(tmp_path, rng):
    for k in range(5):
        d_out, d_in = int(rng.integers(1, 10)), int(rng.integers(1, 10))
        weight = rng.normal(size=(d_out, d_in)).astype(np.float32)
        bias = rng.normal(size=d_out).astype(np.float32) if k % 2 else None
        p = AdapterParams(weight=weight, bias=bias)
        path = tmp_path / f"a{k}.adp"
        write_adapter(p, path)
        back = read_adapter(path)
        assert back.weight.tobytes() == weight.tobytes()
        if bias is None:
            assert back.bias is None
        else:
            assert back.bias.tobytes() == bias.tobytes()


def test_adapter_format_errors(tmp_path):
    path = tmp_path / "a.adp"
    path.write_bytes(b"WRONGMAG" + b"\x00" * 16)
    with pytest.raises(FormatError, match="magic"):
        read_adapter(path)
    p = AdapterParams(weight=np.ones((2, 2), dtype=np.float32))
    write_adapter(p, path)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError, match="bytes"):
        read_adapter(path)
