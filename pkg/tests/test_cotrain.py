import numpy as np
import pytest

from noma_rrm import features
from noma_rrm.cotrain import (CoTrainConfig, Ensemble, confidence_delta,
                              cotrain, cotrain_round, init_state, predict,
                              predict_subchannels, write_log_csv)
from noma_rrm.errors import ConfigError
from noma_rrm.netmodel import DESK_SCALE, check_constraints, generate_scenario
from noma_rrm.neural import (Architecture, TrainConfig, build_mlp, forward,
                             train)
from noma_rrm.pipeline import datasets_from_oracles, run_oracles

TINY1 = Architecture((16,), 0.8, TrainConfig(0.01, 8, 3, "rmsprop"))
TINY2 = Architecture((8, 8), 1.0, TrainConfig(0.05, 16, 3, "rmsprop"))
FROZEN = Architecture((8,), 1.0, TrainConfig(0.0, 16, 1, "rmsprop"))


def toy(seed=0, n=30, d=4, k=2):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = np.column_stack([x[:, 0] - x[:, 1], 0.5 * x[:, 2]])[:, :k]
    return x, y, rng.normal(size=(12, d))


def test_delta_zero_for_identical_copy():
    x, y, u = toy()
    m = build_mlp(4, (8,), 2, seed=0)
    assert confidence_delta(m, x, y, u[0], TrainConfig(0.0, 8, 5, "rmsprop"), epochs=5) == 0.0


def test_delta_positive_when_fine_tune_helps():
    x, y, u = toy()
    m = build_mlp(4, (), 2, seed=0)
    m.layers[0].bias[:] = 5.0       # far off: any fine-tune step lowers every error
    d = confidence_delta(m, x, y, u[0], TrainConfig(0.01, 8, 5, "adam"), epochs=5)
    assert d > 0


def test_delta_empty_labeled_set():
    m = build_mlp(4, (8,), 2)
    with pytest.raises(ConfigError):
        confidence_delta(m, np.zeros((0, 4)), np.zeros((0, 2)), np.zeros(4), TrainConfig())


def test_delta_argmax_matches_recomputation():
    x, y, u = toy(1)
    m, _ = train(build_mlp(4, (12,), 2, seed=2), x, y, TrainConfig(0.01, 8, 3, "rmsprop", 0))
    cfg = TrainConfig(0.01, 8, 5, "rmsprop", 0)
    got = [confidence_delta(m, x, y, u[i], cfg, epochs=5, seed=3) for i in (0, 1)]
    expect = []
    for i in (0, 1):
        pseudo = forward(m, u[i][None, :])
        copy, _ = train(m, np.vstack([x, u[i]]), np.vstack([y, pseudo]),
                        TrainConfig(0.01, 8, 5, "rmsprop", 3))
        before = np.sum((y - forward(m, x)) ** 2)
        after = np.sum((y - forward(copy, x)) ** 2)
        expect.append(before - after)
    assert np.allclose(got, expect, rtol=1e-12)
    assert int(np.argmax(got)) == int(np.argmax(expect))


def test_stall_round_only_advances_iter():
    x, y, u = toy()
    state = init_state(x, y, u, CoTrainConfig(pool_size=4, arch1=FROZEN, arch2=FROZEN))
    snap = (state.l1_x.copy(), state.l2_x.copy(), list(state.pool), list(state.reservoir))
    cotrain_round(state)
    assert state.iter == 1
    assert np.array_equal(state.l1_x, snap[0]) and np.array_equal(state.l2_x, snap[1])
    assert state.pool == snap[2] and state.reservoir == snap[3]
    assert state.placed == []


def test_one_sided_placement():
    x, y, u = toy(2)
    state = init_state(x, y, u, CoTrainConfig(pool_size=4, arch1=TINY1, arch2=FROZEN, initial_epochs=1, seed=1))
    before = [m.copy() for m in state.models]
    n1, n2 = len(state.l1_x), len(state.l2_x)
    cotrain_round(state)
    assert [k for _, k, _ in state.placed] == [1]
    assert len(state.l1_x) == n1 and len(state.l2_x) == n2 + 1
    assert not np.array_equal(before[0].layers[0].weight, state.models[0].layers[0].weight)


def test_pool_bookkeeping_conserved():
    x, y, u = toy(3)
    cfg = CoTrainConfig(pool_size=3, t_max=4, arch1=TINY1, arch2=TINY2, initial_epochs=1, seed=2)
    state = init_state(x, y, u, cfg)
    total = len(state.pool) + len(state.reservoir)
    sizes = [(len(state.l1_x), len(state.l2_x))]
    for _ in range(4):
        cotrain_round(state, x[:5], y[:5])
        assert len(state.pool) <= cfg.pool_size
        assert len(state.pool) + len(state.placed) + len(state.reservoir) == total
        sizes.append((len(state.l1_x), len(state.l2_x)))
    assert all(a[0] <= b[0] and a[1] <= b[1] for a, b in zip(sizes, sizes[1:]))
    idx = [i for _, _, i in state.placed]
    assert len(idx) == len(set(idx))


def test_no_unlabeled_reduces_to_supervised(tmp_path):
    x, y, u = toy(4)
    cfg = CoTrainConfig(pool_size=3, arch1=TINY1, arch2=TINY2, seed=5)
    ref = init_state(x, y, np.zeros((0, 4)), cfg)
    out = []
    ens = cotrain(x, y, np.zeros((0, 4)), cfg, state_out=out)
    capped = cotrain(x, y, u, CoTrainConfig(pool_size=3, t_max=0, arch1=TINY1, arch2=TINY2, seed=5))
    expect = (forward(ref.models[0], x) + forward(ref.models[1], x)) / 2
    assert np.array_equal(ens.predict(x), expect)
    assert np.array_equal(capped.predict(x), expect)
    write_log_csv(out[0], tmp_path / "log.csv")
    assert (tmp_path / "log.csv").read_text().startswith("round,l1_size,l2_size")


def test_ensemble_is_componentwise_mean():
    a, b = build_mlp(4, (5,), 3, seed=1), build_mlp(4, (5,), 3, seed=2)
    x = np.random.default_rng(0).normal(size=(6, 4))
    assert np.array_equal(Ensemble([a, b]).predict(x), (forward(a, x) + forward(b, x)) / 2)
    assert np.array_equal(predict(a, x), forward(a, x))


def test_predictions_always_feasible():
    slots = features.n_slots(DESK_SCALE)
    dim = features.feature_dim(slots, DESK_SCALE.n_subchannels)
    a = build_mlp(dim, (32,), slots * DESK_SCALE.n_subchannels, seed=0)
    ens = Ensemble([a, build_mlp(dim, (16, 16), slots * DESK_SCALE.n_subchannels, seed=1)])
    twins = Ensemble([a, a.copy()])
    rng = np.random.default_rng(0)
    for i in range(100):
        sc = generate_scenario(DESK_SCALE, 1000 + i)
        x = np.zeros((sc.n_bs, sc.n_users), dtype=int)
        x[rng.integers(0, sc.n_bs, size=sc.n_users), np.arange(sc.n_users)] = 1
        if np.any(x.sum(axis=1) > slots):
            continue
        s = predict_subchannels(ens, sc, x, slots)
        rep = check_constraints(sc, x, s, s * 1e-3)
        assert rep.c1.passed and rep.c2.passed
        assert np.all(s.sum(axis=(0, 2)) == 1)
        if i < 10:
            assert np.array_equal(predict_subchannels(twins, sc, x, slots), predict_subchannels(a, sc, x, slots))


def test_overfit_recovers_matching_allocations():
    results = run_oracles(DESK_SCALE, 10, seed=77)
    sub, _ = datasets_from_oracles(DESK_SCALE, results)
    m = build_mlp(sub.feature_dim, (256,), sub.labels.shape[1], seed=0)
    m.set_normalization(sub.mean, sub.std)
    m, hist = train(m, sub.features, sub.labels, TrainConfig(0.003, 8, 600, "adam", 0))
    assert hist[-1] < 1e-3
    for r in results:
        assert np.array_equal(predict_subchannels(m, r.sc, r.x, sub.slots), r.s)
