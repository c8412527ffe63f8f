import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_sc, random_sc
from noma_rrm.errors import CapacityError
from noma_rrm.matching import (WEAK_SHARE, interim_power, project_to_feasible,
                               subchannel_utility, two_side_matching)
from noma_rrm.netmodel import (capacity_tensor, check_constraints,
                               energy_efficiency)


def alloc_tensor(M, N, assign):
    s = np.zeros((1, M, N), dtype=int)
    s[0, np.arange(M), assign] = 1
    return s


def system_ee(sc, assign):
    """EE through the netmodel metrics, with the interim power rule."""
    x = np.ones((1, sc.n_users), dtype=int)
    s = alloc_tensor(sc.n_users, sc.n_subchannels, assign)
    return energy_efficiency(sc, x, s, interim_power(sc, x, s))


def one_swap_neighbours(assign, N):
    assign = tuple(assign)
    out = set()
    for i in range(len(assign)):
        for k in range(N):
            cand = list(assign)
            cand[i] = k
            out.add(tuple(cand))
        for j in range(len(assign)):
            cand = list(assign)
            cand[i], cand[j] = cand[j], cand[i]
            out.add(tuple(cand))
    out.discard(assign)
    return [c for c in out if max(np.bincount(c, minlength=N)) <= 2]


def test_one_user_one_subchannel():
    sc = make_sc([[[1.0]]])
    assert two_side_matching(sc, np.array([[1]])).tolist() == [[[1]]]


def test_two_users_one_subchannel():
    sc = make_sc([[[1.0], [2.0]]])
    s = two_side_matching(sc, np.array([[1, 1]]))
    assert s.sum() == 2 and s[0, :, 0].tolist() == [1, 1]


def test_capacity_error():
    sc = make_sc(np.ones((1, 3, 1)))
    with pytest.raises(CapacityError):
        two_side_matching(sc, np.ones((1, 3), dtype=int))
    with pytest.raises(CapacityError):
        project_to_feasible(sc, np.ones((1, 3), dtype=int), np.ones((1, 3, 1)))


def test_four_users_two_subchannels_locally_stable():
    rng = np.random.default_rng(3)
    sc = make_sc(rng.uniform(0.1, 5.0, size=(1, 4, 2)), noise=0.5, p_circuit=0.2)
    s = two_side_matching(sc, np.ones((1, 4), dtype=int))
    assign = s[0].argmax(axis=1)
    ee = system_ee(sc, assign)
    for cand in one_swap_neighbours(assign, 2):
        assert ee >= system_ee(sc, cand) * (1 - 1e-12)


def test_utility_examples():
    sc = make_sc([[[1.0]]], noise=1.0, bandwidth=1.2e9)
    x = np.array([[1]])
    p = np.array([[1.0]])
    assert subchannel_utility(sc, x, p, 0, 0, []) == 0.0
    assert subchannel_utility(sc, x, p, 0, 0, [0], circuit_share=0.0) == pytest.approx(1.2e9)


@given(seed=st.integers(0, 10_000), P=st.floats(0.1, 3.0), c=st.floats(0.0, 1.0))
def test_pair_utility_matches_netmodel(seed, P, c):
    rng = np.random.default_rng(seed)
    sc = make_sc(rng.uniform(0.1, 5.0, size=(1, 3, 2)), noise=0.3)
    x = np.ones((1, 3), dtype=int)
    pair = [0, 2]
    s = np.zeros((1, 3, 2), dtype=int)
    s[0, pair, 1] = 1
    g = sc.gains[0, pair, 1]
    weak = pair[int(np.argmin(g))] if g[0] != g[1] else pair[0]
    p = np.zeros((1, 3, 2))
    for u in pair:
        p[0, u, 1] = P * (WEAK_SHARE if u == weak else 1 - WEAK_SHARE)
    rate = capacity_tensor(sc, x, s, p)[0, :, 1].sum()
    p_sub = np.full((1, 2), P)
    assert subchannel_utility(sc, x, p_sub, 0, 1, pair, circuit_share=c) == pytest.approx(rate / (P + c), rel=1e-12)


@given(seed=st.integers(0, 10_000), B=st.integers(1, 3), M=st.integers(1, 8), N=st.integers(1, 4))
def test_matching_feasible_and_complete(seed, B, M, N):
    rng = np.random.default_rng(seed)
    sc = random_sc(rng, B, M, N)
    x = np.zeros((B, M), dtype=int)
    load = np.zeros(B, dtype=int)
    for m in range(M):
        b = int(rng.choice([k for k in range(B) if load[k] < 2 * N] or [0]))
        x[b, m] = 1
        load[b] += 1
    if np.any(load > 2 * N):
        with pytest.raises(CapacityError):
            two_side_matching(sc, x)
        return
    s = two_side_matching(sc, x)
    a = s * x[:, :, None]
    assert np.array_equal(a, s)
    assert np.all(s.sum(axis=(0, 2)) == 1)
    assert np.all(s.sum(axis=1) <= 2)


def test_project_feasible_binary_unchanged():
    rng = np.random.default_rng(1)
    sc = random_sc(rng, 2, 5, 3)
    x = np.array([[1, 1, 0, 1, 0], [0, 0, 1, 0, 1]])
    s = two_side_matching(sc, x)
    out = project_to_feasible(sc, x, s.astype(float))
    assert np.array_equal(out, s)
    assert np.array_equal(project_to_feasible(sc, x, out.astype(float)), out)


def test_project_ties_lexicographic():
    sc = make_sc(np.ones((1, 3, 2)))
    x = np.ones((1, 3), dtype=int)
    out = project_to_feasible(sc, x, np.zeros((1, 3, 2)))
    # (0,0,0) then user 1 on n=0, user 2 finds n=0 full and takes n=1
    assert out[0].tolist() == [[1, 0], [1, 0], [0, 1]]


@given(seed=st.integers(0, 10_000))
def test_project_random_scores_feasible(seed):
    rng = np.random.default_rng(seed)
    sc = random_sc(rng, 2, 6, 3)
    x = np.zeros((2, 6), dtype=int)
    x[rng.integers(0, 2, size=6), np.arange(6)] = 1
    out = project_to_feasible(sc, x, rng.normal(size=(2, 6, 3)))
    rep = check_constraints(sc, x, out, out * 0.01)
    assert rep.c1.passed and rep.c2.passed
    assert np.all(out.sum(axis=(0, 2)) == 1)
    assert np.array_equal(out * x[:, :, None], out)


def test_interim_power_split():
    sc = make_sc([[[1.0, 1.0], [2.0, 1.0], [1.0, 1.0]]], p_max=1.2)
    x = np.ones((1, 3), dtype=int)
    s = alloc_tensor(3, 2, [0, 0, 1])
    p = interim_power(sc, x, s)
    assert p[0, 0, 0] == pytest.approx(0.6 * WEAK_SHARE)
    assert p[0, 1, 0] == pytest.approx(0.6 * (1 - WEAK_SHARE))
    assert p[0, 2, 1] == pytest.approx(0.6)
    assert p.sum() == pytest.approx(1.2)


@pytest.mark.parametrize("M,N", [(3, 2), (5, 3)])
def test_exhaustive_small_instances_locally_stable(M, N):
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        sc = make_sc(rng.uniform(0.05, 8.0, size=(1, M, N)), noise=0.3, p_circuit=0.5)
        assign = two_side_matching(sc, np.ones((1, M), dtype=int))[0].argmax(axis=1)
        ee = system_ee(sc, assign)
        feasible = [a for a in itertools.product(range(N), repeat=M) if max(np.bincount(a, minlength=N)) <= 2]
        local_optima = [a for a in feasible
                        if all(system_ee(sc, a) >= system_ee(sc, c) * (1 - 1e-12)
                               for c in one_swap_neighbours(a, N))]
        assert any(math.isclose(ee, system_ee(sc, a), rel_tol=1e-12) for a in local_optima)
        assert ee >= min(system_ee(sc, a) for a in local_optima) * (1 - 1e-12)
