import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import make_sc, random_alloc, random_sc
from noma_rrm import assoc
from noma_rrm.assoc import (AssocSolverConfig, AssocTrace, DualMultipliers,
                            associate, association_score, association_scores,
                            enforce_caps, max_sinr_association,
                            solve_user_association, update_multipliers)
from noma_rrm.errors import InfeasibleAssociationError
from noma_rrm.matching import two_side_matching
from noma_rrm.netmodel import REFERENCE, generate_scenario, total_power
from noma_rrm.powerctl import equal_power


def two_bs_one_user(g0=2.0, g1=0.5):
    sc = make_sc([[[g0]], [[g1]]], p_max=1.0, p_circuit=0.5, noise=0.25, bandwidth=1e6, i_cap=10.0)
    x = np.array([[1], [0]])
    s = np.zeros((2, 1, 1), dtype=int)
    s[0, 0, 0] = 1
    p = s * 0.6
    return sc, x, s, p


def test_zero_multipliers_reduce_to_first_term():
    sc, x, s, p = two_bs_one_user()
    d = DualMultipliers.zeros(2, 1)
    total = total_power(sc, x, s, p)
    # BS 0: real link, SINR = 0.6*2/0.25
    expect0 = math.log(1e6 * math.log2(1 + 0.6 * 2.0 / 0.25)) / total
    # BS 1: hypothetical join with p_max/(0+1) = 1 W; the only co-channel power is
    # the user's own current link, which disappears when it moves
    expect1 = math.log(1e6 * math.log2(1 + 1.0 * 0.5 / 0.25)) / total
    assert association_score(sc, s, p, d, 0, 0) == pytest.approx(expect0, rel=1e-12)
    assert association_score(sc, s, p, d, 1, 0) == pytest.approx(expect1, rel=1e-12)


def test_lambda_term_by_hand():
    sc, x, s, p = two_bs_one_user()
    d = DualMultipliers.zeros(2, 1)
    base = association_scores(sc, s, p, d)
    d.lam[:] = [3.0, 2.0]
    j = association_scores(sc, s, p, d)
    assert j[0, 0] == pytest.approx(base[0, 0] - 3.0 * 0.6, rel=1e-12)
    assert j[1, 0] == pytest.approx(base[1, 0] - 2.0 * 1.0, rel=1e-12)


def test_mu_nu_tau_terms():
    sc, x, s, p = two_bs_one_user()
    sc = make_sc(sc.gains, p_max=1.0, p_circuit=0.5, noise=0.25, bandwidth=1e6, i_cap=10.0, qos=1e5)
    terms = assoc.score_terms(sc, s, p)
    d = DualMultipliers(np.array([0.5, 0.0]), np.zeros(2), np.array([2.0]), np.array([0.0, 4.0]))
    j = association_scores(sc, s, p, d, terms)
    base = association_scores(sc, s, p, DualMultipliers.zeros(2, 1), terms)
    assert j[0, 0] == pytest.approx(base[0, 0] - 0.5 + 2.0 * terms["rate"][0, 0] / 1e5, rel=1e-12)
    assert j[1, 0] == pytest.approx(
        base[1, 0] + 2.0 * terms["rate"][1, 0] / 1e5 - 4.0 * 1 * terms["gain_power"][1, 0] / 10.0, rel=1e-12)


def test_zero_rate_gives_sentinel():
    sc, x, s, p = two_bs_one_user()
    j = association_scores(sc, s, 0 * p, DualMultipliers.zeros(2, 1))
    assert j[0, 0] == -np.inf
    assert np.isfinite(j[1, 0])
    assert associate(j)[1, 0] == 1


def test_associate_examples():
    x = associate(np.array([[3.0], [1.0], [2.0]]))
    assert x[:, 0].tolist() == [1, 0, 0]
    assert associate(np.zeros((3, 1)))[:, 0].tolist() == [1, 0, 0]
    with pytest.raises(InfeasibleAssociationError):
        associate(np.array([[-np.inf], [-np.inf]]))


@given(seed=st.integers(0, 10_000), a=st.floats(0.01, 100.0), c=st.floats(-50, 50))
def test_associate_affine_invariance(seed, a, c):
    scores = np.random.default_rng(seed).normal(size=(4, 7))
    x = associate(scores)
    assert np.array_equal(x, associate(a * scores + c))
    assert np.all(x.sum(axis=0) == 1)


def test_update_multiplier_rules():
    sc, x, s, p = two_bs_one_user()
    d = DualMultipliers.zeros(2, 1)
    d.lam[:] = [0.0, 0.7]
    # no violation: lam stays projected at 0 for BS 0; BS 1 has positive slack (1 W unused) -> drops
    new = update_multipliers(d, sc, x, s, p, 1.0)
    assert new.lam[0] == 0.0
    assert new.lam[1] == pytest.approx(0.0)
    # violation by 0.1 W at BS 0 with step 1
    over = s * 1.1
    new = update_multipliers(DualMultipliers.zeros(2, 1), sc, x, s, over, 1.0)
    assert new.lam[0] == pytest.approx(0.1)
    # tight budget -> unchanged
    d2 = DualMultipliers.zeros(2, 1)
    d2.lam[0] = 0.3
    tight = update_multipliers(d2, sc, x, s, s * 1.0, 1.0)
    assert tight.lam[0] == pytest.approx(0.3)


@given(seed=st.integers(0, 10_000), step=st.floats(0.0, 10.0))
def test_multipliers_stay_nonnegative(seed, step):
    rng = np.random.default_rng(seed)
    sc = random_sc(rng, 3, 5, 2, qos=1e8, i_cap=0.5)
    x, s, p = random_alloc(rng, 3, 5, 2)
    d = DualMultipliers(*(rng.uniform(0, 1, size=n) for n in (3, 3, 5, 3)))
    new = update_multipliers(d, sc, x, s, p, step)
    assert np.all(new.as_vector() >= 0)


def test_single_bs_all_users_join():
    rng = np.random.default_rng(0)
    sc = random_sc(rng, 1, 4, 2)
    x0 = np.ones((1, 4), dtype=int)
    s = two_side_matching(sc, x0)
    x, d, trace = solve_user_association(sc, s, equal_power(sc, x0, s), AssocSolverConfig(max_iters=1))
    assert np.all(x == 1)
    assert len(trace) == 1
    assert np.all(max_sinr_association(sc) == 1)


def test_max_iters_cap_and_trace_csv(tmp_path):
    sc = generate_scenario(REFERENCE, 7)
    x0 = enforce_caps(assoc.reference_sinr(sc), max_sinr_association(sc), assoc.user_caps(sc))
    s0 = two_side_matching(sc, x0)
    _, _, trace = solve_user_association(sc, s0, equal_power(sc, x0, s0), AssocSolverConfig(max_iters=3))
    assert len(trace) == 3
    trace.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "iteration,dual_norm,macro_load,ee_bits_per_joule"
    assert len(lines) == 4


def test_reference_scenario_load_balancing():
    sc = generate_scenario(REFERENCE, 7)
    x_ms = max_sinr_association(sc)
    assert x_ms[sc.macro_index].sum() > sc.n_users / 2
    x0 = enforce_caps(assoc.reference_sinr(sc), x_ms, assoc.user_caps(sc))
    s0 = two_side_matching(sc, x0)
    x, duals, _ = solve_user_association(sc, s0, equal_power(sc, x0, s0))
    assert np.all(x.sum(axis=0) == 1)
    assert x[sc.macro_index].sum() < x_ms[sc.macro_index].sum()
    assert np.all(x.sum(axis=1) <= assoc.user_caps(sc))
    assert np.all(duals.as_vector() >= 0)


def test_macro_user_near_macro():
    # user at the macro, far from the small cell
    sc = make_sc([[[10.0]], [[0.01]]])
    assert max_sinr_association(sc)[:, 0].tolist() == [1, 0]


def test_enforce_caps_moves_cheapest():
    scores = np.array([[5.0, 4.0, 1.0], [1.0, 3.9, 0.0]])
    x = associate(scores)
    out = enforce_caps(scores, x, np.array([2, 2]))
    assert out[:, 1].tolist() == [0, 1]
    with pytest.raises(InfeasibleAssociationError):
        enforce_caps(scores, x, np.array([1, 1]))


def test_trace_helper():
    t = AssocTrace()
    t.append(1, DualMultipliers(np.array([3.0]), np.array([4.0]), np.zeros(1), np.zeros(1)), 2, 1.5)
    assert t.rows == [(1, 5.0, 2, 1.5)]
