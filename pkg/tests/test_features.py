import numpy as np
import pytest

from conftest import make_sc
from noma_rrm import features
from noma_rrm.errors import CapacityError
from noma_rrm.netmodel import DESK_SCALE, REFERENCE, generate_scenario
from noma_rrm.pipeline import classical_pipeline


def test_slots_follow_user_cap():
    assert features.n_slots(DESK_SCALE) == 9        # ceil(6 * 1.5), below 2 * 6
    assert features.n_slots(REFERENCE) == 23
    assert features.n_slots(DESK_SCALE.replace(k_cap=40)) == 12
    assert features.feature_dim(9, 6) == 63


def test_encoding_layout():
    sc = make_sc([[[10.0, 100.0], [1.0, 1.0], [1.0, 1000.0]]], p_max=1.0, noise=1.0)
    x = np.array([[1, 0, 1]])
    f = features.encode_scenario(sc, x, 3).reshape(3, 3)
    assert np.allclose(f[0], [10.0, 20.0, 1.0])
    assert np.allclose(f[1], [0.0, 30.0, 1.0])
    assert np.all(f[2] == 0)


def test_encoding_overflow():
    sc = make_sc(np.ones((1, 3, 2)))
    with pytest.raises(CapacityError):
        features.encode_scenario(sc, np.ones((1, 3), dtype=int), 2)


def test_labels_round_trip_through_decoders():
    r = classical_pipeline(generate_scenario(DESK_SCALE, 3))
    slots = features.n_slots(DESK_SCALE)
    sub = features.subchannel_labels(r.sc, r.x, r.s, slots)
    assert np.array_equal(features.decode_subchannel_scores(r.sc, r.x, sub, slots), r.s)
    pw = features.power_labels(r.sc, r.x, r.p, slots)
    assert np.allclose(features.decode_power(r.sc, r.x, r.s, pw, slots), r.p, rtol=1e-12)
    assert np.all(pw >= 0) and np.all(pw.sum(axis=1) <= 1 + 1e-9)


def test_standardize_stats():
    f = np.array([[1.0, 5.0], [3.0, 5.0]])
    mean, std = features.standardize_stats(f)
    assert mean.tolist() == [2.0, 5.0] and std.tolist() == [1.0, 1.0]
