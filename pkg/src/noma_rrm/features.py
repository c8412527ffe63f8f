"""Per-BS encoding of scenarios for the learned allocators.

One sample per BS. The BS's users (ascending index) fill ``slots`` rows; each
row holds the full-power SNR in dB on every subchannel plus a presence flag.
Empty rows are zero. Subchannel labels are the binary rows of S, power labels
the fraction of p_max given to each user.
"""
from __future__ import annotations

import numpy as np

from .errors import CapacityError
from .netmodel import Scenario


def n_slots(sc_or_cfg):
    """User slots per BS sample: the per-BS user cap (never more than two per subchannel)."""
    if hasattr(sc_or_cfg, "default_k_cap"):
        k = sc_or_cfg.default_k_cap()
    else:
        k = int(np.max(sc_or_cfg.k_cap))
    return int(min(k, 2 * sc_or_cfg.n_subchannels))


def feature_dim(slots, n_sub):
    return slots * (n_sub + 1)


def bs_users(x, b):
    return np.nonzero(np.asarray(x)[b])[0]


def _check(users, slots, b):
    if len(users) > slots:
        raise CapacityError(f"BS {b} has {len(users)} users, encoding holds {slots}")


def encode_bs(sc: Scenario, x, b, slots):
    users = bs_users(x, b)
    _check(users, slots, b)
    N = sc.n_subchannels
    out = np.zeros((slots, N + 1))
    snr = sc.stations[b].p_max * sc.gains[b, users] / sc.noise_power
    out[:len(users), :N] = 10.0 * np.log10(snr)
    out[:len(users), N] = 1.0
    return out.ravel()


def encode_scenario(sc: Scenario, x, slots):
    """Feature matrix ``[B, slots*(N+1)]``."""
    return np.stack([encode_bs(sc, x, b, slots) for b in range(sc.n_bs)])


def subchannel_labels(sc: Scenario, x, s, slots):
    """Binary label rows ``[B, slots*N]``: row i is the allocation of the i-th user of the BS."""
    N = sc.n_subchannels
    out = np.zeros((sc.n_bs, slots, N))
    for b in range(sc.n_bs):
        users = bs_users(x, b)
        _check(users, slots, b)
        out[b, :len(users)] = np.asarray(s)[b, users]
    return out.reshape(sc.n_bs, slots * N)


def power_labels(sc: Scenario, x, p, slots):
    """Per-user transmit power as a fraction of the BS budget, ``[B, slots]``."""
    out = np.zeros((sc.n_bs, slots))
    for b in range(sc.n_bs):
        users = bs_users(x, b)
        _check(users, slots, b)
        out[b, :len(users)] = np.asarray(p)[b, users].sum(axis=1) / sc.stations[b].p_max
    return out


def decode_subchannel_scores(sc: Scenario, x, rows, slots):
    """Scatter per-BS score rows back to a ``[B, M, N]`` score tensor (zero off-association)."""
    N = sc.n_subchannels
    rows = np.asarray(rows).reshape(sc.n_bs, slots, N)
    out = np.zeros(sc.shape)
    for b in range(sc.n_bs):
        users = bs_users(x, b)
        out[b, users] = rows[b, :len(users)]
    return out


def decode_power(sc: Scenario, x, s, rows, slots):
    """Place each user's predicted fraction of p_max on its allocated subchannel."""
    rows = np.asarray(rows).reshape(sc.n_bs, slots)
    a = np.asarray(s) * np.asarray(x)[:, :, None]
    out = np.zeros(sc.shape)
    for b in range(sc.n_bs):
        users = bs_users(x, b)
        frac = np.clip(rows[b, :len(users)], 0.0, 1.0)
        out[b, users] = a[b, users] * (frac * sc.stations[b].p_max)[:, None]
    return out


def standardize_stats(features):
    """Per-column mean and std; constant columns get std 1."""
    f = np.asarray(features, dtype=float)
    if not len(f):
        return np.zeros(f.shape[1]), np.ones(f.shape[1])
    std = f.std(axis=0)
    return f.mean(axis=0), np.where(std > 0, std, 1.0)
