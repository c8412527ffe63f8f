"""Two-sided user/subchannel matching and projection of scores onto feasible allocations.

Each BS is matched independently. During matching the BS budget is spread over
its occupied subchannels and, inside a NOMA pair, the weaker user gets two thirds
of the subchannel power.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError
from .netmodel import Scenario

MAX_OCCUPANCY = 2
WEAK_SHARE = 2.0 / 3.0


@dataclass
class MatchState:
    """Occupants ``v[n]`` of each subchannel of one BS and the users still waiting."""
    v: list
    unassigned: list
    rejected: dict = field(default_factory=dict)

    def occupancy(self, n):
        return len(self.v[n])


def _check_capacity(sc: Scenario, x):
    load = np.asarray(x).sum(axis=1)
    bad = np.nonzero(load > MAX_OCCUPANCY * sc.n_subchannels)[0]
    if bad.size:
        b = int(bad[0])
        raise CapacityError(f"BS {b} has {int(load[b])} users but only "
                            f"{sc.n_subchannels} subchannels")


def interim_power(sc: Scenario, x, s):
    """Power used while matching: p_max split over occupied subchannels, 2:1 to the weak user in a pair."""
    a = np.asarray(s) * np.asarray(x)[:, :, None]
    occ = a.sum(axis=1)                                   # [B, N]
    n_occ = (occ > 0).sum(axis=1)
    per_sub = np.where(n_occ > 0, sc.p_max / np.maximum(n_occ, 1), 0.0)
    p = a * per_sub[:, None, None]
    g = sc.gains
    pairs = np.nonzero(occ == 2)
    for b, n in zip(*pairs):
        users = np.nonzero(a[b, :, n])[0]
        weak, strong = sorted(users, key=lambda u: (g[b, u, n], u))
        p[b, weak, n] = WEAK_SHARE * per_sub[b]
        p[b, strong, n] = (1.0 - WEAK_SHARE) * per_sub[b]
    return p


def _pair_rates(gains, power, noise):
    """Rates in bits/s/Hz of the occupants of one subchannel (gains in occupant order)."""
    if len(gains) == 1:
        return [math.log2(1.0 + power * gains[0] / noise)]
    g0, g1 = gains
    # index of the weak user (SIC decoded first); ties resolved by position
    weak = 0 if g0 <= g1 else 1
    strong = 1 - weak
    gw, gs = gains[weak], gains[strong]
    pw, ps = WEAK_SHARE * power, (1.0 - WEAK_SHARE) * power
    out = [0.0, 0.0]
    out[weak] = math.log2(1.0 + pw * gw / (gw * ps + noise))
    out[strong] = math.log2(1.0 + ps * gs / noise)
    return out


def subchannel_utility(sc: Scenario, x, p, b, n, occupants, circuit_share=None):
    """EE contribution of subchannel ``n`` of BS ``b`` hosting ``occupants``.

    ``p`` is the power given to each subchannel, shape ``[B, N]``. The rate uses
    the bandwidth share of BS ``b`` under ``x`` and ignores other BSs; the
    denominator is the subchannel power plus ``circuit_share`` (default the BS
    circuit power divided by N).
    """
    occupants = list(occupants)
    if not occupants:
        return 0.0
    load = int(np.asarray(x)[b].sum())
    power = float(np.asarray(p)[b, n])
    if circuit_share is None:
        circuit_share = sc.stations[b].p_circuit / sc.n_subchannels
    rates = _pair_rates([sc.gains[b, u, n] for u in occupants], power, sc.noise_power)
    return (sc.bandwidth_hz / max(load, 1)) * sum(rates) / (power + circuit_share)


def subchannel_budget(sc: Scenario, x):
    """Per-subchannel power ``[B, N]`` used to rank candidate pairs during matching."""
    load = np.asarray(x).sum(axis=1)
    used = np.minimum(sc.n_subchannels, np.ceil(load / 2.0))
    per = np.where(used > 0, sc.p_max / np.maximum(used, 1), 0.0)
    return np.repeat(per[:, None], sc.n_subchannels, axis=1)


def _match_bs(sc, x, p_sub, b):
    users = [int(u) for u in np.nonzero(np.asarray(x)[b])[0]]
    N = sc.n_subchannels
    g = sc.gains[b]
    state = MatchState(v=[[] for _ in range(N)], unassigned=list(users),
                       rejected={u: set() for u in users})
    guard = len(users) * N * max(len(users), 1) + len(users) + 1
    while state.unassigned:
        guard -= 1
        if guard < 0:
            raise RuntimeError("matching failed to terminate")
        for m in list(state.unassigned):
            if m not in state.unassigned:
                continue
            allowed = [n for n in range(N) if n not in state.rejected[m]]
            if not allowed:
                # every subchannel refused m once: take the emptiest, which has room
                n_star = min(range(N), key=lambda n: (state.occupancy(n), n))
                state.v[n_star].append(m)
                state.unassigned.remove(m)
                continue
            n_star = max(allowed, key=lambda n: (g[m, n], -n))
            if state.occupancy(n_star) < MAX_OCCUPANCY:
                state.v[n_star].append(m)
                state.unassigned.remove(m)
                continue
            m1, m2 = state.v[n_star]
            incumbent = (m1, m2)
            best, best_u = incumbent, subchannel_utility(sc, x, p_sub, b, n_star, incumbent)
            for pair in ((m, m1), (m, m2)):
                u = subchannel_utility(sc, x, p_sub, b, n_star, pair)
                if u > best_u:
                    best, best_u = pair, u
            evicted = ({m, m1, m2} - set(best)).pop()
            state.v[n_star] = [u for u in (m1, m2, m) if u in best]
            state.rejected[evicted].add(n_star)
            if evicted != m:
                state.unassigned.remove(m)
                state.unassigned.append(evicted)
    return state


def bs_energy_efficiency(sc: Scenario, b, users, assign):
    """EE of BS ``b`` alone under the interim power rule; ``assign[i]`` is the subchannel of ``users[i]``."""
    if not len(users):
        return 0.0
    g = sc.gains[b]
    N = sc.n_subchannels
    groups = [[] for _ in range(N)]
    for u, n in zip(users, assign):
        groups[n].append(u)
    occupied = [n for n in range(N) if groups[n]]
    power = sc.stations[b].p_max / len(occupied)
    rate = 0.0
    for n in occupied:
        rate += sum(_pair_rates([g[u, n] for u in groups[n]], power, sc.noise_power))
    rate *= sc.bandwidth_hz / len(users)
    return rate / (sc.stations[b].p_max + sc.stations[b].p_circuit)


def neighbours(assign, n_sub):
    """All allocations one move or one exchange away (occupancy <= 2 kept)."""
    assign = list(assign)
    counts = np.bincount(assign, minlength=n_sub)
    for i, n in enumerate(assign):
        for k in range(n_sub):
            if k != n and counts[k] < MAX_OCCUPANCY:
                nxt = assign.copy()
                nxt[i] = k
                yield nxt
    for i in range(len(assign)):
        for j in range(i + 1, len(assign)):
            if assign[i] != assign[j]:
                nxt = assign.copy()
                nxt[i], nxt[j] = nxt[j], nxt[i]
                yield nxt


def _stabilize(sc, b, users, assign, rtol=1e-12):
    cur = bs_energy_efficiency(sc, b, users, assign)
    while True:
        best, best_val = None, cur
        for cand in neighbours(assign, sc.n_subchannels):
            val = bs_energy_efficiency(sc, b, users, cand)
            if val > best_val * (1.0 + rtol):
                best, best_val = cand, val
        if best is None:
            return assign
        assign, cur = best, best_val


def two_side_matching(sc: Scenario, x, p_init=None, stabilize=True):
    """Match the users of every BS to subchannels, at most two per subchannel.

    Users propose to their best-gain subchannel not yet refused to them; a full
    subchannel keeps the two of the three candidates with the largest utility.
    With ``stabilize`` a best-improvement pass over single moves and exchanges
    follows, so the result is one-swap stable for the BS EE.
    """
    x = np.asarray(x)
    _check_capacity(sc, x)
    p_sub = subchannel_budget(sc, x) if p_init is None else np.asarray(p_init, dtype=float)
    s = np.zeros(sc.shape, dtype=int)
    for b in range(sc.n_bs):
        state = _match_bs(sc, x, p_sub, b)
        users, assign = [], []
        for n, occ in enumerate(state.v):
            for u in occ:
                users.append(u)
                assign.append(n)
        if stabilize and users:
            order = np.argsort(users)
            users = [users[i] for i in order]
            assign = _stabilize(sc, b, users, [assign[i] for i in order])
        for u, n in zip(users, assign):
            s[b, u, n] = 1
    return s


def project_to_feasible(sc: Scenario, x, s_hat):
    """Greedy rounding of real scores ``s_hat [B, M, N]`` to a feasible binary allocation."""
    x = np.asarray(x)
    _check_capacity(sc, x)
    s_hat = np.asarray(s_hat, dtype=float)
    B, M, N = sc.shape
    s = np.zeros((B, M, N), dtype=int)
    occ = np.zeros((B, N), dtype=int)
    done = np.zeros(M, dtype=bool)
    flat = np.nonzero(np.broadcast_to(x[:, :, None], (B, M, N)).ravel())[0]
    # stable sort on -score keeps the (b, m, n) lexicographic order among ties
    order = flat[np.argsort(-s_hat.ravel()[flat], kind="stable")]
    for idx in order:
        b, rem = divmod(int(idx), M * N)
        m, n = divmod(rem, N)
        if done[m] or occ[b, n] >= MAX_OCCUPANCY:
            continue
        s[b, m, n] = 1
        occ[b, n] += 1
        done[m] = True
    for m in np.nonzero(~done & (x.sum(axis=0) > 0))[0]:
        b = int(np.argmax(x[:, m]))
        n = int(np.argmin(occ[b]))
        s[b, m, n] = 1
        occ[b, n] += 1
    return s
