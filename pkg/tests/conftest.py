import math

import numpy as np
import pytest
from hypothesis import settings

from noma_rrm.netmodel import MACRO, SMALL, BaseStation, Scenario

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def make_sc(gains, p_max=1.0, p_circuit=1.0, noise=1.0, bandwidth=1.2e9, qos=0.0,
            i_cap=1e9, k_cap=None):
    """Hand-built scenario; BS 0 is the macro. Scalars broadcast to every BS."""
    g = np.asarray(gains, dtype=float)
    B, M, N = g.shape
    bcast = lambda v: np.broadcast_to(np.asarray(v, dtype=float), (B,))
    pm, pc, ic = bcast(p_max), bcast(p_circuit), bcast(i_cap)
    kc = k_cap if k_cap is not None else max(M, 1)
    stations = tuple(BaseStation(b, MACRO if b == 0 else SMALL, (10.0 * b, 0.0), float(pm[b]),
                                 float(pc[b]), int(kc), float(ic[b])) for b in range(B))
    return Scenario(stations, M, N, bandwidth, noise, qos, g, seed=0)


def random_sc(rng, B, M, N, **kw):
    return make_sc(rng.uniform(0.2, 5.0, size=(B, M, N)), **kw)


def random_alloc(rng, B, M, N):
    """Random feasible x, s (<= 2 users per subchannel) and positive powers on active links."""
    assert M <= 2 * B * N
    x = np.zeros((B, M), dtype=int)
    s = np.zeros((B, M, N), dtype=int)
    occ = np.zeros((B, N), dtype=int)
    for m in range(M):
        b = int(rng.choice([k for k in range(B) if occ[k].sum() < 2 * N]))
        x[b, m] = 1
        free = [n for n in range(N) if occ[b, n] < 2]
        n = int(rng.choice(free))
        s[b, m, n] = 1
        occ[b, n] += 1
    p = s * rng.uniform(0.05, 1.0, size=(B, M, N))
    return x, s, p


def naive_sinr(sc, x, s, p, b, m, n):
    """Scalar evaluation of the downlink NOMA SINR with ascending-gain SIC order."""
    g = sc.gains
    if not (x[b][m] and s[b][m][n]):
        return 0.0
    intra = 0.0
    for r in range(sc.n_users):
        if r == m or not (x[b][r] and s[b][r][n]):
            continue
        stronger = g[b][r][n] > g[b][m][n] or (g[b][r][n] == g[b][m][n] and r > m)
        if stronger:
            intra += p[b][r][n]
    cross = 0.0
    for j in range(sc.n_bs):
        if j == b:
            continue
        for r in range(sc.n_users):
            if x[j][r] and s[j][r][n]:
                cross += p[j][r][n] * g[j][m][n]
    return p[b][m][n] * g[b][m][n] / (g[b][m][n] * intra + cross + sc.noise_power)


def naive_sum_rate(sc, x, s, p):
    total = 0.0
    for b in range(sc.n_bs):
        load = sum(x[b])
        for m in range(sc.n_users):
            for n in range(sc.n_subchannels):
                if x[b][m] and s[b][m][n]:
                    total += sc.bandwidth_hz / load * math.log2(1.0 + naive_sinr(sc, x, s, p, b, m, n))
    return total


def naive_total_power(sc, x, s, p):
    total = sum(st.p_circuit for st in sc.stations)
    for b in range(sc.n_bs):
        for m in range(sc.n_users):
            for n in range(sc.n_subchannels):
                total += x[b][m] * s[b][m][n] * p[b][m][n]
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
