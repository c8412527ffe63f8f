"""Gradient-iteration power oracle and the equal/random power baselines.

The oracle maximises

    f(p) = sum_l [ln(log2(1 + sinr_l)) - ln K_b(l)] / (P_circuit + sum_l p_l)
           + sum_b lambda_b (p_max_b - P_b)

over the active links ``l = (b, m, n)`` (one per associated user), sweeping the
links in ``(b, m)`` order. Each coordinate moves by ``delta(t) * |f'| / |f''|`` in
the direction of ``f'``, clipped to the BS power budget and to the largest power
that keeps every co-channel victim under its interference cap.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .netmodel import Scenario, loads

LN2 = math.log(2.0)
OBJECTIVES = ("log_rate", "ee")


@dataclass(frozen=True)
class GradientConfig:
    t_max: int = 50
    step0: float = 1.0
    step_decay: str = "sqrt"          # "sqrt": step0/sqrt(t), "const": step0, "harmonic": step0/t
    eps: float = 1e-6
    p_floor_frac: float = 1e-6        # floor as a fraction of the BS's p_max
    backtrack: int = 30
    lam: tuple | None = None          # penalty multipliers, one per BS; None means zeros
    objective: str = "log_rate"       # "log_rate": the log-utility ratio above; "ee": sum rate / total power

    def __post_init__(self):
        if self.t_max < 1 or self.step0 <= 0 or self.eps <= 0 or self.p_floor_frac < 0:
            raise ConfigError("invalid GradientConfig")
        if self.objective not in OBJECTIVES:
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.step_decay not in ("sqrt", "const", "harmonic"):
            raise ConfigError(f"unknown step decay {self.step_decay!r}")

    def step(self, t):
        if self.step_decay == "const":
            return self.step0
        if self.step_decay == "harmonic":
            return self.step0 / t
        return self.step0 / math.sqrt(t)


class LinkSet:
    """Active links of an allocation with the SINR coupling matrix precomputed.

    ``sinr_k = own_k p_k / (coupling[k] @ p + noise)``; ``cross[k, l]`` is the
    other-BS part of ``coupling`` (what the interference cap constrains).
    """

    def __init__(self, sc: Scenario, x, s):
        x = np.asarray(x)
        a = np.asarray(s) * x[:, :, None]
        b, m, n = np.nonzero(a)              # C order: sorted by (b, m, n)
        self.sc = sc
        self.bs, self.user, self.sub = b, m, n
        g = sc.gains
        self.own = g[b, m, n]
        L = len(b)
        same_sub = n[:, None] == n[None, :]
        same_bs = b[:, None] == b[None, :]
        # l decoded after k: stronger own gain, ties to the larger user index
        after = (self.own[None, :] > self.own[:, None]) | (
            (self.own[None, :] == self.own[:, None]) & (m[None, :] > m[:, None]))
        intra = np.where(same_sub & same_bs & after, self.own[:, None], 0.0)
        # cross[k, l] = gain from BS of l to user of k on the shared subchannel
        cross_gain = g[b[None, :], m[:, None], n[:, None]] if L else np.zeros((0, 0))
        self.cross = np.where(same_sub & ~same_bs, cross_gain, 0.0)
        self.coupling = intra + self.cross
        self.noise = sc.noise_power
        load = loads(x)
        self.log_load = np.log(np.maximum(load[b], 1))
        self.bandwidth_share = sc.bandwidth_hz / np.maximum(load[b], 1)
        self.p_max = sc.p_max
        self.p_circuit_total = float(sc.p_circuit.sum())
        self.i_cap = sc.i_cap[b]
        self.n_links = L

    def to_tensor(self, p_links):
        out = np.zeros(self.sc.shape)
        out[self.bs, self.user, self.sub] = p_links
        return out

    def from_tensor(self, p):
        return np.asarray(p, dtype=float)[self.bs, self.user, self.sub].copy()

    def bs_power(self, p_links):
        return np.bincount(self.bs, weights=p_links, minlength=self.sc.n_bs)

    def sinr(self, p_links):
        return self.own * p_links / (self.coupling @ p_links + self.noise)

    def interference(self, p_links):
        return self.cross @ p_links

    def _utility(self, gam, kind):
        """Per-link numerator terms and their derivative with respect to the SINR."""
        if kind == "ee":
            w = self.bandwidth_share
            return w * np.log2(1.0 + gam), w / (LN2 * (1.0 + gam))
        log1p = np.log1p(gam)
        return np.log(log1p / LN2) - self.log_load, 1.0 / ((1.0 + gam) * log1p)

    def objective(self, p_links, lam=None, kind="log_rate"):
        gam = self.sinr(p_links)
        if kind == "log_rate" and np.any(gam <= 0):
            return -math.inf
        a, _ = self._utility(gam, kind)
        val = a.sum() / (self.p_circuit_total + p_links.sum())
        if lam is not None:
            val += float(np.dot(lam, self.p_max - self.bs_power(p_links)))
        return float(val)

    def gradient(self, p_links, lam=None, kind="log_rate"):
        """Analytic gradient of :meth:`objective` with respect to every link power."""
        den = self.coupling @ p_links + self.noise
        gam = self.own * p_links / den
        a, da = self._utility(gam, kind)
        U = self.p_circuit_total + p_links.sum()
        # d gamma_k / d p_l = own_l / den_l [k == l] - gamma_k coupling[k, l] / den_k
        dA = da * self.own / den - (da * gam / den) @ self.coupling
        grad = dA / U - a.sum() / U ** 2
        if lam is not None:
            grad = grad - np.asarray(lam)[self.bs]
        return grad

    def ee(self, p_links):
        gam = self.sinr(p_links)
        rate = self.bandwidth_share * np.log2(1.0 + gam)
        return float(rate.sum() / (self.p_circuit_total + p_links.sum()))


def power_objective(sc, x, s, p, lam=None, kind="log_rate"):
    links = LinkSet(sc, x, s)
    return links.objective(links.from_tensor(p), lam, kind)


def power_gradient(sc, x, s, p, lam=None, kind="log_rate"):
    """Analytic derivative of :func:`power_objective` as a ``[B, M, N]`` tensor (zero off active links)."""
    links = LinkSet(sc, x, s)
    return links.to_tensor(links.gradient(links.from_tensor(p), lam, kind))


# ---------------------------------------------------------------------------
# Baselines and feasibility repair

def equal_power(sc, x, s):
    a = np.asarray(s) * np.asarray(x)[:, :, None]
    n_links = a.sum(axis=(1, 2))
    share = np.where(n_links > 0, sc.p_max / np.maximum(n_links, 1), 0.0)
    return a * share[:, None, None]


def random_power(sc, x, s, seed):
    rng = np.random.default_rng(seed)
    a = np.asarray(s) * np.asarray(x)[:, :, None]
    w = a * rng.random(a.shape)
    tot = w.sum(axis=(1, 2))
    scale = np.where(tot > 0, sc.p_max / np.where(tot > 0, tot, 1.0), 0.0)
    return w * scale[:, None, None]


def rescale_budget(links: LinkSet, p_links):
    """Scale each BS down multiplicatively so its transmit power fits p_max."""
    used = links.bs_power(p_links)
    factor = np.where(used > links.p_max, links.p_max / np.where(used > 0, used, 1.0), 1.0)
    return p_links * factor[links.bs]


def enforce_interference_cap(links: LinkSet, p_links, p_floor=None, max_passes=50):
    """Scale interfering links down until every victim's cross-BS interference fits its cap.

    Each pass multiplies link ``l`` by the smallest ``cap_k / I_k`` over the
    violated victims ``k`` it reaches, which restores feasibility in one pass
    unless the floor binds.
    """
    p = np.array(p_links, dtype=float)
    reach = links.cross > 0
    for _ in range(max_passes):
        interf = links.cross @ p
        ratio = np.where(interf > links.i_cap, links.i_cap / np.where(interf > 0, interf, 1.0), 1.0)
        if np.all(ratio >= 1.0):
            break
        # factor per interferer: min over victims it hits
        factor = np.min(np.where(reach, ratio[:, None], 1.0), axis=0) if p.size else ratio
        factor = np.where(factor < 1.0, factor * (1.0 - 1e-12), 1.0)
        p = p * factor
        if p_floor is not None:
            p = np.maximum(p, p_floor)
    return p


def interference_project(sc, x, s, p):
    """Tensor-level wrapper: C4 rescale followed by interference-cap scaling."""
    links = LinkSet(sc, x, s)
    pl = rescale_budget(links, links.from_tensor(p))
    pl = enforce_interference_cap(links, pl)
    return links.to_tensor(pl)


# ---------------------------------------------------------------------------
# Gradient oracle

def _upper_bound(links: LinkSet, p, l):
    """Largest power for link ``l`` keeping its BS budget and all victims' caps, others fixed."""
    b = links.bs[l]
    others = links.bs_power(p)[b] - p[l]
    ub = links.p_max[b] - others
    col = links.cross[:, l]
    hit = col > 0
    if np.any(hit):
        rest = links.cross[hit] @ p - col[hit] * p[l]
        ub = min(ub, float(np.min((links.i_cap[hit] - rest) / col[hit])))
    return ub


def _sweep(links: LinkSet, p, cfg: GradientConfig, t, lam, p_floor):
    delta = cfg.step(t)
    kind = cfg.objective
    f_cur = links.objective(p, lam, kind)
    for l in range(links.n_links):
        g1 = links.gradient(p, lam, kind)[l]
        if g1 == 0.0 or delta == 0.0:
            continue
        h = 1e-6 * p[l]
        up, dn = p.copy(), p.copy()
        up[l] += h
        dn[l] -= h
        g2 = (links.gradient(up, lam, kind)[l] - links.gradient(dn, lam, kind)[l]) / (2.0 * h)
        if g2 != 0.0 and math.isfinite(g2):
            move = delta * math.copysign(abs(g1) / abs(g2), g1)
        else:
            move = delta * g1
        lo = p_floor[l]
        hi = max(_upper_bound(links, p, l), lo)
        for _ in range(cfg.backtrack):
            cand = min(max(p[l] + move, lo), hi)
            if cand == p[l]:
                break
            trial = p.copy()
            trial[l] = cand
            f_new = links.objective(trial, lam, kind)
            if f_new >= f_cur:
                p, f_cur = trial, f_new
                break
            move *= 0.5
    return p


def initial_power(links: LinkSet, p_floor):
    """Equal split of each BS budget, then pulled under the interference caps."""
    counts = np.bincount(links.bs, minlength=links.sc.n_bs)
    p = links.p_max[links.bs] / counts[links.bs]
    return enforce_interference_cap(links, p, p_floor)


def solve_power(sc, x, s, cfg: GradientConfig = GradientConfig(), p_start=None):
    """Run the gradient oracle. Returns ``(p, trace)`` with ``trace`` a list of (t, f, EE)."""
    links = LinkSet(sc, x, s)
    if links.n_links == 0:
        return np.zeros(sc.shape), [(0, 0.0, 0.0)]
    lam = None if cfg.lam is None else np.asarray(cfg.lam, dtype=float)
    p_floor = cfg.p_floor_frac * links.p_max[links.bs]
    if p_start is None:
        p = initial_power(links, p_floor)
    else:
        p = np.maximum(links.from_tensor(p_start), p_floor)
    f = links.objective(p, lam, cfg.objective)
    trace = [(0, f, links.ee(p))]
    for t in range(1, cfg.t_max + 1):
        p_new = rescale_budget(links, _sweep(links, p, cfg, t, lam, p_floor))
        if np.array_equal(p_new, p):
            break
        f_new = links.objective(p_new, lam, cfg.objective)
        p = p_new
        trace.append((t, f_new, links.ee(p)))
        if abs(f_new - f) < cfg.eps * max(1.0, abs(f)):
            break
        f = f_new
    return links.to_tensor(p), trace


def power_step(sc, x, s, p, cfg: GradientConfig = GradientConfig(), t=1):
    """One full coordinate sweep of the oracle from ``p`` (tensor in, tensor out)."""
    links = LinkSet(sc, x, s)
    lam = None if cfg.lam is None else np.asarray(cfg.lam, dtype=float)
    p_floor = cfg.p_floor_frac * links.p_max[links.bs]
    pl = links.from_tensor(p)
    return links.to_tensor(rescale_budget(links, _sweep(links, pl, cfg, t, lam, p_floor)))


def write_trace_csv(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "objective", "ee_bits_per_joule"])
        for t, f, ee in trace:
            w.writerow([t, repr(float(f)), repr(float(ee))])

