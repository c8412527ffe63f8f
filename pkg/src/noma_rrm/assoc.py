"""User association by Lagrange dual decomposition, plus the Max-SINR baseline.

Scores are computed with the subchannel and power allocation held fixed. A user
that already has a link at BS ``b`` is scored on that link; for any other BS the
score uses the link the user would get by joining: its best-gain subchannel
there, an equal share ``p_max / (load + 1)`` of the BS budget, and the co-channel
interference of the current power allocation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InfeasibleAssociationError
from .matching import MAX_OCCUPANCY
from .netmodel import Scenario, energy_efficiency, sinr_tensor


@dataclass
class DualMultipliers:
    mu: np.ndarray      # per BS, load cap
    lam: np.ndarray     # per BS, power budget
    nu: np.ndarray      # per user, QoS rate
    tau: np.ndarray     # per BS, interference cap

    @classmethod
    def zeros(cls, n_bs, n_users):
        return cls(np.zeros(n_bs), np.zeros(n_bs), np.zeros(n_users), np.zeros(n_bs))

    def as_vector(self):
        return np.concatenate([self.mu, self.lam, self.nu, self.tau])

    def copy(self):
        return DualMultipliers(self.mu.copy(), self.lam.copy(), self.nu.copy(), self.tau.copy())


@dataclass(frozen=True)
class AssocSolverConfig:
    max_iters: int = 100
    step0: float = 0.1
    tolerance: float = 1e-6
    enforce_caps: bool = True

    def __post_init__(self):
        if self.max_iters < 1 or self.step0 <= 0 or self.tolerance <= 0:
            raise ConfigError("invalid AssocSolverConfig")

    def step(self, t):
        return self.step0 / math.sqrt(t)


def _links_from(s):
    """Association implied by a subchannel allocation: users holding a link at b."""
    return (np.asarray(s).sum(axis=2) > 0).astype(int)


def score_terms(sc: Scenario, s, p):
    """Per-(b, m) ingredients of the association score.

    Returns a dict of ``[B, M]`` arrays: ``spectral`` (bits/s/Hz), ``rate``
    (bits/s), ``power`` (W used for the link), ``gain_power`` (own gain times
    power) and the scalar ``total_power``.
    """
    s = np.asarray(s)
    p = np.asarray(p, dtype=float)
    g = sc.gains
    B, M, N = sc.shape
    linked = _links_from(s)
    load = linked.sum(axis=1)
    sp = s * p

    gam = sinr_tensor(sc, linked, s, p)
    spectral_real = (s * np.log2(1.0 + gam)).sum(axis=2)
    power_real = sp.sum(axis=2)
    gp_real = (sp * g).sum(axis=2)
    rate_real = np.where(load[:, None] > 0, sc.bandwidth_hz / np.maximum(load, 1)[:, None], 0.0) * spectral_real

    n_star = np.argmax(g, axis=2)                                   # [B, M]
    bs_idx, us_idx = np.meshgrid(np.arange(B), np.arange(M), indexing="ij")
    per_bs = sp.sum(axis=1)                                          # [B, N]
    # interference at user m on n* from every BS except b, excluding m's own signal
    recv = np.einsum("jn,jmn->mn", per_bs, g) - np.einsum("jmn,jmn->mn", sp, g)
    interf = recv[us_idx, n_star] - (per_bs[bs_idx, n_star] - sp[bs_idx, us_idx, n_star]) * g[bs_idx, us_idx, n_star]
    interf = np.maximum(interf, 0.0)
    p_new = sc.p_max[:, None] / (load[:, None] + 1.0) * np.ones((1, M))
    g_star = g[bs_idx, us_idx, n_star]
    spectral_new = np.log2(1.0 + p_new * g_star / (interf + sc.noise_power))
    rate_new = sc.bandwidth_hz / (load[:, None] + 1.0) * spectral_new

    use_real = linked.astype(bool)
    return {
        "spectral": np.where(use_real, spectral_real, spectral_new),
        "rate": np.where(use_real, rate_real, rate_new),
        "power": np.where(use_real, power_real, p_new),
        "gain_power": np.where(use_real, gp_real, g_star * p_new),
        "total_power": float(sc.p_circuit.sum() + sp.sum()),
    }


def association_scores(sc: Scenario, s, p, duals: DualMultipliers, terms=None):
    """Decision values ``j[b, m]``; ``-inf`` where the rate term is zero.

    The QoS and interference terms are scaled by ``R_t`` and ``I_b`` so that all
    multipliers live on comparable, dimensionless scales.
    """
    t = terms if terms is not None else score_terms(sc, s, p)
    with np.errstate(divide="ignore"):
        term1 = np.log(sc.bandwidth_hz * t["spectral"]) / t["total_power"]
    term1 = np.where(t["spectral"] > 0, term1, -np.inf)
    qos_scale = sc.qos_rate if sc.qos_rate > 0 else 1.0
    j = (term1
         - duals.lam[:, None] * t["power"]
         - duals.mu[:, None]
         + duals.nu[None, :] * t["rate"] / qos_scale
         - duals.tau[:, None] * (sc.n_bs - 1) * t["gain_power"] / sc.i_cap[:, None])
    return np.where(np.isfinite(term1), j, -np.inf)


def association_score(sc, s, p, duals, b, m):
    return float(association_scores(sc, s, p, duals)[b, m])


def associate(scores):
    """Each user joins the BS with the largest score (lowest index on ties)."""
    scores = np.asarray(scores, dtype=float)
    if np.any(~np.isfinite(scores).any(axis=0)):
        bad = int(np.nonzero(~np.isfinite(scores).any(axis=0))[0][0])
        raise InfeasibleAssociationError(f"user {bad} has no finite score")
    best = np.argmax(scores, axis=0)
    x = np.zeros(scores.shape, dtype=int)
    x[best, np.arange(scores.shape[1])] = 1
    return x


def enforce_caps(scores, x, caps):
    """Move users off over-full BSs, cheapest score loss first, until every BS fits its cap."""
    scores = np.asarray(scores, dtype=float)
    x = np.array(x, dtype=int)
    caps = np.asarray(caps)
    if caps.sum() < x.shape[1]:
        raise InfeasibleAssociationError("total BS capacity below the number of users")
    while True:
        load = x.sum(axis=1)
        over = np.nonzero(load > caps)[0]
        if not over.size:
            return x
        b = int(over[0])
        best = None
        for m in np.nonzero(x[b])[0]:
            for k in np.argsort(-scores[:, m], kind="stable"):
                if k != b and load[k] < caps[k] and np.isfinite(scores[k, m]):
                    loss = scores[b, m] - scores[k, m]
                    if best is None or loss < best[0]:
                        best = (loss, int(m), int(k))
                    break
        if best is None:
            raise InfeasibleAssociationError(f"no room to offload BS {b}")
        _, m, k = best
        x[b, m] = 0
        x[k, m] = 1


def update_multipliers(duals: DualMultipliers, sc: Scenario, x, s, p, step):
    """Projected subgradient step; every multiplier grows when its constraint is violated."""
    x = np.asarray(x)
    s = np.asarray(s)
    p = np.asarray(p, dtype=float)
    terms = score_terms(sc, s, p)
    load = x.sum(axis=1)
    used = (x * terms["power"]).sum(axis=1)
    rate = (x * terms["rate"]).sum(axis=0)
    # interference each BS's users would see, taking the worst one
    interf = np.zeros(sc.n_bs)
    a = s * x[:, :, None]
    per_bs = (a * p).sum(axis=1)
    recv = np.einsum("jn,jmn->mn", per_bs, sc.gains)
    for b in range(sc.n_bs):
        mask = a[b].astype(bool)
        if mask.any():
            cross = recv - per_bs[b][None, :] * sc.gains[b]
            interf[b] = cross[mask].max()
    qos_scale = sc.qos_rate if sc.qos_rate > 0 else 1.0
    return DualMultipliers(
        mu=np.maximum(0.0, duals.mu - step * (sc.k_cap - load)),
        lam=np.maximum(0.0, duals.lam - step * (sc.p_max - used)),
        nu=np.maximum(0.0, duals.nu - step * (rate - sc.qos_rate) / qos_scale),
        tau=np.maximum(0.0, duals.tau - step * (sc.i_cap - interf) / sc.i_cap),
    )


@dataclass
class AssocTrace:
    rows: list = field(default_factory=list)

    def append(self, it, duals, macro_load, ee):
        self.rows.append((it, float(np.linalg.norm(duals.as_vector())), int(macro_load), float(ee)))

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "dual_norm", "macro_load", "ee_bits_per_joule"])
            for row in self.rows:
                w.writerow([row[0], repr(row[1]), row[2], repr(row[3])])


def user_caps(sc: Scenario):
    """Effective per-BS user limit: the configured cap and two users per subchannel."""
    return np.minimum(sc.k_cap, MAX_OCCUPANCY * sc.n_subchannels)


def solve_user_association(sc: Scenario, s, p, cfg: AssocSolverConfig = AssocSolverConfig(),
                           duals: DualMultipliers | None = None):
    """Dual iterations: score, associate, update multipliers.

    Returns ``(x, duals, trace)``. With ``cfg.enforce_caps`` the final
    association is repaired so that every BS respects its user limit.
    """
    s = np.asarray(s)
    p = np.asarray(p, dtype=float)
    duals = duals.copy() if duals is not None else DualMultipliers.zeros(sc.n_bs, sc.n_users)
    terms = score_terms(sc, s, p)
    trace = AssocTrace()
    x = None
    for it in range(1, cfg.max_iters + 1):
        scores = association_scores(sc, s, p, duals, terms)
        x = associate(scores)
        new = update_multipliers(duals, sc, x, s, p, cfg.step(it))
        moved = float(np.linalg.norm(new.as_vector() - duals.as_vector()))
        duals = new
        trace.append(it, duals, x[sc.macro_index].sum(), energy_efficiency(sc, x, s * x[:, :, None], p))
        if moved < cfg.tolerance:
            break
    if cfg.enforce_caps:
        x = enforce_caps(association_scores(sc, s, p, duals, terms), x, user_caps(sc))
    return x, duals, trace


def reference_sinr(sc: Scenario, p_ref=None):
    """Full-power, best-subchannel, interference-free SINR of every (b, m)."""
    p_ref = sc.p_max if p_ref is None else np.asarray(p_ref, dtype=float)
    return p_ref[:, None] * sc.gains.max(axis=2) / sc.noise_power


def max_sinr_association(sc: Scenario, p_ref=None):
    return associate(reference_sinr(sc, p_ref))
