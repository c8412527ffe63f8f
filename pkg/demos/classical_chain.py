"""Walk one desk-scale scenario through the classical allocation chain.

Association (Max-SINR vs Lagrangian), two-sided subchannel matching, then the
gradient power oracle, with the constraint report at the end.

    python demos/classical_chain.py [seed]
"""
import sys

import numpy as np

from noma_rrm import matching, powerctl
from noma_rrm.netmodel import (DESK_SCALE, check_constraints, energy_efficiency,
                               generate_scenario, sum_rate)
from noma_rrm.pipeline import equal_projected, lagrangian_association

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
sc = generate_scenario(DESK_SCALE, seed)
print(f"{sc.n_bs} BSs, {sc.n_users} users, {sc.n_subchannels} subchannels (seed {seed})")

x, x_ms = lagrangian_association(sc)
print("users per BS, Max-SINR :", x_ms.sum(axis=1))
print("users per BS, Lagrangian:", x.sum(axis=1))

s = matching.two_side_matching(sc, x)
for b in range(sc.n_bs):
    occ = s[b].sum(axis=0)
    print(f"  BS {b}: subchannel occupancy {occ}")

p, trace = powerctl.solve_power(sc, x, s)
print(f"power oracle: {trace[-1][0]} sweeps, objective {trace[0][1]:.4g} -> {trace[-1][1]:.4g}, "
      f"EE {trace[0][2]:.4g} -> {trace[-1][2]:.4g}")

p_eq = equal_projected(sc, x, s)
for name, pp in (("gradient", p), ("equal", p_eq)):
    print(f"{name:>8}: sum rate {sum_rate(sc, x, s, pp):.4g} bit/s, EE {energy_efficiency(sc, x, s, pp):.4g} bit/J")

rep = check_constraints(sc, x, s, p)
print("constraints:", {c: getattr(rep, c).passed for c in ("c1", "c2", "c3", "c4", "c6")},
      f"QoS satisfied by {100 * rep.c5_satisfaction:.0f}% of users")
