"""Co-train the two subchannel regressors and compare with a single learner.

    python demos/cotraining.py
"""
import numpy as np

from noma_rrm import features
from noma_rrm.cotrain import CoTrainConfig, cotrain, predict, predict_subchannels
from noma_rrm.netmodel import DESK_SCALE, sum_rate
from noma_rrm.pipeline import datasets_from_oracles, equal_projected, generate_unlabeled, run_oracles

slots = features.n_slots(DESK_SCALE)
lab = datasets_from_oracles(DESK_SCALE, run_oracles(DESK_SCALE, 100, seed=1))[0]
test_runs = run_oracles(DESK_SCALE, 40, seed=2)
test = datasets_from_oracles(DESK_SCALE, test_runs)[0]
unl = generate_unlabeled(DESK_SCALE, 200, seed=3)

cfg = CoTrainConfig(pool_size=6, t_max=4, initial_epochs=20, seed=0)
states = []
ens = cotrain(lab.features, lab.labels, unl.features, cfg, test.features, test.labels, states)
state = states[0]
for r, n1, n2, d1, d2, val in state.log:
    print(f"round {r}: |L1|={n1} |L2|={n2} best delta {d1:.3g} / {d2:.3g}, held-out MSE {val:.5f}")

mse = lambda m: np.mean((predict(m, test.features) - test.labels) ** 2)
for k, m in enumerate(state.initial_models, 1):
    print(f"initial learner {k}: held-out MSE {mse(m):.5f}")
print(f"ensemble: held-out MSE {mse(ens):.5f}")

single = min(state.initial_models, key=mse)
for name, model in (("single", single), ("ensemble", ens)):
    rates = []
    for r in test_runs:
        s = predict_subchannels(model, r.sc, r.x, slots)
        rates.append(sum_rate(r.sc, r.x, s, equal_projected(r.sc, r.x, s)))
    print(f"{name:>8}: mean sum rate {np.mean(rates):.4g} bit/s")
print(f"matching: mean sum rate {np.mean([sum_rate(r.sc, r.x, r.s, equal_projected(r.sc, r.x, r.s)) for r in test_runs]):.4g} bit/s")
