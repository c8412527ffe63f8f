"""Train the power DNN on oracle labels and compare it with the oracle.

Small sizes so it finishes in about a minute; raise N_TRAIN/EPOCHS for a
closer fit.

    python demos/power_dnn.py
"""
import numpy as np

from noma_rrm import features
from noma_rrm.netmodel import DESK_SCALE, energy_efficiency
from noma_rrm.pipeline import datasets_from_oracles, predict_power, run_oracles, train_power_net

N_TRAIN, N_TEST, EPOCHS = 200, 50, 30
slots = features.n_slots(DESK_SCALE)

train_runs = run_oracles(DESK_SCALE, N_TRAIN, seed=1)
test_runs = run_oracles(DESK_SCALE, N_TEST, seed=2)
_, power_ds = datasets_from_oracles(DESK_SCALE, train_runs)
print(f"{len(power_ds)} per-BS samples, {power_ds.feature_dim} features, {power_ds.labels.shape[1]} outputs")


def show(epoch, model):
    if (epoch + 1) % 10 == 0:
        ratio = np.mean([energy_efficiency(r.sc, r.x, r.s, predict_power(model, r.sc, r.x, r.s, slots))
                         / energy_efficiency(r.sc, r.x, r.s, r.p) for r in test_runs])
        print(f"epoch {epoch + 1:3d}: mean EE(dnn)/EE(oracle) = {ratio:.3f}")


model, hist = train_power_net(power_ds, epochs=EPOCHS, seed=0, callback=show)
print(f"training MSE {hist[0]:.4g} -> {hist[-1]:.4g}")
