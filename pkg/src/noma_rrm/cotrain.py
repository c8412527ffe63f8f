"""Co-training of two dissimilar regressors for subchannel allocation.

Each round, every learner scores the items of a small unlabeled pool by how
much a short fine-tune on its own pseudo-label lowers the learner's squared
error on its labeled set. The best positive item of learner 1 goes to learner
2's labeled set and vice versa.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .features import decode_subchannel_scores, encode_scenario, standardize_stats
from .matching import project_to_feasible
from .neural import (SUBCHANNEL_NET1, SUBCHANNEL_NET2, Architecture, MlpModel,
                     TrainConfig, build_mlp, forward, train)


@dataclass(frozen=True)
class CoTrainConfig:
    pool_size: int = 100
    t_max: int = 50
    finetune_epochs: int = 5        # budget of the trial fine-tune inside the confidence score
    retrain_epochs: int = 10        # continued training of both learners after a placement
    arch1: Architecture = SUBCHANNEL_NET1
    arch2: Architecture = SUBCHANNEL_NET2
    initial_epochs: int | None = None   # None: the architecture's own epoch count
    seed: int = 0

    def __post_init__(self):
        if self.pool_size < 0 or self.t_max < 0 or self.finetune_epochs < 1 or self.retrain_epochs < 1:
            raise ConfigError("invalid CoTrainConfig")


class Ensemble:
    """Componentwise mean of the member models' outputs."""

    def __init__(self, models):
        self.models = list(models)

    @property
    def input_dim(self):
        return self.models[0].input_dim

    @property
    def output_dim(self):
        return self.models[0].output_dim

    def predict(self, x):
        return sum(forward(m, x) for m in self.models) / len(self.models)


def predict(model, x):
    if isinstance(model, Ensemble):
        return model.predict(x)
    return forward(model, x)


def _sq_err(model, x, y):
    return float(np.sum((y - forward(model, x)) ** 2))


def confidence_delta(model: MlpModel, labeled_x, labeled_y, g_u, train_cfg: TrainConfig,
                     epochs=5, seed=0):
    """Drop in squared error on the labeled set after fine-tuning on it plus (g_u, model(g_u)).

    Positive means the pseudo-labeled item helps the learner.
    """
    labeled_x = np.asarray(labeled_x, dtype=float)
    labeled_y = np.asarray(labeled_y, dtype=float)
    if not len(labeled_x):
        raise ConfigError("confidence needs a nonempty labeled set")
    g_u = np.atleast_2d(np.asarray(g_u, dtype=float))
    pseudo = forward(model, g_u)
    trial_cfg = TrainConfig(train_cfg.learn_rate, train_cfg.batch_size, epochs,
                            train_cfg.optimizer, seed)
    trial, _ = train(model, np.vstack([labeled_x, g_u]), np.vstack([labeled_y, pseudo]), trial_cfg)
    return _sq_err(model, labeled_x, labeled_y) - _sq_err(trial, labeled_x, labeled_y)


@dataclass
class CoTrainState:
    l1_x: np.ndarray
    l1_y: np.ndarray
    l2_x: np.ndarray
    l2_y: np.ndarray
    unlabeled: np.ndarray           # all unlabeled features; pool/reservoir index into it
    pool: list
    reservoir: list
    models: list
    cfg: CoTrainConfig
    initial_models: list = field(default_factory=list)
    iter: int = 0
    placed: list = field(default_factory=list)     # (round, learner, unlabeled index)
    log: list = field(default_factory=list)

    @property
    def ensemble(self):
        return Ensemble(self.models)


def _train_cfg(arch: Architecture, seed, epochs=None):
    t = arch.train
    return TrainConfig(t.learn_rate, t.batch_size, epochs or t.epochs, t.optimizer, seed)


def _refill(state: CoTrainState):
    while len(state.pool) < state.cfg.pool_size and state.reservoir:
        state.pool.append(state.reservoir.pop(0))


def init_state(labeled_x, labeled_y, unlabeled_x, cfg: CoTrainConfig = CoTrainConfig()):
    """Train both initial learners on the labeled set and fill the pool."""
    labeled_x = np.asarray(labeled_x, dtype=float)
    labeled_y = np.asarray(labeled_y, dtype=float)
    if not len(labeled_x):
        raise ConfigError("co-training needs labeled data")
    unlabeled_x = np.asarray(unlabeled_x, dtype=float).reshape(-1, labeled_x.shape[1])
    mean, std = standardize_stats(labeled_x)
    models = []
    for k, arch in enumerate((cfg.arch1, cfg.arch2)):
        m = build_mlp(labeled_x.shape[1], arch.hidden, labeled_y.shape[1], arch.keep, seed=cfg.seed + 101 * k)
        m.set_normalization(mean, std)
        m, _ = train(m, labeled_x, labeled_y, _train_cfg(arch, cfg.seed + 7 * k + 1, cfg.initial_epochs))
        models.append(m)
    order = list(np.random.default_rng(cfg.seed).permutation(len(unlabeled_x)))
    state = CoTrainState(labeled_x.copy(), labeled_y.copy(), labeled_x.copy(), labeled_y.copy(),
                         unlabeled_x, [], [int(i) for i in order], models, cfg,
                         [m.copy() for m in models])
    _refill(state)
    return state


def _select(state: CoTrainState, k):
    """Best positive-confidence pool item of learner k, or None; returns (index, pseudo, delta_max)."""
    arch = (state.cfg.arch1, state.cfg.arch2)[k]
    lx, ly = (state.l1_x, state.l1_y) if k == 0 else (state.l2_x, state.l2_y)
    model = state.models[k]
    best, best_delta = None, -np.inf
    seed = state.cfg.seed + 1000 * (state.iter + 1) + k
    for idx in state.pool:
        d = confidence_delta(model, lx, ly, state.unlabeled[idx], arch.train,
                             state.cfg.finetune_epochs, seed)
        if d > best_delta:
            best, best_delta = idx, d
    if best is None or best_delta <= 0:
        return None, None, best_delta
    return best, forward(model, state.unlabeled[best]), best_delta


def cotrain_round(state: CoTrainState, val_x=None, val_y=None):
    """One round of selection, cross placement and retraining (mutates and returns ``state``).

    Learner 1 selects first and its pick leaves the pool before learner 2
    scores, so no item is pseudo-labeled twice.
    """
    state.iter += 1
    picks = []
    for k in (0, 1):
        idx, pseudo, dmax = _select(state, k)
        if idx is not None:
            state.pool.remove(idx)
            state.placed.append((state.iter, k + 1, idx))
        picks.append((idx, pseudo, dmax))
    (i1, y1, d1), (i2, y2, d2) = picks
    if i2 is not None:
        state.l1_x = np.vstack([state.l1_x, state.unlabeled[i2]])
        state.l1_y = np.vstack([state.l1_y, y2])
    if i1 is not None:
        state.l2_x = np.vstack([state.l2_x, state.unlabeled[i1]])
        state.l2_y = np.vstack([state.l2_y, y1])
    if i1 is not None or i2 is not None:
        for k, arch in enumerate((state.cfg.arch1, state.cfg.arch2)):
            lx, ly = (state.l1_x, state.l1_y) if k == 0 else (state.l2_x, state.l2_y)
            cfg = _train_cfg(arch, state.cfg.seed + 31 * state.iter + k, state.cfg.retrain_epochs)
            state.models[k], _ = train(state.models[k], lx, ly, cfg)
        _refill(state)
    val = float("nan")
    if val_x is not None and len(val_x):
        val = float(np.mean((state.ensemble.predict(val_x) - val_y) ** 2))
    state.log.append((state.iter, len(state.l1_x), len(state.l2_x), float(d1), float(d2), val))
    return state


def cotrain(labeled_x, labeled_y, unlabeled_x, cfg: CoTrainConfig = CoTrainConfig(),
            val_x=None, val_y=None, state_out=None):
    """Full co-training loop; returns the averaging ensemble.

    Stops after a round in which neither learner found a positive item, or
    after ``cfg.t_max`` rounds. Pass a list as ``state_out`` to receive the
    final state.
    """
    state = init_state(labeled_x, labeled_y, unlabeled_x, cfg)
    while state.iter < cfg.t_max and state.pool:
        before = len(state.placed)
        cotrain_round(state, val_x, val_y)
        if len(state.placed) == before:
            break
    if state_out is not None:
        state_out.append(state)
    return state.ensemble


def write_log_csv(state: CoTrainState, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "l1_size", "l2_size", "delta_max_1", "delta_max_2", "val_mse"])
        for r, n1, n2, d1, d2, val in state.log:
            w.writerow([r, n1, n2, repr(d1), repr(d2), repr(val)])


def predict_subchannels(model, sc, x, slots):
    """Score every (user, subchannel) of every BS with ``model`` and round to a feasible S."""
    rows = predict(model, encode_scenario(sc, x, slots))
    return project_to_feasible(sc, x, decode_subchannel_scores(sc, x, rows, slots))
