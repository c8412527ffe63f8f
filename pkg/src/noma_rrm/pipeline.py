"""Datasets, the classical oracle chain, learned-allocator glue and the experiment runners.

Every random draw is derived from a master seed through ``SeedSequence``, so a
(name, config, seed) triple reproduces every emitted file byte for byte.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import assoc, features, matching, powerctl
from .cotrain import CoTrainConfig, cotrain, predict, predict_subchannels, write_log_csv
from .errors import (ChecksumError, ConfigError, InfeasibleError,
                     TruncatedFileError, VersionMismatchError)
from .netmodel import (DESK_SCALE, REFERENCE, Scenario, ScenarioConfig,
                       check_constraints, energy_efficiency, generate_scenario,
                       sum_rate)
from .neural import (POWER_NET, SUBCHANNEL_NET1, TrainConfig,
                     build_mlp, new_train_state, train)

log = logging.getLogger(__name__)

KINDS = ("subchannel", "power", "unlabeled")
HARD_CONSTRAINTS = ("c1", "c2", "c4", "c6")
MAX_RETRIES = 10


def sample_seed(seed, index, attempt=0):
    """Scenario seed of sample ``index`` (retry ``attempt``) under master seed ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(index), int(attempt)]).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# Classical chain

@dataclass
class OracleResult:
    sc: Scenario
    x: np.ndarray
    s: np.ndarray
    p: np.ndarray
    trace: list
    x_max_sinr: np.ndarray
    timing: dict = field(default_factory=dict)


def lagrangian_association(sc: Scenario, acfg=assoc.AssocSolverConfig()):
    """Returns ``(x_lagrangian, x_max_sinr)``.

    The dual iterations need an allocation to score against: Max-SINR capped to
    the per-BS user limit, matched, with equal power.
    """
    x_ms = assoc.max_sinr_association(sc)
    x0 = assoc.enforce_caps(assoc.reference_sinr(sc), x_ms, assoc.user_caps(sc))
    s0 = matching.two_side_matching(sc, x0)
    p0 = powerctl.equal_power(sc, x0, s0)
    x, _, _ = assoc.solve_user_association(sc, s0, p0, acfg)
    return x, x_ms


def classical_pipeline(sc: Scenario, gcfg=powerctl.GradientConfig(),
                       acfg=assoc.AssocSolverConfig()) -> OracleResult:
    """Lagrangian association, then two-sided matching, then gradient power control."""
    timing = {}
    t0 = time.perf_counter()
    x, x_ms = lagrangian_association(sc, acfg)
    t1 = time.perf_counter()
    s = matching.two_side_matching(sc, x)
    t2 = time.perf_counter()
    p, trace = powerctl.solve_power(sc, x, s, gcfg)
    t3 = time.perf_counter()
    timing.update(association=t1 - t0, matching=t2 - t1, power=t3 - t2)
    return OracleResult(sc, x, s, p, trace, x_ms, timing)


def run_oracles(config: ScenarioConfig, n, seed, gcfg=powerctl.GradientConfig()):
    """Oracle results for ``n`` scenarios; infeasible draws are replaced (bounded retries)."""
    out = []
    for i in range(n):
        for attempt in range(MAX_RETRIES):
            sc = generate_scenario(config, sample_seed(seed, i, attempt))
            try:
                out.append(classical_pipeline(sc, gcfg))
                break
            except InfeasibleError as exc:
                log.warning("sample %d attempt %d infeasible: %s", i, attempt, exc)
        else:
            raise InfeasibleError(f"sample {i}: no feasible scenario in {MAX_RETRIES} draws")
    return out


# ---------------------------------------------------------------------------
# Datasets

@dataclass
class Dataset:
    """Per-BS samples. ``seeds[i]`` is the scenario seed and ``bs[i]`` the BS of row i."""
    kind: str
    features: np.ndarray
    labels: np.ndarray | None
    mean: np.ndarray
    std: np.ndarray
    seeds: np.ndarray
    bs: np.ndarray
    slots: int
    n_subchannels: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if (self.labels is None) != (self.kind == "unlabeled"):
            raise ConfigError("labels must be present iff the dataset is labeled")
        if self.features.shape[1] != features.feature_dim(self.slots, self.n_subchannels):
            raise ConfigError("feature width does not match slots and subchannels")

    def __len__(self):
        return len(self.features)

    @property
    def feature_dim(self):
        return self.features.shape[1]

    @property
    def scenario_config(self):
        return ScenarioConfig(**self.config) if self.config else None

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        arrays = ("features", "mean", "std", "seeds", "bs")
        same = all(np.array_equal(getattr(self, a), getattr(other, a)) for a in arrays)
        labels = ((self.labels is None and other.labels is None) or
                  (self.labels is not None and other.labels is not None
                   and np.array_equal(self.labels, other.labels)))
        return (same and labels and self.kind == other.kind and self.slots == other.slots
                and self.n_subchannels == other.n_subchannels and self.config == other.config)


def _dataset(kind, config, rows, labels, seeds, bs):
    slots = features.n_slots(config)
    dim = features.feature_dim(slots, config.n_subchannels)
    f = np.vstack(rows) if rows else np.zeros((0, dim))
    if labels is not None:
        width = slots * config.n_subchannels if kind == "subchannel" else slots
        labels = np.vstack(labels) if labels else np.zeros((0, width))
    mean, std = features.standardize_stats(f)
    return Dataset(kind, f, labels, mean, std, np.asarray(seeds, dtype=np.uint64),
                   np.asarray(bs, dtype=np.int32), slots, config.n_subchannels,
                   dataclasses.asdict(config))


def datasets_from_oracles(config, results):
    """Subchannel and power datasets sharing the same oracle runs."""
    slots = features.n_slots(config)
    rows, sub, pw, seeds, bs = [], [], [], [], []
    for r in results:
        rows.append(features.encode_scenario(r.sc, r.x, slots))
        sub.append(features.subchannel_labels(r.sc, r.x, r.s, slots))
        pw.append(features.power_labels(r.sc, r.x, r.p, slots))
        seeds += [r.sc.seed] * r.sc.n_bs
        bs += list(range(r.sc.n_bs))
    return (_dataset("subchannel", config, rows, sub, seeds, bs),
            _dataset("power", config, rows, pw, seeds, bs))


def generate_labeled(config: ScenarioConfig, n_samples, kind, seed):
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    if kind not in ("subchannel", "power"):
        raise ConfigError(f"labeled kind must be subchannel or power, got {kind!r}")
    sub, pw = datasets_from_oracles(config, run_oracles(config, n_samples, seed))
    return sub if kind == "subchannel" else pw


def generate_unlabeled(config: ScenarioConfig, n_samples, seed):
    """Gain features only. Users are grouped by capped Max-SINR association (no oracle runs)."""
    slots = features.n_slots(config)
    rows, seeds, bs = [], [], []
    for i in range(n_samples):
        sc = generate_scenario(config, sample_seed(seed, i))
        x = assoc.enforce_caps(assoc.reference_sinr(sc), assoc.max_sinr_association(sc), assoc.user_caps(sc))
        rows.append(features.encode_scenario(sc, x, slots))
        seeds += [sc.seed] * sc.n_bs
        bs += list(range(sc.n_bs))
    return _dataset("unlabeled", config, rows, None, seeds, bs)


_DS_MAGIC = b"NOMADSET"
_DS_VERSION = 1


def save_dataset(ds: Dataset, path):
    header = {
        "kind": ds.kind, "rows": len(ds), "feature_dim": ds.feature_dim,
        "label_dim": 0 if ds.labels is None else ds.labels.shape[1],
        "slots": ds.slots, "n_subchannels": ds.n_subchannels, "config": ds.config,
    }
    hbytes = json.dumps(header, sort_keys=True).encode()
    parts = [_DS_MAGIC, struct.pack("<II", _DS_VERSION, len(hbytes)), hbytes,
             np.ascontiguousarray(ds.features, "<f8").tobytes()]
    if ds.labels is not None:
        parts.append(np.ascontiguousarray(ds.labels, "<f8").tobytes())
    parts += [np.ascontiguousarray(ds.mean, "<f8").tobytes(), np.ascontiguousarray(ds.std, "<f8").tobytes(),
              np.ascontiguousarray(ds.seeds, "<u8").tobytes(), np.ascontiguousarray(ds.bs, "<i4").tobytes()]
    data = b"".join(parts)
    Path(path).write_bytes(data + hashlib.sha256(data).digest())


def load_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    if raw[:8] != _DS_MAGIC:
        raise VersionMismatchError("not a dataset file")
    if len(raw) < 16:
        raise TruncatedFileError("dataset header truncated")
    version, hlen = struct.unpack_from("<II", raw, 8)
    if version != _DS_VERSION:
        raise VersionMismatchError(f"dataset version {version}, expected {_DS_VERSION}")
    try:
        h = json.loads(raw[16:16 + hlen])
    except ValueError as exc:
        raise TruncatedFileError("dataset header unreadable") from exc
    n, d, k = h["rows"], h["feature_dim"], h["label_dim"]
    need = 16 + hlen + 8 * (n * d + n * k + 2 * d + n) + 4 * n + 32
    if len(raw) < need:
        raise TruncatedFileError(f"dataset file has {len(raw)} bytes, header announces {need}")
    if len(raw) != need or hashlib.sha256(raw[:-32]).digest() != raw[-32:]:
        raise ChecksumError("dataset checksum mismatch")
    off = 16 + hlen

    def take(count, dtype, width):
        nonlocal off
        arr = np.frombuffer(raw, dtype, count=count, offset=off).copy()
        off += width * count
        return arr

    feats = take(n * d, "<f8", 8).reshape(n, d).astype(float)
    labels = take(n * k, "<f8", 8).reshape(n, k).astype(float) if h["kind"] != "unlabeled" else None
    mean = take(d, "<f8", 8).astype(float)
    std = take(d, "<f8", 8).astype(float)
    seeds = take(n, "<u8", 8).astype(np.uint64)
    bs = take(n, "<i4", 4).astype(np.int32)
    return Dataset(h["kind"], feats, labels, mean, std, seeds, bs, h["slots"], h["n_subchannels"], h["config"])


# ---------------------------------------------------------------------------
# CDFs

@dataclass
class CdfSeries:
    values: np.ndarray
    fractions: np.ndarray
    metric: str = ""
    scheme: str = ""

    def quantile(self, q):
        i = int(np.searchsorted(self.fractions, q - 1e-12))
        return float(self.values[min(i, len(self.values) - 1)])

    @property
    def median(self):
        return self.quantile(0.5)


def compute_cdf(values, metric="", scheme=""):
    """Empirical CDF; tied values collapse into one step at the last of them."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if not v.size:
        raise ConfigError("empty input")
    frac = np.arange(1, v.size + 1) / v.size
    last = np.append(v[1:] != v[:-1], True)
    return CdfSeries(v[last], frac[last], metric, scheme)


def dominates(a: CdfSeries, b: CdfSeries):
    """First-order stochastic dominance of ``a`` over ``b`` (F_a <= F_b everywhere)."""
    grid = np.union1d(a.values, b.values)
    fa = np.concatenate([[0.0], a.fractions])[np.searchsorted(a.values, grid, side="right")]
    fb = np.concatenate([[0.0], b.fractions])[np.searchsorted(b.values, grid, side="right")]
    return bool(np.all(fa <= fb + 1e-12))


UNITS = {"sum_rate": "bits_per_second", "ee": "bits_per_joule"}


def write_cdf_csv(cdf: CdfSeries, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"{cdf.metric}_{UNITS.get(cdf.metric, 'value')}", "cdf_fraction"])
        for v, f in zip(cdf.values, cdf.fractions):
            w.writerow([repr(float(v)), repr(float(f))])


# ---------------------------------------------------------------------------
# Learned allocators

def train_power_net(ds: Dataset, arch=POWER_NET, epochs=None, seed=0, callback=None):
    if ds.kind != "power" or not len(ds):
        raise ConfigError("need a nonempty power dataset")
    model = build_mlp(ds.feature_dim, arch.hidden, ds.labels.shape[1], arch.keep, seed=seed)
    model.set_normalization(ds.mean, ds.std)
    t = arch.train
    cfg = TrainConfig(t.learn_rate, t.batch_size, epochs or t.epochs, t.optimizer, seed)
    return train(model, ds.features, ds.labels, cfg, new_train_state(cfg), callback=callback)


def train_subchannel_net(ds: Dataset, arch=SUBCHANNEL_NET1, epochs=None, seed=0):
    if ds.kind != "subchannel" or not len(ds):
        raise ConfigError("need a nonempty subchannel dataset")
    model = build_mlp(ds.feature_dim, arch.hidden, ds.labels.shape[1], arch.keep, seed=seed)
    model.set_normalization(ds.mean, ds.std)
    t = arch.train
    return train(model, ds.features, ds.labels,
                 TrainConfig(t.learn_rate, t.batch_size, epochs or t.epochs, t.optimizer, seed))


def project_power(sc, x, s, p):
    """Clamp to [0, p_max], rescale each BS to its budget, then scale under the interference caps."""
    p = np.clip(np.asarray(p, dtype=float), 0.0, sc.p_max[:, None, None])
    return powerctl.interference_project(sc, x, s, p)


def predict_power(model, sc, x, s, slots, rows=None):
    if rows is None:
        rows = predict(model, features.encode_scenario(sc, x, slots))
    return project_power(sc, x, s, features.decode_power(sc, x, s, rows, slots))


def equal_projected(sc, x, s):
    return powerctl.interference_project(sc, x, s, powerctl.equal_power(sc, x, s))


def random_projected(sc, x, s, seed):
    return powerctl.interference_project(sc, x, s, powerctl.random_power(sc, x, s, seed))


def hard_feasible(sc, x, s, p):
    return check_constraints(sc, x, s, p).passed(HARD_CONSTRAINTS)


# ---------------------------------------------------------------------------
# Experiments

@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig = DESK_SCALE
    n_labeled: int = 2000
    n_unlabeled: int = 5000
    n_test: int = 1000
    n_fig4: int = 20
    fig4_scenario: ScenarioConfig = REFERENCE
    cotrain_labeled: int | None = None      # None: use all labeled samples for co-training too
    power_epochs: int | None = None         # None: architecture default
    subchannel_epochs: int | None = None
    pool_size: int = 10
    t_max: int = 5

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


SCALES = {
    "desk": ExperimentConfig(),
    "paper": ExperimentConfig(scenario=REFERENCE, n_labeled=5000, n_unlabeled=5000, n_test=5000,
                              pool_size=100, t_max=50),
}
EXPERIMENTS = ("fig4", "fig5", "fig6", "fig7", "fig8")


def experiment_config_from(extras, base: ExperimentConfig):
    """Apply integer overrides from the extras of a config file (e.g. ``n_test = 50``)."""
    changes = {}
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in extras and "scenario" not in f.name:
            value = extras[f.name]
            try:
                changes[f.name] = None if value.lower() == "none" else int(value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {f.name}: {value!r}") from exc
    return base.replace(**changes)


class Workspace:
    """Lazily built oracle runs, datasets and models shared by the experiments of one seed."""

    def __init__(self, exp: ExperimentConfig, seed):
        self.exp = exp
        self.seed = int(seed)
        self.slots = features.n_slots(exp.scenario)
        self._cache = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    def train_results(self):
        return self._get("train", lambda: run_oracles(self.exp.scenario, self.exp.n_labeled, self.seed * 4 + 1))

    def test_results(self):
        return self._get("test", lambda: run_oracles(self.exp.scenario, self.exp.n_test, self.seed * 4 + 2))

    def datasets(self):
        return self._get("ds", lambda: datasets_from_oracles(self.exp.scenario, self.train_results()))

    def unlabeled(self):
        return self._get("unl", lambda: generate_unlabeled(self.exp.scenario, self.exp.n_unlabeled,
                                                           self.seed * 4 + 3))

    def power_model(self, callback=None):
        key = "power_model"
        if key in self._cache and callback is None:
            return self._cache[key]
        model, hist = train_power_net(self.datasets()[1], epochs=self.exp.power_epochs,
                                      seed=self.seed, callback=callback)
        self._cache[key] = model
        return model

    def cotrain_cfg(self):
        return CoTrainConfig(pool_size=self.exp.pool_size, t_max=self.exp.t_max,
                             initial_epochs=self.exp.subchannel_epochs, seed=self.seed)

    def subchannel_models(self):
        """(single learner, co-trained ensemble). The single learner is the better initial one on training data."""
        def build():
            sub = self.datasets()[0]
            n = len(sub) if self.exp.cotrain_labeled is None else self.exp.cotrain_labeled * self.exp.scenario.n_bs
            lx, ly = sub.features[:n], sub.labels[:n]
            states = []
            ens = cotrain(lx, ly, self.unlabeled().features, self.cotrain_cfg(), state_out=states)
            initial = states[0].initial_models
            errs = [np.mean((predict(m, lx) - ly) ** 2) for m in initial]
            return initial[int(np.argmin(errs))], ens, states[0]
        return self._get("sub_models", build)


def _summary_rows(name, metric, values, oracle=None):
    rows = []
    for scheme, vals in values.items():
        vals = np.asarray(vals, dtype=float)
        ratio = float(np.mean(vals / np.asarray(oracle))) if oracle is not None else float("nan")
        rows.append([name, scheme, metric, repr(float(vals.mean())), repr(float(np.median(vals))), repr(ratio)])
    return rows


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


SUMMARY_HEADER = ["experiment", "scheme", "metric", "mean", "median", "mean_ratio_to_oracle"]


def _emit_cdfs(out, name, metric, values):
    cdfs = {}
    for scheme, vals in values.items():
        cdfs[scheme] = compute_cdf(vals, metric, scheme)
        write_cdf_csv(cdfs[scheme], out / f"{name}_{scheme}_{metric}.csv")
    return cdfs


def _fig4(ws: Workspace, out):
    cfg = ws.exp.fig4_scenario
    rows, macro = [], {"max_sinr": [], "lagrangian": []}
    for i in range(ws.exp.n_fig4):
        sc = generate_scenario(cfg, sample_seed(ws.seed, i))
        x, x_ms = lagrangian_association(sc)
        for scheme, xx in (("max_sinr", x_ms), ("lagrangian", x)):
            counts = xx.sum(axis=1)
            macro[scheme].append(int(counts[sc.macro_index]))
            rows.append([i, sc.seed, scheme] + [int(c) for c in counts])
    _write_rows(out / "fig4_users_per_bs.csv",
                ["index", "scenario_seed", "scheme"] + [f"bs{b}_users" for b in range(cfg.n_bs)], rows)
    _write_rows(out / "fig4_summary.csv", ["scheme", "mean_macro_users", "min_macro_users", "max_macro_users"],
                [[k, repr(float(np.mean(v))), min(v), max(v)] for k, v in macro.items()])
    return {"macro_users": {k: list(v) for k, v in macro.items()}}


def _fig5(ws: Workspace, out):
    single, ens, state = ws.subchannel_models()
    vals = {"matching": [], "single_dnn": [], "semi_supervised": []}
    feasible = 0
    for r in ws.test_results():
        sc, x = r.sc, r.x
        for scheme, s in (("matching", r.s), ("single_dnn", predict_subchannels(single, sc, x, ws.slots)),
                          ("semi_supervised", predict_subchannels(ens, sc, x, ws.slots))):
            p = equal_projected(sc, x, s)
            feasible += hard_feasible(sc, x, s, p)
            vals[scheme].append(sum_rate(sc, x, s, p))
    _emit_cdfs(out, "fig5", "sum_rate", vals)
    _write_rows(out / "fig5_summary.csv", SUMMARY_HEADER,
                _summary_rows("fig5", "sum_rate", vals, vals["matching"]))
    write_log_csv(state, out / "fig5_cotrain_rounds.csv")
    return {"values": vals, "feasible_fraction": feasible / (3 * len(ws.test_results()))}


def _power_rows(ws, model):
    tests = ws.test_results()
    feats = np.vstack([features.encode_scenario(r.sc, r.x, ws.slots) for r in tests])
    rows = predict(model, feats)
    B = ws.exp.scenario.n_bs
    return [rows[i * B:(i + 1) * B] for i in range(len(tests))]


def _fig6(ws: Workspace, out):
    model = ws.power_model()
    vals = {"gradient": [], "dnn": []}
    feasible = 0
    for r, rows in zip(ws.test_results(), _power_rows(ws, model)):
        p_hat = predict_power(model, r.sc, r.x, r.s, ws.slots, rows)
        feasible += hard_feasible(r.sc, r.x, r.s, p_hat) + hard_feasible(r.sc, r.x, r.s, r.p)
        vals["gradient"].append(energy_efficiency(r.sc, r.x, r.s, r.p))
        vals["dnn"].append(energy_efficiency(r.sc, r.x, r.s, p_hat))
    _emit_cdfs(out, "fig6", "ee", vals)
    _write_rows(out / "fig6_summary.csv", SUMMARY_HEADER, _summary_rows("fig6", "ee", vals, vals["gradient"]))
    ratio = float(np.mean(np.asarray(vals["dnn"]) / np.asarray(vals["gradient"])))
    return {"values": vals, "ee_ratio": ratio, "feasible_fraction": feasible / (2 * len(ws.test_results()))}


def _fig7(ws: Workspace, out):
    tests = ws.test_results()
    curve = []

    def on_epoch(epoch, model):
        ees = [energy_efficiency(r.sc, r.x, r.s, predict_power(model, r.sc, r.x, r.s, ws.slots, rows))
               for r, rows in zip(tests, _power_rows(ws, model))]
        curve.append((epoch + 1, float(np.mean(ees))))

    ws.power_model(callback=on_epoch)
    oracle = float(np.mean([energy_efficiency(r.sc, r.x, r.s, r.p) for r in tests]))
    _write_rows(out / "fig7_ee_vs_epoch.csv", ["epoch", "mean_ee_bits_per_joule", "oracle_mean_ee_bits_per_joule"],
                [[e, repr(v), repr(oracle)] for e, v in curve])
    return {"curve": curve, "oracle": oracle}


def _fig8(ws: Workspace, out):
    power = ws.power_model()
    _, ens, _ = ws.subchannel_models()
    vals = {k: [] for k in ("gradient", "equal", "random", "dnn_power", "semi_supervised_dnn_power")}
    feasible = 0
    for i, (r, rows) in enumerate(zip(ws.test_results(), _power_rows(ws, power))):
        sc, x, s = r.sc, r.x, r.s
        s_ens = predict_subchannels(ens, sc, x, ws.slots)
        allocs = {
            "gradient": (s, r.p),
            "equal": (s, equal_projected(sc, x, s)),
            "random": (s, random_projected(sc, x, s, sample_seed(ws.seed, i, 99))),
            "dnn_power": (s, predict_power(power, sc, x, s, ws.slots, rows)),
            "semi_supervised_dnn_power": (s_ens, predict_power(power, sc, x, s_ens, ws.slots, rows)),
        }
        for scheme, (ss, pp) in allocs.items():
            feasible += hard_feasible(sc, x, ss, pp)
            vals[scheme].append(energy_efficiency(sc, x, ss, pp))
    cdfs = _emit_cdfs(out, "fig8", "ee", vals)
    _write_rows(out / "fig8_summary.csv", SUMMARY_HEADER, _summary_rows("fig8", "ee", vals, vals["gradient"]))
    dom = {k: dominates(cdfs["gradient"], cdfs[k]) for k in ("equal", "random")}
    return {"values": vals, "gradient_dominates": dom, "feasible_fraction": feasible / (5 * len(ws.test_results()))}


_RUNNERS = {"fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7, "fig8": _fig8}


def run_experiment(name, exp: ExperimentConfig, seed, out_dir, workspace: Workspace | None = None):
    """Run one experiment and write its CSVs under ``out_dir``. Returns a dict of key results."""
    if name not in _RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {', '.join(EXPERIMENTS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ws = workspace or Workspace(exp, seed)
    return _RUNNERS[name](ws, out)
