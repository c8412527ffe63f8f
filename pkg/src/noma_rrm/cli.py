"""Command line entry point: ``noma-rrm {gen,train,eval,oracle}``.

Exit codes: 0 success, 1 configuration error, 2 infeasibility, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline, powerctl
from .cotrain import CoTrainConfig, cotrain, write_log_csv
from .errors import ConfigError, FormatError, InfeasibleError
from .netmodel import check_constraints, energy_efficiency, generate_scenario, read_config_file, save_scenario, sum_rate
from .neural import save_model

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_CONFIG)


def _settings(args):
    """Scenario and experiment configuration from ``--scale`` and ``--config``."""
    exp = pipeline.SCALES[args.scale]
    if args.config is None:
        return exp
    try:
        scenario, extras = read_config_file(args.config, exp.scenario)
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    known = {f.name for f in dataclasses.fields(pipeline.ExperimentConfig)}
    unknown = sorted(set(extras) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return pipeline.experiment_config_from(extras, exp.replace(scenario=scenario))


def _write_loss(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_mse"])
        for i, v in enumerate(history, 1):
            w.writerow([i, repr(float(v))])


def cmd_gen(args, exp, out):
    n = args.n if args.n is not None else (exp.n_unlabeled if args.kind == "unlabeled" else exp.n_labeled)
    if args.kind == "unlabeled":
        ds = pipeline.generate_unlabeled(exp.scenario, n, args.seed)
    else:
        ds = pipeline.generate_labeled(exp.scenario, n, args.kind, args.seed)
    path = out / f"dataset_{args.kind}.bin"
    pipeline.save_dataset(ds, path)
    print(f"wrote {len(ds)} rows to {path}")


def _labeled(args, exp, kind):
    if args.data:
        ds = pipeline.load_dataset(args.data)
        if ds.kind != kind:
            raise ConfigError(f"{args.data} holds a {ds.kind} dataset, need {kind}")
        return ds
    n = args.n if args.n is not None else exp.n_labeled
    return pipeline.generate_labeled(exp.scenario, n, kind, args.seed)


def cmd_train(args, exp, out):
    if args.model == "power-dnn":
        ds = _labeled(args, exp, "power")
        model, hist = pipeline.train_power_net(ds, epochs=exp.power_epochs, seed=args.seed)
        save_model(model, out / "power_dnn.ckpt")
        _write_loss(out / "power_dnn_loss.csv", hist)
    elif args.model == "subchannel-dnn":
        ds = _labeled(args, exp, "subchannel")
        model, hist = pipeline.train_subchannel_net(ds, epochs=exp.subchannel_epochs, seed=args.seed)
        save_model(model, out / "subchannel_dnn.ckpt")
        _write_loss(out / "subchannel_dnn_loss.csv", hist)
    else:
        ds = _labeled(args, exp, "subchannel")
        if args.unlabeled:
            unl = pipeline.load_dataset(args.unlabeled)
        else:
            unl = pipeline.generate_unlabeled(exp.scenario, exp.n_unlabeled, args.seed + 1)
        cfg = CoTrainConfig(pool_size=exp.pool_size, t_max=exp.t_max,
                            initial_epochs=exp.subchannel_epochs, seed=args.seed)
        states = []
        ens = cotrain(ds.features, ds.labels, unl.features, cfg, state_out=states)
        for k, m in enumerate(ens.models, 1):
            save_model(m, out / f"cotrain_h{k}.ckpt")
        write_log_csv(states[0], out / "cotrain_rounds.csv")
    print(f"trained {args.model} into {out}")


def cmd_eval(args, exp, out):
    names = pipeline.EXPERIMENTS if args.name == "all" else [args.name]
    ws = pipeline.Workspace(exp, args.seed)
    for name in names:
        res = pipeline.run_experiment(name, exp, args.seed, out, ws)
        brief = {k: v for k, v in res.items() if k in ("ee_ratio", "feasible_fraction", "gradient_dominates")}
        print(name, brief)


def cmd_oracle(args, exp, out):
    sc = generate_scenario(exp.scenario, args.seed)
    r = pipeline.classical_pipeline(sc)
    save_scenario(sc, out / "scenario.bin")
    with open(out / "allocation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bs", "user", "subchannel", "power_w"])
        a = r.s * r.x[:, :, None]
        for b, m, n in zip(*np.nonzero(a)):
            w.writerow([b, m, n, repr(float(r.p[b, m, n]))])
    powerctl.write_trace_csv(r.trace, out / "power_trace.csv")
    rep = check_constraints(sc, r.x, r.s, r.p)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["quantity", "value"])
        w.writerow(["sum_rate_bits_per_second", repr(sum_rate(sc, r.x, r.s, r.p))])
        w.writerow(["ee_bits_per_joule", repr(energy_efficiency(sc, r.x, r.s, r.p))])
        for b in range(sc.n_bs):
            w.writerow([f"bs{b}_users", int(r.x[b].sum())])
        for name in ("c1", "c2", "c3", "c4", "c6"):
            w.writerow([f"{name}_passed", int(getattr(rep, name).passed)])
        w.writerow(["c5_satisfaction", repr(rep.c5_satisfaction)])
    if not rep.passed(pipeline.HARD_CONSTRAINTS):
        raise InfeasibleError(f"oracle allocation violates {', '.join(rep.failures())}")
    print(f"oracle run written to {out}")


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file overriding scenario/experiment settings")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--scale", choices=sorted(pipeline.SCALES), default="desk")

    p = _Parser(prog="noma-rrm", description="NOMA HetNet resource allocation toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    g = sub.add_parser("gen", parents=[common], help="generate a dataset")
    g.add_argument("--kind", choices=pipeline.KINDS, default="subchannel")
    g.add_argument("--n", type=int, help="number of scenarios")
    t = sub.add_parser("train", parents=[common], help="train a learned allocator")
    t.add_argument("model", choices=("power-dnn", "subchannel-dnn", "cotrain"))
    t.add_argument("--data", help="labeled dataset file (generated when omitted)")
    t.add_argument("--unlabeled", help="unlabeled dataset file for cotrain")
    t.add_argument("--n", type=int, help="number of scenarios when generating")
    e = sub.add_parser("eval", parents=[common], help="run an experiment")
    e.add_argument("name", choices=(*pipeline.EXPERIMENTS, "all"))
    sub.add_parser("oracle", parents=[common], help="run one scenario through the classical chain")
    return p


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "oracle": cmd_oracle}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        exp = _settings(args)
        if getattr(args, "n", None) is not None and args.n < 0:
            raise ConfigError("--n must be >= 0")
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise FormatError(f"cannot create {out}: {exc}") from exc
        COMMANDS[args.command](args, exp, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (FormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
