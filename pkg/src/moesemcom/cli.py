"""Command line front end.

Subcommands share state through the work directory so a full study is a
plain shell pipeline:

    moesemcom gen-data
    moesemcom train --expert normal
    moesemcom train --expert robust
    moesemcom train-gate
    moesemcom run-scenario --id a
    moesemcom report --out results.csv

State files are dataset.npz (samples) and checkpoint.smck (trained
modules), both fully determined by (config, master seed), so rerunning a
command reproduces its outputs byte for byte.

Exit codes: 0 success, 1 usage error, 2 runtime failure (missing expert or
file, bad config, damaged checkpoint).
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import os
import sys
from typing import Optional

import numpy as np

from .attacks import AttackSpec, evaluate_under_attack
from .checkpoint import load_checkpoint, restore, save_checkpoint
from .config import SimConfig, load_config
from .data import DatasetSplit, load_dataset, make_dataset, save_dataset
from .errors import ConfigError, MoeSemComError
from .experts.pipeline import compose_pipeline
from .experts.registry import COVERT, ExpertRegistry, NORMAL, PRIVATE, ROBUST
from .experts.training import (
    train_covert_compressor,
    train_normal,
    train_private,
    train_robust_sdm,
)
from .gating import GateModel, train_gate
from .metrics import emit_csv, parse_csv
from .prng import Stream
from .scenarios import SCENARIOS, run_scenario

_EAVES_INDEX_BASE = 10_000

_ATTACK_SPEC_KEYS = {"surface", "mode", "epsilon", "steps", "step_size",
                     "query_budget", "snr_db", "kinds", "rho"}


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; this front end reserves 2 for runtime
    failures, so usage problems exit 1 instead."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _global_flags() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=_u64, default=None,
                        help="master seed (overrides the config value)")
    shared.add_argument("--config", default=None, metavar="PATH",
                        help="JSON config file; defaults apply when omitted")
    shared.add_argument("--checkpoint", default=None, metavar="PATH",
                        help="checkpoint file (default: <workdir>/checkpoint.smck)")
    return shared


def build_parser():
    shared = _global_flags()
    parser = _Parser(prog="moesemcom", parents=[shared],
                     description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="COMMAND")

    p = sub.add_parser("gen-data", parents=[shared],
                       help="generate the synthetic dataset into the workdir")
    p.set_defaults(func=_cmd_gen_data)

    p = sub.add_parser("train", parents=[shared],
                       help="train one expert and add it to the checkpoint")
    p.add_argument("--expert", required=True,
                   choices=[NORMAL, ROBUST, PRIVATE, COVERT])
    p.add_argument("--rho", type=float, default=None,
                   help="compression ratio (required for the covert expert)")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("train-gate", parents=[shared],
                       help="fit the requirement gate over the trained experts")
    p.set_defaults(func=_cmd_train_gate)

    p = sub.add_parser("attack-eval", parents=[shared],
                       help="evaluate one pipeline under an attack spec")
    p.add_argument("--spec", required=True, metavar="JSON",
                   help="attack spec file; see the README for the schema")
    p.set_defaults(func=_cmd_attack_eval)

    p = sub.add_parser("run-scenario", parents=[shared],
                       help="run one evaluation scenario and write its CSV")
    p.add_argument("--id", required=True, choices=sorted(SCENARIOS),
                   dest="scenario_id")
    p.set_defaults(func=_cmd_run_scenario)

    p = sub.add_parser("report", parents=[shared],
                       help="merge scenario CSVs from the workdir into one file")
    p.add_argument("--out", required=True, metavar="CSV")
    p.set_defaults(func=_cmd_report)

    return parser


# ----------------------------------------------------------- shared state


def _setup(args) -> tuple:
    """(config, workdir, checkpoint path) for one invocation."""
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    workdir = cfg.paths["workdir"]
    os.makedirs(workdir, exist_ok=True)
    ckpt = args.checkpoint or os.path.join(workdir, "checkpoint.smck")
    return cfg, workdir, ckpt


def _dataset_path(workdir: str) -> str:
    return os.path.join(workdir, "dataset.npz")


def _dataset(cfg: SimConfig, workdir: str) -> DatasetSplit:
    """Load the saved dataset, or generate and save it on first use."""
    path = _dataset_path(workdir)
    if os.path.exists(path):
        return load_dataset(path)
    ds = make_dataset(k=cfg.dataset["k"], n_train=cfg.dataset["n_train"],
                      n_test=cfg.dataset["n_test"], seed=cfg.seed)
    save_dataset(ds, path)
    return ds


def _state(ckpt: str, k: int):
    """(registry, gate) from the checkpoint, or a fresh empty registry."""
    if os.path.exists(ckpt):
        registry, gate = restore(load_checkpoint(ckpt))
        if registry.k != k:
            raise ConfigError(
                f"checkpoint was trained for k={registry.k} classes but the "
                f"dataset has k={k}")
        return registry, gate
    return ExpertRegistry(k=k), None


# ------------------------------------------------------------ subcommands


def _cmd_gen_data(args) -> int:
    cfg, workdir, _ = _setup(args)
    ds = make_dataset(k=cfg.dataset["k"], n_train=cfg.dataset["n_train"],
                      n_test=cfg.dataset["n_test"], seed=cfg.seed)
    path = _dataset_path(workdir)
    save_dataset(ds, path)
    print(f"wrote {path} (k={ds.k} train={len(ds.x_train)} "
          f"test={len(ds.x_test)})")
    return 0


def _cmd_train(args) -> int:
    cfg, workdir, ckpt = _setup(args)
    ds = _dataset(cfg, workdir)
    registry, gate = _state(ckpt, ds.k)
    tr = cfg.training

    if args.expert == NORMAL:
        expert = train_normal(ds, cfg.seed, epochs=tr["epochs_normal"],
                              batch_size=tr["batch_size"], lr=tr["lr"])
    elif args.expert == ROBUST:
        expert = train_robust_sdm(ds, cfg.seed, epochs=tr["epochs_robust"],
                                  batch_size=tr["batch_size"], lr=tr["lr"])
    elif args.expert == PRIVATE:
        secret = Stream.from_root(cfg.seed, "private-secret").seed
        expert = train_private(ds, registry.get(NORMAL), secret, cfg.seed,
                               epochs=tr["epochs_private"],
                               batch_size=tr["batch_size"], lr=tr["lr"])
    else:
        expert = train_covert_compressor(
            ds, registry.get(NORMAL), args.rho, cfg.seed,
            epochs_auto=tr["epochs_covert_auto"],
            epochs_chan=tr["epochs_covert_chan"],
            batch_size=tr["batch_size"], lr=tr["lr"])

    registry.register(expert)
    save_checkpoint(registry, gate, ckpt)
    label = args.expert if args.rho is None else f"{args.expert} rho={args.rho:g}"
    print(f"trained {label} -> {ckpt}")
    return 0


def _cmd_train_gate(args) -> int:
    cfg, workdir, ckpt = _setup(args)
    ds = _dataset(cfg, workdir)
    registry, _ = _state(ckpt, ds.k)
    tr = cfg.training
    gate = GateModel.build(cfg.seed)
    train_gate(gate, registry, ds.x_train, n_samples=tr["gate_samples"],
               lam=tr["gate_lambda"], seed=cfg.seed, epochs=tr["gate_epochs"],
               batch_size=tr["batch_size"], lr=tr["gate_lr"])
    save_checkpoint(registry, gate, ckpt)
    print(f"trained gate -> {ckpt}")
    return 0


def _load_attack_spec(path: str, cfg: SimConfig) -> tuple:
    """(AttackSpec or None, kinds, rho, snr_db) from a JSON spec file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"attack spec not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"attack spec is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("attack spec root must be a JSON object")
    unknown = sorted(set(raw) - _ATTACK_SPEC_KEYS)
    if unknown:
        raise ConfigError(f"unknown attack spec keys: {unknown}")

    kinds = raw.pop("kinds", [NORMAL])
    if not isinstance(kinds, list) or not kinds:
        raise ConfigError("attack spec 'kinds' must be a non-empty list")
    rho = raw.pop("rho", None)
    snr_db = float(raw.pop("snr_db", 12.0))
    spec = None
    if raw:
        if "surface" not in raw:
            raise ConfigError("attack spec needs a 'surface' to attack")
        raw.setdefault("seed", Stream.from_root(cfg.seed, "attack-eval").seed)
        try:
            spec = AttackSpec(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad attack spec: {exc}") from None
    return spec, kinds, rho, snr_db


def _cmd_attack_eval(args) -> int:
    cfg, workdir, ckpt = _setup(args)
    ds = _dataset(cfg, workdir)
    registry, _ = _state(ckpt, ds.k)
    spec, kinds, rho, snr_db = _load_attack_spec(args.spec, cfg)

    pipe = compose_pipeline(registry, kinds, rho=rho)
    x = ds.x_test[:cfg.eval_samples]
    y = ds.y_test[:cfg.eval_samples]
    indices = np.arange(len(x)) + _EAVES_INDEX_BASE if pipe.private else None
    noise = Stream.from_root(cfg.seed, "attack-eval", "noise")
    res = evaluate_under_attack(pipe, x, y, snr_db, spec=spec,
                                noise_stream=noise, indices=indices)
    out = {"kinds": sorted(kinds), "snr_db": snr_db,
           "surface": spec.surface if spec else None,
           "accuracy": round(res["accuracy"], 6)}
    if rho is not None:
        out["rho"] = rho
    print(json.dumps(out, sort_keys=True))
    return 0


def _cmd_run_scenario(args) -> int:
    cfg, workdir, ckpt = _setup(args)
    ds = _dataset(cfg, workdir)
    registry, gate = _state(ckpt, ds.k)
    if gate is None:
        raise ConfigError("no trained gate in the checkpoint; "
                          "run train-gate first")
    rows = run_scenario(args.scenario_id, cfg, ds, registry, gate)
    path = os.path.join(workdir, f"scenario_{args.scenario_id}.csv")
    emit_csv(rows, path)
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _cmd_report(args) -> int:
    cfg, workdir, _ = _setup(args)
    paths = sorted(glob.glob(os.path.join(workdir, "scenario_*.csv")))
    if not paths:
        raise ConfigError(f"no scenario results under {workdir}; "
                          "run run-scenario first")
    rows = []
    for path in paths:
        rows.extend(parse_csv(path))
    emit_csv(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows from {len(paths)} scenarios)")
    return 0


# ------------------------------------------------------------------ entry


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "train" and args.expert == COVERT and args.rho is None:
        parser.error("train --expert covert requires --rho")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"moesemcom: error: {exc}", file=sys.stderr)
        return 2
    except MoeSemComError as exc:
        print(f"moesemcom: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
