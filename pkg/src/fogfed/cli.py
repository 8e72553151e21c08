"""Command-line driver: simulate, ledger verify, heterogeneity, train-local, aggregate."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys

from .dataset import load_har, synth_dataset
from .fedcore import LocalUpdate, ScalingPolicy, federated_fuse
from .ledger import ChainFormatError, load_chain, save_chain, verify_chain
from .neuralnet.network import (
    default_arch,
    evaluate,
    init_weights,
    make_cnn_arch,
    train_local,
)
from .neuralnet.weights import deserialize_weights, serialize_weights
from .simnet import (
    SimConfig,
    UpdateTimeModel,
    confusion_to_csv,
    heterogeneity,
    reports_to_csv,
    run_experiment,
)

# flag > config file > default, resolved per key
_DEFAULTS = {
    "clients": 1,
    "rounds": 1,
    "epochs": 10,
    "batch": 8,
    "lr": 0.01,
    "momentum": 0.9,
    "boost": 2.0,
    "seed": 0,
    "partition": "replicate",
    "trusted_ids": None,
    "intruder_ids": [],
    "identical_client_seeds": False,
    "update_times": {"mode": "lognormal", "mu": 0.0, "sigma": 0.25},
    "dataset": None,
    "sweep": None,
    "out_dir": "out",
    "chain_file": None,
    "arch": None,
}

_NESTED_KEYS = {
    "update_times": {"mode", "values", "mu", "sigma"},
    "dataset": {"kind", "dir", "n", "d", "c", "seed"},
    "arch": {"conv_filters", "conv_kernels", "pool", "dense_units"},
}


class ConfigError(ValueError):
    pass


def load_config_file(path: str) -> dict:
    """Strict JSON config: unknown keys are rejected, known nested keys checked too."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    for key, value in raw.items():
        if key not in _DEFAULTS:
            raise ConfigError(f"unknown config key {key!r} in {path}")
        if key in _NESTED_KEYS and value is not None:
            if not isinstance(value, dict):
                raise ConfigError(f"config key {key!r} must be an object")
            for sub in value:
                if sub not in _NESTED_KEYS[key]:
                    raise ConfigError(f"unknown config key {key!r}.{sub!r} in {path}")
    return raw


def _resolve(file_cfg: dict, flag_values: dict) -> dict:
    resolved = dict(_DEFAULTS)
    resolved.update(file_cfg)
    for key, value in flag_values.items():
        if value is not None:
            resolved[key] = value
    return resolved


def _build_sim_config(resolved: dict) -> SimConfig:
    ut = resolved["update_times"] or _DEFAULTS["update_times"]
    model = UpdateTimeModel(
        mode=ut.get("mode", "lognormal"),
        values=tuple(ut["values"]) if ut.get("values") else None,
        mu=float(ut.get("mu", 0.0)),
        sigma=float(ut.get("sigma", 0.25)),
    )
    partition = resolved["partition"]
    if partition not in ("replicate", "iid"):
        raise ConfigError(f"partition must be 'replicate' or 'iid', got {partition!r}")
    trusted = resolved["trusted_ids"]
    return SimConfig(
        client_count=int(resolved["clients"]),
        rounds=int(resolved["rounds"]),
        epochs=int(resolved["epochs"]),
        batch=int(resolved["batch"]),
        lr=float(resolved["lr"]),
        momentum=float(resolved["momentum"]),
        boost=float(resolved["boost"]),
        seed=int(resolved["seed"]),
        shard_mode="replicate" if partition == "replicate" else "iid-partition",
        trusted_ids=None if trusted is None else frozenset(int(i) for i in trusted),
        intruder_ids=tuple(int(i) for i in resolved["intruder_ids"]),
        update_times=model,
        identical_client_seeds=bool(resolved["identical_client_seeds"]),
        sweep=tuple(int(n) for n in resolved["sweep"]) if resolved["sweep"] else None,
    )


def _load_dataset(resolved: dict):
    spec = resolved["dataset"]
    if spec is None:
        raise ConfigError("no dataset configured; set --data-dir or a 'dataset' config entry")
    kind = spec.get("kind")
    if kind == "har":
        dir_path = spec.get("dir")
        if not dir_path:
            raise ConfigError("dataset.kind 'har' requires a 'dir' path")
        if not os.path.isdir(dir_path):
            raise ConfigError(f"dataset directory does not exist: {dir_path}")
        return load_har(dir_path)
    if kind == "synthetic":
        return synth_dataset(
            seed=int(spec.get("seed", resolved["seed"])),
            n=int(spec.get("n", 600)),
            d=int(spec.get("d", 20)),
            c=int(spec.get("c", 6)),
        )
    raise ConfigError(f"dataset.kind must be 'har' or 'synthetic', got {kind!r}")


def _build_arch(resolved: dict, d: int, c: int):
    arch_cfg = resolved["arch"]
    if arch_cfg is None:
        return None
    return make_cnn_arch(
        d,
        c,
        conv_filters=tuple(arch_cfg.get("conv_filters", (32, 16))),
        conv_kernels=tuple(arch_cfg.get("conv_kernels", (7, 5))),
        pool=int(arch_cfg.get("pool", 2)),
        dense_units=tuple(arch_cfg.get("dense_units", (64,))),
    )


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _sha256_file(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def cmd_simulate(args) -> int:
    file_cfg = load_config_file(args.config) if args.config else {}
    flags = {
        "clients": args.clients,
        "rounds": args.rounds,
        "epochs": args.epochs,
        "batch": args.batch,
        "lr": args.lr,
        "boost": args.boost,
        "seed": args.seed,
        "partition": args.partition,
        "out_dir": args.out_dir,
    }
    if args.data_dir is not None:
        flags["dataset"] = {"kind": "har", "dir": args.data_dir}
    resolved = _resolve(file_cfg, flags)

    train, test = _load_dataset(resolved)
    config = _build_sim_config(resolved)
    c = int(max(train.labels.max(), test.labels.max())) + 1
    arch = _build_arch(resolved, train.n_features, c)
    sweep = config.sweep if config.sweep is not None else (config.client_count,)

    result = run_experiment(config, train, test, sweep=sweep, arch=arch)

    out_dir = resolved["out_dir"]
    os.makedirs(out_dir, exist_ok=True)
    artifacts = []

    rounds_path = os.path.join(out_dir, "rounds.csv")
    _write(rounds_path, reports_to_csv(result.reports))
    artifacts.append(rounds_path)

    for entry in result.entries:
        n = entry.client_count
        confusion_path = os.path.join(out_dir, f"confusion_n{n}.csv")
        _write(confusion_path, confusion_to_csv(entry.final_confusion))
        artifacts.append(confusion_path)

        chain_path = os.path.join(out_dir, f"chain_n{n}.fgch")
        save_chain(entry.chain, chain_path)
        artifacts.append(chain_path)

        for r_idx, round_histories in enumerate(entry.histories):
            for cid, history in enumerate(round_histories):
                hist_path = os.path.join(out_dir, f"history_n{n}_r{r_idx}_c{cid}.csv")
                _write(hist_path, history.to_csv())
                artifacts.append(hist_path)

    if resolved["chain_file"]:
        save_chain(result.entries[-1].chain, resolved["chain_file"])
        artifacts.append(resolved["chain_file"])

    meta = {
        "config": {k: resolved[k] for k in sorted(_DEFAULTS)},
        "sweep": list(sweep),
        "artifacts": {os.path.basename(p): _sha256_file(p) for p in artifacts},
    }
    meta_path = os.path.join(out_dir, "run-meta.json")
    _write(meta_path, json.dumps(meta, indent=2, sort_keys=True) + "\n")

    for report in result.reports:
        print(
            f"N={report.client_count} round={report.round} "
            f"avg_local={report.avg_local_accuracy:.4f} global={report.global_accuracy:.4f} "
            f"rejected={report.rejected_count} chain_len={report.chain_tip_index + 1}"
        )
    return 0


def cmd_ledger_verify(args) -> int:
    try:
        chain = load_chain(args.chain_file)
    except (ChainFormatError, OSError) as exc:
        print(f"chain file error: {exc}", file=sys.stderr)
        return 2
    bad = verify_chain(chain)
    if bad is None:
        print(f"valid ({len(chain)} blocks)")
        return 0
    print(f"invalid at block {bad}")
    return 1


def cmd_heterogeneity(args) -> int:
    values = list(args.times)
    if args.file:
        with open(args.file, "r", encoding="utf-8") as fh:
            values += [float(tok) for tok in fh.read().split()]
    if len(values) < 2:
        print("heterogeneity needs at least 2 update times", file=sys.stderr)
        return 2
    if any(v <= 0 for v in values):
        print("update times must be positive", file=sys.stderr)
        return 2
    print(f"{heterogeneity(values):.6f}")
    return 0


def cmd_train_local(args) -> int:
    file_cfg = load_config_file(args.config) if args.config else {}
    flags = {
        "epochs": args.epochs,
        "batch": args.batch,
        "lr": args.lr,
        "seed": args.seed,
    }
    if args.data_dir is not None:
        flags["dataset"] = {"kind": "har", "dir": args.data_dir}
    resolved = _resolve(file_cfg, flags)

    train, test = _load_dataset(resolved)
    c = int(max(train.labels.max(), test.labels.max())) + 1
    arch = _build_arch(resolved, train.n_features, c) or default_arch(train.n_features, c)
    weights = init_weights(arch, int(resolved["seed"]))
    trained, history = train_local(
        arch,
        weights,
        train,
        test,
        epochs=int(resolved["epochs"]),
        batch=int(resolved["batch"]),
        lr=float(resolved["lr"]),
        momentum=float(resolved["momentum"]),
        seed=int(resolved["seed"]),
    )
    with open(args.out, "wb") as fh:
        fh.write(serialize_weights(trained))
    if args.history:
        _write(args.history, history.to_csv())
    report = evaluate(arch, trained, test)
    print(f"test_accuracy={report.accuracy:.4f} weights={args.out}")
    return 0


def cmd_aggregate(args) -> int:
    accuracies = [float(tok) for tok in args.accuracies.split(",")]
    if len(accuracies) != len(args.weight_files):
        print(
            f"{len(args.weight_files)} weight files but {len(accuracies)} accuracies",
            file=sys.stderr,
        )
        return 2
    updates = []
    for i, path in enumerate(args.weight_files):
        with open(path, "rb") as fh:
            weights = deserialize_weights(fh.read())
        updates.append(
            LocalUpdate(client_id=i, round=0, weights=weights, reported_accuracy=accuracies[i])
        )
    fused, factors = federated_fuse(updates, ScalingPolicy(boost=args.boost))
    with open(args.out, "wb") as fh:
        fh.write(serialize_weights(fused))
    print("factors=" + ",".join(repr(f) for f in factors))
    print(f"global={args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fogfed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the federated experiment and export metrics")
    sim.add_argument("--config", help="JSON config file (strict keys)")
    sim.add_argument("--clients", type=int)
    sim.add_argument("--rounds", type=int)
    sim.add_argument("--epochs", type=int)
    sim.add_argument("--batch", type=int)
    sim.add_argument("--lr", type=float)
    sim.add_argument("--boost", type=float)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--data-dir", help="UCI-HAR directory (overrides the config dataset)")
    sim.add_argument("--out-dir", dest="out_dir")
    sim.add_argument("--partition", choices=["replicate", "iid"])
    sim.set_defaults(func=cmd_simulate)

    ledger = sub.add_parser("ledger", help="ledger maintenance")
    ledger_sub = ledger.add_subparsers(dest="ledger_command", required=True)
    verify = ledger_sub.add_parser("verify", help="verify a chain file")
    verify.add_argument("chain_file")
    verify.set_defaults(func=cmd_ledger_verify)

    het = sub.add_parser("heterogeneity", help="compute the update-time heterogeneity index")
    het.add_argument("times", nargs="*", type=float)
    het.add_argument("--file", help="file of whitespace-separated update times")
    het.set_defaults(func=cmd_heterogeneity)

    tl = sub.add_parser("train-local", help="train one local model (debug)")
    tl.add_argument("--config")
    tl.add_argument("--data-dir")
    tl.add_argument("--epochs", type=int)
    tl.add_argument("--batch", type=int)
    tl.add_argument("--lr", type=float)
    tl.add_argument("--seed", type=int)
    tl.add_argument("--out", default="model.fgfw")
    tl.add_argument("--history")
    tl.set_defaults(func=cmd_train_local)

    agg = sub.add_parser("aggregate", help="fuse weight files from disk")
    agg.add_argument("weight_files", nargs="+")
    agg.add_argument("--accuracies", required=True, help="comma-separated, one per file")
    agg.add_argument("--boost", type=float, default=2.0)
    agg.add_argument("--out", required=True)
    agg.set_defaults(func=cmd_aggregate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
