"""Command-line interface: train, eval, predict, synth, gradcheck."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np
import torch

from . import dataio, metrics
from .conversation import Conversation
from .model import ConversationModel, ModelConfig
from .recurrent import DecayConfig
from .synth import SynthConfig, generate_dataset
from .training import TrainConfig, gradient_check, train_loop

# Per-dataset hyperparameter profiles: learning rates for the extraction and
# classification groups, weight decay, batch size, dropout, and the two
# encoder depths. "custom" falls back to the iemocap row.
PROFILES = {
    "iemocap": dict(lr_ext=2e-5, lr_cls=7e-3, weight_decay=1e-4, batch_size=32,
                    dropout_rate=0.3, depth_immha=5, depth_diagru=3),
    "dailydialog": dict(lr_ext=2e-5, lr_cls=1e-3, weight_decay=1e-4, batch_size=128,
                        dropout_rate=0.3, depth_immha=6, depth_diagru=3),
    "meld": dict(lr_ext=5e-5, lr_cls=9e-3, weight_decay=1e-4, batch_size=128,
                 dropout_rate=0.3, depth_immha=3, depth_diagru=3),
    "emorynlp": dict(lr_ext=3e-5, lr_cls=1e-4, weight_decay=1e-4, batch_size=128,
                     dropout_rate=0.4, depth_immha=4, depth_diagru=2),
}
PROFILES["custom"] = dict(PROFILES["iemocap"])

RUN_CONFIG_FIELDS = {
    "profile": str,
    "lr_ext": float,
    "lr_cls": float,
    "weight_decay": float,
    "batch_size": int,
    "dropout_rate": float,
    "max_epochs": int,
    "seed": int,
    "d_model": int,
    "d_h": int,
    "num_heads": int,
    "depth_immha": int,
    "depth_diagru": int,
    "d_ff": int,
    "max_len": int,
    "decoder": str,
    "metric": str,
    "mu_self": float,
    "mu_other": float,
    "gamma_self": float,
    "gamma_other": float,
}

RUN_CONFIG_DEFAULTS = dict(
    profile="custom",
    max_epochs=100,
    seed=0,
    d_model=64,
    d_h=32,
    num_heads=2,
    d_ff=None,
    max_len=512,
    decoder="skipcrf",
    metric="accuracy",
    mu_self=3.0,
    mu_other=0.0,
    gamma_self=1.0,
    gamma_other=2.0,
)


class ConfigError(ValueError):
    pass


def resolve_run_config(overrides: dict) -> dict:
    """Profile defaults + type-checked overrides; unknown keys rejected."""
    unknown = set(overrides) - set(RUN_CONFIG_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    profile = overrides.get("profile", RUN_CONFIG_DEFAULTS["profile"])
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    cfg = dict(RUN_CONFIG_DEFAULTS)
    cfg.update(PROFILES[profile])
    cfg["profile"] = profile
    for key, value in overrides.items():
        want = RUN_CONFIG_FIELDS[key]
        if value is not None and not isinstance(value, want):
            if want is float and isinstance(value, int):
                value = float(value)
            else:
                raise ConfigError(f"config key {key!r} expects {want.__name__}, got {value!r}")
        cfg[key] = value
    return cfg


def _load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as f:
        return json.load(f)


def _model_config(run_cfg: dict, d_in: int, num_labels: int) -> ModelConfig:
    return ModelConfig(
        d_in=d_in,
        num_labels=num_labels,
        d_model=run_cfg["d_model"],
        d_h=run_cfg["d_h"],
        num_heads=run_cfg["num_heads"],
        depth_immha=run_cfg["depth_immha"],
        depth_diagru=run_cfg["depth_diagru"],
        d_ff=run_cfg["d_ff"],
        max_len=run_cfg["max_len"],
        dropout=run_cfg["dropout_rate"],
        decoder=run_cfg["decoder"],
        decay=DecayConfig(
            run_cfg["mu_self"], run_cfg["mu_other"],
            run_cfg["gamma_self"], run_cfg["gamma_other"],
        ),
    )


def _metric_fn(spec: str):
    def fn(model, convs):
        golds, preds = [], []
        for conv in convs:
            preds.extend(model.predict(conv))
            golds.extend(conv.gold_labels())
        K = convs[0].num_labels
        cm = metrics.confusion(golds, preds, K)
        if spec == "accuracy":
            return metrics.accuracy(cm)
        if spec == "weighted-f1":
            return metrics.f1_scores(cm, "weighted")
        if spec == "macro-f1":
            return metrics.f1_scores(cm, "macro")
        if spec.startswith("micro-f1-excluding:"):
            return metrics.f1_scores(cm, "micro", exclude=int(spec.split(":", 1)[1]))
        if spec == "micro-f1":
            return metrics.f1_scores(cm, "micro")
        raise ConfigError(f"unknown metric {spec!r}")

    return fn


def cmd_synth(args) -> int:
    raw = _load_config_file(args.config)
    count = int(raw.pop("count", 100))
    cfg = SynthConfig(**raw)
    convs = generate_dataset(cfg, count)
    labels_space = [f"label{k}" for k in range(cfg.num_labels)]
    dataio.write_dataset(args.out, convs, labels_space)
    print(json.dumps({"event": "synth", "count": count, "out": args.out}))
    return 0


def cmd_train(args) -> int:
    run_cfg = resolve_run_config(_load_config_file(args.config))
    train_convs, labels_space = dataio.read_dataset(args.data)
    val_convs, _ = dataio.read_dataset(args.val) if args.val else ([], labels_space)
    torch.manual_seed(run_cfg["seed"])
    model_cfg = _model_config(run_cfg, train_convs[0].feature_dim, len(labels_space))
    model = ConversationModel(model_cfg)
    train_cfg = TrainConfig(
        lr_ext=run_cfg["lr_ext"],
        lr_cls=run_cfg["lr_cls"],
        weight_decay=run_cfg["weight_decay"],
        batch_size=run_cfg["batch_size"],
        dropout_rate=run_cfg["dropout_rate"],
        max_epochs=run_cfg["max_epochs"],
        seed=run_cfg["seed"],
    )
    history_records = []

    def log_fn(rec):
        row = {"epoch": rec.epoch, "train_loss": rec.train_loss, "val_metric": rec.val_metric}
        history_records.append(row)
        print(json.dumps(row))

    best_state, _ = train_loop(
        model, train_convs, val_convs, train_cfg,
        metric_fn=_metric_fn(run_cfg["metric"]), log_fn=log_fn,
    )
    model.load_state_dict(best_state)
    cfg_dict = dataclasses.asdict(model_cfg)
    cfg_dict["decay"] = dataclasses.asdict(model_cfg.decay)
    dataio.save_checkpoint(args.out, cfg_dict, labels_space, best_state)
    if args.history:
        dataio.write_records(args.history, history_records)
    return 0


def _load_model(path: str) -> tuple[ConversationModel, list[str]]:
    payload = dataio.load_checkpoint(path)
    cfg_dict = dict(payload["model_config"])
    cfg_dict["decay"] = DecayConfig(**cfg_dict["decay"])
    model = ConversationModel(ModelConfig(**cfg_dict))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload["labels_space"]


def cmd_eval(args) -> int:
    model, labels_space = _load_model(args.checkpoint)
    convs, data_space = dataio.read_dataset(args.data)
    if data_space != labels_space:
        raise ConfigError("dataset labels_space differs from the checkpoint's")
    K = len(labels_space)
    golds, preds = [], []
    inertia_pairs, contagion_pairs = [], []
    for conv in convs:
        p = model.predict(conv)
        preds.extend(p)
        golds.extend(conv.gold_labels())
        ine, con = metrics.inertia_contagion_split(conv, p)
        inertia_pairs.extend(ine)
        contagion_pairs.extend(con)
    cm = metrics.confusion(golds, preds, K)
    records = [
        {"record": "confusion", "orientation": "rows=gold cols=predicted",
         "labels": labels_space, "counts": cm.counts.tolist()},
        {"record": "summary",
         "accuracy": metrics.accuracy(cm),
         "weighted_f1": metrics.f1_scores(cm, "weighted"),
         "macro_f1": metrics.f1_scores(cm, "macro"),
         "micro_f1": metrics.f1_scores(cm, "micro")},
    ]
    tp, fp, fn = metrics._per_class(cm)
    for k, name in enumerate(labels_space):
        records.append({"record": "class_f1", "label": name,
                        "f1": metrics._f1(tp[k], fp[k], fn[k])})
    for name, pairs in (("inertia", inertia_pairs), ("contagion", contagion_pairs)):
        row = {"record": f"{name}_subset", "num_samples": len(pairs)}
        if pairs:
            sub = metrics.confusion([g for g, _ in pairs], [p for _, p in pairs], K)
            row["weighted_f1"] = metrics.f1_scores(sub, "weighted")
            row["micro_f1"] = metrics.f1_scores(sub, "micro")
        records.append(row)
    dataio.write_records(args.report, records)
    for r in records:
        print(json.dumps(r))
    return 0


def cmd_predict(args) -> int:
    model, labels_space = _load_model(args.checkpoint)
    convs, _ = dataio.read_dataset(args.data)
    records = []
    for conv in convs:
        preds = model.predict(conv)
        records.append({"id": conv.id, "labels": [labels_space[k] for k in preds]})
    dataio.write_records(args.out, records)
    return 0


def cmd_gradcheck(args) -> int:
    torch.manual_seed(7)
    cfg = SynthConfig(num_labels=3, d_in=4, min_len=4, max_len=4, seed=7)
    conv = generate_dataset(cfg, 1)[0]
    model_cfg = ModelConfig(
        d_in=4, num_labels=3, d_model=4, d_h=3, num_heads=2,
        depth_immha=1, depth_diagru=1, max_len=8, decoder=args.decoder,
    )
    model = ConversationModel(model_cfg)
    with torch.no_grad():
        for name in ("self_trans", "other_trans", "chain_trans"):
            getattr(model, name).normal_(std=0.5)
    err = gradient_check(model, [conv])
    status = "PASS" if err < args.tolerance else "FAIL"
    print(json.dumps({"event": "gradcheck", "status": status,
                      "max_rel_err": err, "tolerance": args.tolerance}))
    return 0 if status == "PASS" else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convcrf")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--val")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint and write a report")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="write predicted labels for a dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gradcheck", help="finite-difference check on a tiny model")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--decoder", default="skipcrf")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as e:  # surface a machine-readable error record
        print(json.dumps({"event": "error", "type": type(e).__name__, "message": str(e)}),
              file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
