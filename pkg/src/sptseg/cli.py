"""Command-line interface.

Subcommands: gen-data, train, eval, verify, report. Exit codes are stable:
0 success, 1 failed verification property, 2 config error, 3 missing or
unwritable path, 4 non-finite training loss, 5 corrupt checkpoint. stdout
carries machine-readable results; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import FullConfig, parse_config_file
from .data import (GzlssSplit, SceneSpec, generate_dataset, load_split_dir,
                   save_dataset, write_pgm)
from .errors import (CheckpointError, ConfigError, ContractError,
                     TrainingDiverged)
from .metrics import format_report, parse_report
from .model import SptSegModel
from .train import evaluate_model, format_loss_log, train_model
from .verify import SUITES, run_suites

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_CONFIG = 2
EXIT_PATH = 3
EXIT_DIVERGED = 4
EXIT_CHECKPOINT = 5


def _fail(code, message):
    print(message, file=sys.stderr)
    return code


def _load_config(path):
    return parse_config_file(path) if path else FullConfig.default()


def _apply_ablations(cfg, flags):
    """spt=off removes spectral prompt tuning; sgd=off swaps the decoder's
    spectral guidance for plain global attention."""
    for flag in flags:
        key, _, value = flag.partition("=")
        if key not in ("spt", "sgd") or value not in ("on", "off"):
            raise ConfigError(f"bad --ablate value {flag!r}; use spt|sgd=on|off")
        if key == "spt" and value == "off":
            cfg = dataclasses.replace(
                cfg, encoder=dataclasses.replace(cfg.encoder, spt_first=1, spt_last=0))
        if key == "sgd" and value == "off":
            cfg = dataclasses.replace(
                cfg, decoder=dataclasses.replace(cfg.decoder, spectral_guided=False))
    return cfg


def cmd_gen_data(args):
    cfg = _load_config(args.config)
    seed = cfg.train.seed if args.seed is None else args.seed
    d = cfg.data
    spec = SceneSpec(seed=seed, image_side=cfg.encoder.image_side,
                     shapes_min=d.shapes_min, shapes_max=d.shapes_max,
                     min_radius=d.min_radius, max_radius=d.max_radius)
    split = GzlssSplit.create(d.n_seen, d.n_unseen, cfg.encoder.width, seed)
    train, test = generate_dataset(spec, split, d.n_train, d.n_test)
    try:
        save_dataset(args.out, train, test)
    except OSError as e:
        return _fail(EXIT_PATH, f"cannot write dataset: {e}")
    print(f"out={args.out}")
    print(f"seed={seed}")
    print(f"train={len(train)}")
    print(f"test={len(test)}")
    print(f"seen={','.join(map(str, split.seen))}")
    print(f"unseen={','.join(map(str, split.unseen))}")
    return EXIT_OK


def cmd_train(args):
    cfg = _apply_ablations(_load_config(args.config), args.ablate)
    train_dir = os.path.join(args.data, "train")
    if not os.path.isdir(train_dir):
        return _fail(EXIT_PATH, f"no training split at {train_dir}")
    samples = load_split_dir(train_dir)
    model = SptSegModel.create(cfg)
    try:
        log = train_model(model, samples)
    except TrainingDiverged as e:
        return _fail(EXIT_DIVERGED, f"training diverged: {e}")
    loss_csv = args.loss_csv or args.out + ".loss.csv"
    try:
        with open(args.out, "wb") as f:
            f.write(model.to_checkpoint())
        with open(loss_csv, "w") as f:
            f.write(format_loss_log(log))
    except OSError as e:
        return _fail(EXIT_PATH, f"cannot write outputs: {e}")
    step, lf, ls, lt = log[-1]
    print(f"step={step} focal={lf:.6f} ssim={ls:.6f} total={lt:.6f}")
    return EXIT_OK


def cmd_eval(args):
    try:
        with open(args.checkpoint, "rb") as f:
            blob = f.read()
    except OSError as e:
        return _fail(EXIT_PATH, f"cannot read checkpoint: {e}")
    try:
        model = SptSegModel.from_checkpoint(blob)
    except CheckpointError as e:
        return _fail(EXIT_CHECKPOINT, f"corrupt checkpoint: {e}")
    test_dir = os.path.join(args.data, "test")
    if not os.path.isdir(test_dir):
        test_dir = args.data
    try:
        samples = load_split_dir(test_dir)
    except (ContractError, OSError) as e:
        return _fail(EXIT_PATH, f"cannot load dataset: {e}")
    metrics, preds = evaluate_model(model, samples)
    report = format_report(metrics)
    try:
        with open(args.report, "w") as f:
            f.write(report)
        if args.dump_masks:
            os.makedirs(args.dump_masks, exist_ok=True)
            for i, lab in enumerate(preds):
                write_pgm(os.path.join(args.dump_masks, f"pred_{i:04d}.pgm"), lab)
    except OSError as e:
        return _fail(EXIT_PATH, f"cannot write outputs: {e}")
    sys.stdout.write(report)
    return EXIT_OK


def cmd_verify(args):
    names = list(SUITES) if args.suite == "all" else [args.suite]
    rows = run_suites(names)
    failed = [pid for pid, ok, _ in rows if not ok]
    for pid, ok, detail in rows:
        print(f"{pid} {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    if failed:
        return _fail(EXIT_VERIFY, "failed properties: " + ", ".join(failed))
    return EXIT_OK


def cmd_report(args):
    try:
        with open(args.loss_csv) as f:
            lines = f.read().strip().splitlines()
        with open(args.metrics) as f:
            metrics = parse_report(f.read())
    except OSError as e:
        return _fail(EXIT_PATH, f"cannot read inputs: {e}")
    rows = [line.split(",") for line in lines[1:]]
    totals = [float(r[3]) for r in rows]
    md = ["# Run summary", "", "## Loss", ""]
    if totals:
        md += [f"- steps: {len(totals)}",
               f"- initial total loss: {totals[0]:.6f}",
               f"- final total loss: {totals[-1]:.6f}",
               f"- minimum total loss: {min(totals):.6f}", ""]
    md += ["## Metrics", "", "| key | value |", "| --- | --- |"]
    md += [f"| {k} | {v:.2f} |" for k, v in metrics.items()]
    md.append("")
    text = "\n".join(md)
    try:
        with open(args.out, "w") as f:
            f.write(text)
    except OSError as e:
        return _fail(EXIT_PATH, f"cannot write report: {e}")
    print(f"out={args.out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="sptseg",
                                description="Spectral prompt tuning segmentation toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a deterministic synthetic dataset")
    g.add_argument("--config", help="INI config file; defaults apply when omitted")
    g.add_argument("--out", required=True, help="output dataset directory")
    g.add_argument("--seed", type=int, help="override the config seed")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train prompts and decoder on a dataset")
    t.add_argument("--config", help="INI config file; defaults apply when omitted")
    t.add_argument("--data", required=True, help="dataset directory (train/ inside)")
    t.add_argument("--out", required=True, help="output checkpoint path")
    t.add_argument("--loss-csv", help="loss log path (default: <out>.loss.csv)")
    t.add_argument("--ablate", action="append", default=[],
                   help="spt=off and/or sgd=off; repeatable")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint over seen and unseen classes")
    e.add_argument("--checkpoint", required=True, help="checkpoint file")
    e.add_argument("--data", required=True, help="dataset directory (test/ inside)")
    e.add_argument("--report", required=True, help="output key=value report path")
    e.add_argument("--dump-masks", help="directory for predicted label maps (PGM)")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run oracle and property suites")
    v.add_argument("--suite", required=True, choices=sorted(SUITES) + ["all"],
                   help="which suite to run")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="render loss CSV and metrics into markdown")
    r.add_argument("--loss-csv", required=True, help="loss log CSV")
    r.add_argument("--metrics", required=True, help="key=value metrics report")
    r.add_argument("--out", required=True, help="output markdown path")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        return _fail(EXIT_CONFIG, f"config error: {e}")
    except CheckpointError as e:
        return _fail(EXIT_CHECKPOINT, f"checkpoint error: {e}")
    except ContractError as e:
        return _fail(EXIT_PATH, f"error: {e}")


if __name__ == "__main__":
    sys.exit(main())
