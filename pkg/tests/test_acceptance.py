"""End-to-end acceptance checks.

Each test prints a single PASS/FAIL line (visible with -s or on failure)
and asserts the pinned tolerance. The expensive artifacts (a full
default-config training run and a single-batch overfit probe) are built
once per module and shared.
"""

import dataclasses
import os
import time

import numpy as np
import pytest

from sptseg.cli import main
from sptseg.config import parse_config
from sptseg.data import GzlssSplit, SceneSpec, generate_dataset
from sptseg.metrics import hiou, parse_report
from sptseg.model import SptSegModel
from sptseg.train import evaluate_model, train_model
from sptseg.verify import REFERENCE_HIOU_TRIPLES, run_suites

from conftest import TINY_INI


def _report(criterion, ok, detail):
    print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def _suite_failures(rows):
    return [f"{rid}: {detail}" for rid, ok, detail in rows if not ok]


@pytest.fixture(scope="module")
def full_run():
    """Default-config dataset, untrained baseline, 2000-step training run,
    evaluation, and a 500-step overfit probe. Built once."""
    cfg = parse_config("")
    d = cfg.data
    spec = SceneSpec(seed=cfg.train.seed, image_side=cfg.encoder.image_side,
                     shapes_min=d.shapes_min, shapes_max=d.shapes_max,
                     min_radius=d.min_radius, max_radius=d.max_radius)
    split = GzlssSplit.create(d.n_seen, d.n_unseen, cfg.encoder.width,
                              cfg.train.seed)
    train, test = generate_dataset(spec, split, d.n_train, d.n_test)

    untrained = SptSegModel.create(cfg)
    baseline, _ = evaluate_model(untrained, test)

    model = SptSegModel.create(cfg)
    hash_before = model.backbone_hash()
    t0 = time.monotonic()
    train_model(model, train)
    train_seconds = time.monotonic() - t0
    metrics, _ = evaluate_model(model, test)

    ov_cfg = dataclasses.replace(cfg, train=dataclasses.replace(
        cfg.train, steps=500, overfit=True))
    ov_model = SptSegModel.create(ov_cfg)
    ov_log = train_model(ov_model, train)

    return {
        "cfg": cfg,
        "baseline": baseline,
        "model": model,
        "hash_before": hash_before,
        "train_seconds": train_seconds,
        "metrics": metrics,
        "overfit_log": ov_log,
    }


def test_criterion_1_fft_suite():
    t0 = time.monotonic()
    rows = run_suites(["fft"])
    elapsed = time.monotonic() - t0
    bad = _suite_failures(rows)
    ok = not bad and elapsed < 5.0
    _report(1, ok, f"{len(rows)} checks, {elapsed:.2f}s"
            + (f", failures: {bad}" if bad else ""))


def test_criterion_2_gradient_suite():
    t0 = time.monotonic()
    rows = run_suites(["grad"])
    elapsed = time.monotonic() - t0
    bad = _suite_failures(rows)
    ok = not bad and elapsed < 120.0
    _report(2, ok, f"{len(rows)} ops at rel err < 1e-4, {elapsed:.2f}s"
            + (f", failures: {bad}" if bad else ""))


def test_criterion_3_reference_hiou_triples():
    t0 = time.monotonic()
    bad = []
    for ms, mu, expected in REFERENCE_HIOU_TRIPLES:
        got = hiou(ms, mu)
        if abs(got - expected) > 0.05:
            bad.append(f"({ms}, {mu}) -> {got:.3f} vs printed {expected}")
    elapsed = time.monotonic() - t0
    ok = not bad and elapsed < 1.0
    _report(3, ok, f"{len(REFERENCE_HIOU_TRIPLES)} triples at +/-0.05, "
            f"{elapsed:.3f}s" + (f", failures: {bad}" if bad else ""))


def test_criterion_4_hilo_degeneracy():
    rows = run_suites(["hilo"])
    bad = _suite_failures(rows)
    _report(4, not bad, "alpha extremes bit-exact vs standalone branches"
            + (f", failures: {bad}" if bad else ""))


def test_criterion_5_null_filter_equivalence():
    cfg = parse_config("")
    model = SptSegModel.create(cfg)
    for f in model.encoder.filters.values():
        f.re.data[:] = 0.0
        f.im.data[:] = 0.0
    vpt_cfg = dataclasses.replace(
        cfg, encoder=dataclasses.replace(cfg.encoder, spt_first=1, spt_last=0))
    vpt = SptSegModel.create(vpt_cfg)
    rng = np.random.default_rng(0)
    imgs = rng.random((2, cfg.encoder.image_side, cfg.encoder.image_side, 3))
    ids = sorted(list(model.split.seen) + list(model.split.unseen))
    a = model.forward_masks(imgs, ids)
    b = vpt.forward_masks(imgs, ids)
    ok = np.array_equal(a.data, b.data)
    _report(5, ok, "zeroed filters match the prompt-only pipeline bit-exactly")


def test_criterion_6_frozen_backbone(full_run):
    after = full_run["model"].backbone_hash()
    ok = after == full_run["hash_before"]
    _report(6, ok, f"backbone hash {full_run['hash_before'][:12]}.. unchanged "
            "after full training")


def test_criterion_7_learning_effect(full_run):
    m = full_run["metrics"]
    base = full_run["baseline"]
    log = full_run["overfit_log"]
    ratio = min(r[3] for r in log) / log[0][3]
    secs = full_run["train_seconds"]
    checks = {
        "mIoU_seen >= 70": m.miou_seen >= 70.0,
        "mIoU_unseen > untrained": m.miou_unseen > base.miou_unseen,
        "overfit < 10% of initial": ratio < 0.10,
        "train < 15 min": secs < 900.0,
    }
    bad = [k for k, v in checks.items() if not v]
    _report(7, not bad,
            f"seen {m.miou_seen:.2f} unseen {m.miou_unseen:.2f} "
            f"(untrained {base.miou_unseen:.2f}) overfit ratio {ratio:.3f} "
            f"train {secs:.0f}s" + (f", failures: {bad}" if bad else ""))


def test_criterion_8_ablation_harness(tmp_path, capsys):
    ini = tmp_path / "ablate.ini"
    ini.write_text(TINY_INI.replace("steps = 8", "steps = 60"))
    data = tmp_path / "ds"
    assert main(["gen-data", "--config", str(ini), "--out", str(data)]) == 0
    variants = {
        "baseline": ["--ablate", "spt=off", "--ablate", "sgd=off"],
        "+SPT": ["--ablate", "sgd=off"],
        "+SGD": ["--ablate", "spt=off"],
        "+both": [],
    }
    reports = {}
    for name, flags in variants.items():
        tag = name.strip("+")
        ckpt = tmp_path / f"{tag}.bin"
        rep = tmp_path / f"{tag}.txt"
        assert main(["train", "--config", str(ini), "--data", str(data),
                     "--out", str(ckpt)] + flags) == 0
        assert main(["eval", "--checkpoint", str(ckpt), "--data", str(data),
                     "--report", str(rep)]) == 0
        reports[name] = parse_report(rep.read_text())
    capsys.readouterr()
    schemas = {frozenset(r) for r in reports.values()}
    ok = len(schemas) == 1
    order = " ".join(f"{n}={r['hIoU']:.2f}" for n, r in reports.items())
    _report(8, ok, f"four variants completed; hIoU ordering (reported only): {order}")


def test_criterion_9_determinism(tmp_path, capsys):
    ini = tmp_path / "det.ini"
    ini.write_text(TINY_INI)
    artifacts = []
    for run in ("a", "b"):
        data = tmp_path / run / "ds"
        ckpt = tmp_path / run / "model.bin"
        rep = tmp_path / run / "report.txt"
        assert main(["gen-data", "--config", str(ini), "--out", str(data)]) == 0
        assert main(["train", "--config", str(ini), "--data", str(data),
                     "--out", str(ckpt)]) == 0
        assert main(["eval", "--checkpoint", str(ckpt), "--data", str(data),
                     "--report", str(rep)]) == 0
        tree = {}
        for dirpath, _, files in os.walk(tmp_path / run):
            for f in sorted(files):
                p = os.path.join(dirpath, f)
                tree[os.path.relpath(p, tmp_path / run)] = open(p, "rb").read()
        artifacts.append(tree)
    capsys.readouterr()
    ok = artifacts[0] == artifacts[1]
    _report(9, ok, f"{len(artifacts[0])} artifacts byte-identical across two runs")
