import dataclasses

import numpy as np
import pytest

from sptseg.autodiff import Tensor, backward
from sptseg.errors import ContractError
from sptseg.model import SptSegModel
from sptseg.train import AdamW, batch_loss, evaluate_model, format_loss_log, train_model

from conftest import tiny_dataset


def test_adamw_minimizes_a_quadratic():
    x = Tensor(np.array([10.0, -4.0]), requires_grad=True)
    target = np.array([3.0, 1.0])
    opt = AdamW({"x": x}, lr=0.2, weight_decay=0.0)
    for _ in range(200):
        opt.zero_grad()
        backward(((x - Tensor(target)) * (x - Tensor(target))).sum())
        opt.step()
    assert np.allclose(x.data, target, atol=1e-3)


def test_adamw_weight_decay_shrinks_parameters():
    x = Tensor(np.array([5.0]), requires_grad=True)
    opt = AdamW({"x": x}, lr=0.0, weight_decay=0.1)
    opt.step()   # zero gradient: only the decoupled decay acts
    assert np.allclose(x.data, [5.0 * (1 - 0.0)])  # lr=0 disables decay too
    opt2 = AdamW({"x": x}, lr=0.1, weight_decay=0.5)
    before = x.data.copy()
    opt2.zero_grad()
    opt2.step()
    assert np.all(np.abs(x.data) < np.abs(before))


def test_batch_loss_terms_combine(tiny_cfg):
    rng = np.random.default_rng(0)
    from sptseg.autodiff import softmax
    logits = Tensor(rng.standard_normal((2, 3, 8, 8)))
    probs = softmax(logits, axis=1)
    targets = rng.integers(0, 3, size=(2, 8, 8))
    total, lf, ls = batch_loss(probs, targets, tiny_cfg.loss)
    assert abs(total.item() - (lf.item() + ls.item())) < 1e-12
    assert lf.item() > 0 and ls.item() > 0


def test_training_reduces_loss_and_freezes_backbone(tiny_cfg):
    split, (train, test) = tiny_dataset(tiny_cfg)
    cfg = dataclasses.replace(tiny_cfg, train=dataclasses.replace(
        tiny_cfg.train, steps=30, batch=2))
    model = SptSegModel.create(cfg)
    before = model.backbone_hash()
    embed_before = model.split.embeddings.data.copy()
    log = train_model(model, train)
    assert len(log) == 30
    assert model.backbone_hash() == before
    assert np.array_equal(model.split.embeddings.data, embed_before)
    first = np.mean([r[3] for r in log[:5]])
    last = np.mean([r[3] for r in log[-5:]])
    assert last < first


def test_overfit_mode_drives_loss_down(tiny_cfg):
    split, (train, _) = tiny_dataset(tiny_cfg)
    cfg = dataclasses.replace(tiny_cfg, train=dataclasses.replace(
        tiny_cfg.train, steps=120, overfit=True))
    model = SptSegModel.create(cfg)
    log = train_model(model, train)
    assert min(r[3] for r in log) < 0.5 * log[0][3]


def test_training_rejects_unseen_labels(tiny_cfg):
    split, (train, test) = tiny_dataset(tiny_cfg)
    model = SptSegModel.create(tiny_cfg)
    bad = [s for s in test if set(np.unique(s.labels)) & set(split.unseen)]
    with pytest.raises(ContractError):
        train_model(model, bad[:1])


def test_training_is_deterministic(tiny_cfg):
    split, (train, _) = tiny_dataset(tiny_cfg)
    outs = []
    for _ in range(2):
        model = SptSegModel.create(tiny_cfg)
        log = train_model(model, train)
        outs.append((format_loss_log(log), model.to_checkpoint()))
    assert outs[0][0] == outs[1][0]
    assert outs[0][1] == outs[1][1]


def test_loss_log_format(tiny_cfg):
    split, (train, _) = tiny_dataset(tiny_cfg)
    model = SptSegModel.create(tiny_cfg)
    text = format_loss_log(train_model(model, train))
    lines = text.splitlines()
    assert lines[0] == "step,focal,ssim,total"
    assert len(lines) == tiny_cfg.train.steps + 1
    for line in lines[1:]:
        step, lf, ls, lt = line.split(",")
        assert abs(float(lf) + float(ls) - float(lt)) < 1e-9


def test_evaluate_model_outputs(tiny_cfg):
    split, (train, test) = tiny_dataset(tiny_cfg)
    model = SptSegModel.create(tiny_cfg)
    metrics, preds = evaluate_model(model, test, batch=3)
    side = tiny_cfg.encoder.image_side
    assert len(preds) == len(test)
    assert all(p.shape == (side, side) for p in preds)
    assert 0.0 <= metrics.pacc <= 100.0
    registered = set(split.seen) | set(split.unseen)
    for p in preds:
        assert set(np.unique(p)) <= registered


def test_progress_callback_sees_every_step(tiny_cfg):
    split, (train, _) = tiny_dataset(tiny_cfg)
    model = SptSegModel.create(tiny_cfg)
    steps = []
    train_model(model, train, progress=lambda s, row: steps.append(s))
    assert steps == list(range(1, tiny_cfg.train.steps + 1))
