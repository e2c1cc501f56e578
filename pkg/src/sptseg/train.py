"""Training loop (decoupled-weight-decay Adam over prompt and decoder
parameters) and evaluation over the seen-union-unseen class set."""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, backward, no_grad, softmax
from .errors import ContractError, NonFiniteError, TrainingDiverged
from .losses import focal_loss, ssim_loss, upsample_probs
from .metrics import MetricAccumulator
from .utils import substream


class AdamW:
    """Adam with decoupled weight decay."""

    def __init__(self, params, lr=3e-3, beta1=0.9, beta2=0.999,
                 weight_decay=1e-4, eps=1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in self.params.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in self.params.items()}

    def step(self):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mh = self.m[k] / (1 - b1 ** self.t)
            vh = self.v[k] / (1 - b2 ** self.t)
            p.data = p.data - self.lr * (mh / (np.sqrt(vh) + self.eps)
                                         + self.weight_decay * p.data)

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()


def batch_loss(probs, targets, loss_cfg):
    """(total, focal, ssim) over a batch.

    probs: (B, C, S, S) pixel probabilities; targets: (B, S, S) int labels
    indexing the class axis.
    """
    b, c, s, _ = probs.shape
    targets = np.asarray(targets)
    flat_p = probs.transpose((1, 0, 2, 3)).reshape(c, b * s * s)
    lf = focal_loss(flat_p, targets.ravel(), loss_cfg.focal_gamma)
    onehot = np.zeros((b, c, s, s))
    bi, yi, xi = np.meshgrid(np.arange(b), np.arange(s), np.arange(s), indexing="ij")
    onehot[bi, targets, yi, xi] = 1.0
    ls = ssim_loss(probs, Tensor(onehot), loss_cfg)
    total = lf * loss_cfg.focal_weight + ls * loss_cfg.ssim_weight
    return total, lf, ls


def train_model(model, train_samples, progress=None):
    """Optimize prompts, spectral filters, and decoder weights in place.

    The backbone and embedding table never receive updates. Unseen class
    ids must not appear in the training labels. Returns the loss log as a
    list of (step, focal, ssim, total) rows.
    """
    cfg = model.cfg
    tcfg = cfg.train
    split = model.split
    seen = sorted(split.seen)
    unseen = set(split.unseen)
    remap = {cid: i for i, cid in enumerate(seen)}

    for s in train_samples:
        present = set(np.unique(s.labels).tolist())
        if present & unseen:
            raise ContractError(f"unseen class ids {present & unseen} in training labels")

    if tcfg.overfit:
        pool = train_samples[:1]
        batch = 1
    else:
        pool = train_samples
        batch = min(tcfg.batch, len(pool))

    lut = np.zeros(max(seen) + 1, dtype=np.int64)
    for cid, i in remap.items():
        lut[cid] = i

    opt = AdamW(model.trainable_params(), lr=tcfg.lr, beta1=tcfg.beta1,
                beta2=tcfg.beta2, weight_decay=tcfg.weight_decay)
    rng = substream(tcfg.seed, "train")
    log = []
    for step in range(1, tcfg.steps + 1):
        # cosine decay to 5% of the base rate over the run
        frac = (step - 1) / max(tcfg.steps - 1, 1)
        opt.lr = tcfg.lr * (0.05 + 0.95 * 0.5 * (1.0 + np.cos(np.pi * frac)))
        if tcfg.overfit:
            idx = np.zeros(batch, dtype=np.int64)
        else:
            idx = rng.integers(0, len(pool), size=batch)
        images = np.stack([pool[i].image for i in idx])
        targets = np.stack([lut[pool[i].labels] for i in idx])
        try:
            probs = model.pixel_probs(images, seen)
            total, lf, ls = batch_loss(probs, targets, cfg.loss)
        except NonFiniteError as e:
            raise TrainingDiverged(step, "forward", str(e))
        row = (step, lf.item(), ls.item(), total.item())
        for term, value in zip(("focal", "ssim", "total"), row[1:]):
            if not np.isfinite(value):
                raise TrainingDiverged(step, term, value)
        log.append(row)
        opt.zero_grad()
        backward(total)
        opt.step()
        if progress is not None:
            progress(step, row)
    return log


def format_loss_log(log):
    lines = ["step,focal,ssim,total\n"]
    lines += [f"{s},{f:.10g},{ss:.10g},{t:.10g}\n" for s, f, ss, t in log]
    return "".join(lines)


def evaluate_model(model, samples, batch=8):
    """Predict every sample with the full class set and accumulate metrics.

    Returns (SegMetrics, list of predicted label maps).
    """
    split = model.split
    all_ids = sorted(list(split.seen) + list(split.unseen))
    acc = MetricAccumulator(split.num_classes)
    preds = []
    for start in range(0, len(samples), batch):
        chunk = samples[start:start + batch]
        images = np.stack([s.image for s in chunk])
        labels = model.predict_labels(images, all_ids)
        for s, lab in zip(chunk, labels):
            acc.add(lab, s.labels)
            preds.append(lab)
    return acc.finalize(split), preds
