"""Segmentation metrics for the seen/unseen class protocol.

Confusion counts accumulate over the whole evaluation set before any
division (dataset-level IoU). Accumulators from disjoint shards merge
additively to the sequential result.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError, DimensionError


def hiou(miou_seen, miou_unseen):
    """Harmonic mean of the two mIoU percentages; 0 when both are 0."""
    if not (0 <= miou_seen <= 100 and 0 <= miou_unseen <= 100):
        raise ContractError("mIoU inputs must be percentages in [0, 100]")
    if miou_seen + miou_unseen == 0:
        return 0.0
    return 2.0 * miou_seen * miou_unseen / (miou_seen + miou_unseen)


@dataclass
class SegMetrics:
    pacc: float
    per_class_iou: dict
    miou_seen: float
    miou_unseen: float
    hiou: float


class MetricAccumulator:
    """Additive confusion-matrix accumulator over label maps."""

    def __init__(self, ncls):
        self.ncls = ncls
        self.matrix = np.zeros((ncls, ncls), dtype=np.int64)

    def add(self, pred, truth):
        pred = np.asarray(pred)
        truth = np.asarray(truth)
        if pred.shape != truth.shape:
            raise DimensionError(f"shape mismatch {pred.shape} vs {truth.shape}")
        self.matrix += kernels.confusion_matrix(truth.ravel(), pred.ravel(), self.ncls)

    def merge(self, other):
        if other.ncls != self.ncls:
            raise ContractError("cannot merge accumulators with different class counts")
        self.matrix += other.matrix

    def finalize(self, split):
        """Reduce accumulated counts to SegMetrics for the given class split."""
        m = self.matrix
        total = m.sum()
        pacc = 100.0 * np.diag(m).sum() / total if total else 0.0
        tp = np.diag(m).astype(np.float64)
        union = m.sum(axis=0) + m.sum(axis=1) - np.diag(m)
        per_class = {}
        for c in range(self.ncls):
            if union[c] > 0:  # classes absent from both pred and truth drop out
                per_class[c] = 100.0 * tp[c] / union[c]

        def mean_over(ids):
            vals = [per_class[c] for c in ids if c in per_class]
            return float(np.mean(vals)) if vals else 0.0

        ms = mean_over(split.seen)
        mu = mean_over(split.unseen)
        return SegMetrics(pacc=float(pacc), per_class_iou=per_class,
                          miou_seen=ms, miou_unseen=mu, hiou=hiou(ms, mu))


def compute_metrics(pred, truth, split):
    """One-shot metrics for a single prediction/truth label-map pair."""
    truth = np.asarray(truth)
    registered = set(split.seen) | set(split.unseen)
    present = set(np.unique(truth).tolist())
    if not present <= registered:
        raise ContractError(f"unregistered labels in truth: {sorted(present - registered)}")
    acc = MetricAccumulator(split.num_classes)
    acc.add(pred, truth)
    return acc.finalize(split)


_REPORT_KEYS = ("pAcc", "mIoU_seen", "mIoU_unseen", "hIoU")


def format_report(metrics: SegMetrics):
    """Flat key=value report, fixed 2-decimal percentages."""
    vals = (metrics.pacc, metrics.miou_seen, metrics.miou_unseen, metrics.hiou)
    return "".join(f"{k}={v:.2f}\n" for k, v in zip(_REPORT_KEYS, vals))


def parse_report(text):
    out = {}
    for line in text.strip().splitlines():
        k, _, v = line.partition("=")
        out[k] = float(v)
    if set(out) != set(_REPORT_KEYS):
        raise ContractError(f"report keys {sorted(out)} != {sorted(_REPORT_KEYS)}")
    return out
