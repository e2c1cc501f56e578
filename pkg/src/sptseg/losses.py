"""Training loss: weighted focal + structural-similarity terms.

Losses act on per-pixel class probabilities. Patch-level probabilities are
lifted to pixel resolution with a fixed bilinear matrix so the whole path
stays differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, box_filter, matmul
from .errors import ContractError, DimensionError


@dataclass
class LossConfig:
    focal_weight: float = 1.0
    ssim_weight: float = 1.0
    focal_gamma: float = 2.0
    ssim_window: int = 7
    ssim_c1: float = 1e-4
    ssim_c2: float = 9e-4

    def __post_init__(self):
        if self.focal_weight < 0 or self.ssim_weight < 0:
            raise ContractError("loss weights must be non-negative")
        if self.ssim_window % 2 != 1:
            raise ContractError("ssim window side must be odd")


def focal_loss(probs, target, gamma=2.0):
    """Mean of -(1 - p_t)^gamma * log(p_t) over pixels.

    probs: (C, P) Tensor whose columns are distributions; target: (P,) int
    labels. p_t is clamped to [1e-12, 1].
    """
    target = np.asarray(target).ravel()
    c, p = probs.shape
    if target.size != p:
        raise DimensionError(f"target size {target.size} != pixel count {p}")
    if target.min() < 0 or target.max() >= c:
        raise ContractError(f"label outside [0, {c}) in focal target")
    onehot = np.zeros((c, p))
    onehot[target, np.arange(p)] = 1.0
    pt = (probs * Tensor(onehot)).sum(axis=0).clamp(1e-12, 1.0)
    if gamma == 0:
        return -(pt.log()).mean()
    return ((1.0 - pt).pow(gamma) * -(pt.log())).mean()


def _flatten_maps(x):
    if x.ndim == 3:
        return x
    if x.ndim == 4:
        return x.reshape((x.shape[0] * x.shape[1],) + x.shape[2:])
    raise DimensionError(f"expected (C, H, W) or (B, C, H, W), got {x.shape}")


def ssim_loss(probs, target, cfg: LossConfig = LossConfig()):
    """1 - mean local SSIM between probability maps and one-hot targets.

    Uses a uniform window; statistics are per channel, averaged over every
    channel and position. Symmetric in its two arguments.
    """
    if not isinstance(target, Tensor):
        target = Tensor(np.asarray(target, dtype=np.float64))
    if probs.shape != target.shape:
        raise DimensionError(f"shape mismatch {probs.shape} vs {target.shape}")
    x = _flatten_maps(probs)
    y = _flatten_maps(target)
    win = cfg.ssim_window
    c1, c2 = cfg.ssim_c1, cfg.ssim_c2
    mx = box_filter(x, win)
    my = box_filter(y, win)
    vx = box_filter(x * x, win) - mx * mx
    vy = box_filter(y * y, win) - my * my
    cxy = box_filter(x * y, win) - mx * my
    num = (mx * my * 2.0 + c1) * (cxy * 2.0 + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return 1.0 - (num / den).mean()


def total_loss_terms(probs, target, cfg: LossConfig):
    """Return (total, focal, ssim) for (C, H, W) probabilities and (H, W) labels."""
    target = np.asarray(target)
    c, h, w = probs.shape
    lf = focal_loss(probs.reshape(c, h * w), target.ravel(), cfg.focal_gamma)
    onehot = np.zeros((c, h * w))
    onehot[target.ravel(), np.arange(h * w)] = 1.0
    ls = ssim_loss(probs, Tensor(onehot.reshape(c, h, w)), cfg)
    total = lf * cfg.focal_weight + ls * cfg.ssim_weight
    return total, lf, ls


def total_loss(probs, target, cfg: LossConfig = LossConfig()):
    """Weighted sum of the focal and SSIM terms; differentiable end-to-end."""
    return total_loss_terms(probs, target, cfg)[0]


_upsample_cache = {}


def bilinear_upsample_matrix(grid, image_side):
    """(image_side^2, grid^2) matrix lifting patch values to pixels bilinearly.

    Patch values live at patch centers; pixels outside the outermost centers
    clamp to the border patch. Rows sum to 1, so per-pixel probability
    distributions stay normalized.
    """
    key = (grid, image_side)
    if key in _upsample_cache:
        return _upsample_cache[key]
    patch = image_side / grid
    mat = np.zeros((image_side * image_side, grid * grid))
    coords = (np.arange(image_side) + 0.5) / patch - 0.5
    lo = np.clip(np.floor(coords).astype(int), 0, grid - 1)
    hi = np.minimum(lo + 1, grid - 1)
    frac = np.clip(coords - np.floor(coords), 0.0, 1.0)
    frac[coords < 0] = 0.0
    frac[coords > grid - 1] = 0.0
    for py in range(image_side):
        for px in range(image_side):
            for gy, wy in ((lo[py], 1 - frac[py]), (hi[py], frac[py])):
                for gx, wx in ((lo[px], 1 - frac[px]), (hi[px], frac[px])):
                    if wy * wx:
                        mat[py * image_side + px, gy * grid + gx] += wy * wx
    _upsample_cache[key] = mat
    return mat


def upsample_probs(patch_probs, image_side):
    """Lift (.., C, N) patch probabilities to (.., C, image_side, image_side)."""
    n = patch_probs.shape[-1]
    grid = int(round(np.sqrt(n)))
    if grid * grid != n:
        raise DimensionError(f"token count {n} is not a perfect square")
    mat = Tensor(bilinear_upsample_matrix(grid, image_side).T)  # (N, S*S)
    out = matmul(patch_probs, mat)
    return out.reshape(patch_probs.shape[:-1] + (image_side, image_side))
