"""Spectral-guided decoder: HiLo attention, frequency-gated token
selection, relationship descriptor, and the class-by-patch mask product.

The high-frequency branch runs self-attention inside non-overlapping
windows; the low-frequency branch lets every token attend to
window-average-pooled tokens. Branch outputs concatenate channel-wise and
are linearly projected back to the model width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, concat, layer_norm, matmul, softmax
from .errors import ContractError, DimensionError
from .utils import substream


@dataclass
class DecoderConfig:
    heads: int = 4
    alpha: float = 0.5        # fraction of heads in the high-frequency branch
    window: int = 3
    layers: int = 3
    width: int = 32
    spectral_guided: bool = True  # False: plain global MSA, no token gating

    def __post_init__(self):
        if self.layers < 1:
            raise ContractError("decoder needs at least one layer")
        if self.width % self.heads != 0:
            raise ContractError(f"width {self.width} not divisible by heads {self.heads}")
        hi = self.alpha * self.heads
        if abs(hi - round(hi)) > 1e-9:
            raise ContractError(
                f"alpha * heads = {hi} must be an integer head count")

    @property
    def high_heads(self):
        return int(round(self.alpha * self.heads))


def _partition_windows(x, side, win):
    """(B, N, C) tokens -> (B, nW, win*win, C) non-overlapping windows."""
    b, n, c = x.shape
    gw = side // win
    grid = x.reshape(b, side, side, c)
    blocks = grid.reshape(b, gw, win, gw, win, c).transpose((0, 1, 3, 2, 4, 5))
    return blocks.reshape(b, gw * gw, win * win, c)


def _merge_windows(x, side, win):
    """Inverse of `_partition_windows`."""
    b, nw, ww, c = x.shape
    gw = side // win
    blocks = x.reshape(b, gw, gw, win, win, c).transpose((0, 1, 3, 2, 4, 5))
    return blocks.reshape(b, side * side, c)


def _head_attention(q, k, v, nheads):
    """Batched attention; q (B*, Tq, C), k/v (B*, Tk, C), C = nheads * dh."""
    dh = q.shape[-1] // nheads

    def split(t):
        b = t.shape[:-2]
        return (t.reshape(b + (t.shape[-2], nheads, dh))
                 .swapaxes(-2, -3))  # (..., nheads, T, dh)

    qh, kh, vh = split(q), split(k), split(v)
    scores = matmul(qh, kh.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))
    ctx = matmul(softmax(scores, axis=-1), vh)
    b = ctx.shape[:-3]
    t = ctx.shape[-2]
    return ctx.swapaxes(-2, -3).reshape(b + (t, nheads * dh))


def windowed_branch(x, weights, cfg, c0, c1, win):
    """Self-attention within non-overlapping windows, channels [c0:c1)."""
    b, n, _ = x.shape
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise DimensionError(f"token count {n} is not a perfect square")
    if side % win != 0:
        raise DimensionError(f"grid side {side} not divisible by window {win}")
    dh = cfg.width // cfg.heads
    nheads = (c1 - c0) // dh
    q = matmul(x, weights["wq"][:, c0:c1])
    k = matmul(x, weights["wk"][:, c0:c1])
    v = matmul(x, weights["wv"][:, c0:c1])
    qw = _partition_windows(q, side, win)
    kw = _partition_windows(k, side, win)
    vw = _partition_windows(v, side, win)
    ctx = _head_attention(qw, kw, vw, nheads)
    return _merge_windows(ctx, side, win)


def pooled_branch(x, weights, cfg, c0, c1, win):
    """Queries from every token; keys/values from window-pooled tokens."""
    b, n, _ = x.shape
    side = int(round(np.sqrt(n)))
    if side % win != 0:
        raise DimensionError(f"grid side {side} not divisible by window {win}")
    dh = cfg.width // cfg.heads
    nheads = (c1 - c0) // dh
    pooled = _partition_windows(x, side, win).mean(axis=2)   # (B, nW, D)
    q = matmul(x, weights["wq"][:, c0:c1])
    k = matmul(pooled, weights["wk"][:, c0:c1])
    v = matmul(pooled, weights["wv"][:, c0:c1])
    return _head_attention(q, k, v, nheads)


def hilo_attention(x, cfg: DecoderConfig, weights):
    """HiLo attention over (B, N, D) tokens; see module docstring."""
    dh = cfg.width // cfg.heads
    chi = cfg.high_heads * dh
    parts = []
    if chi > 0:
        parts.append(windowed_branch(x, weights, cfg, 0, chi, cfg.window))
    if chi < cfg.width:
        parts.append(pooled_branch(x, weights, cfg, chi, cfg.width, cfg.window))
    mixed = parts[0] if len(parts) == 1 else concat(parts, axis=-1)
    return matmul(mixed, weights["wo"]) + weights["bo"]


def windowed_attention(x, cfg, weights, win=None):
    """All heads in windowed self-attention (the alpha = 1 degenerate case)."""
    out = windowed_branch(x, weights, cfg, 0, cfg.width, win or cfg.window)
    return matmul(out, weights["wo"]) + weights["bo"]


def pooled_attention(x, cfg, weights):
    """All heads attending to pooled tokens (the alpha = 0 degenerate case)."""
    out = pooled_branch(x, weights, cfg, 0, cfg.width, cfg.window)
    return matmul(out, weights["wo"]) + weights["bo"]


def freq_select(z, xi, proj):
    """Gate each token by its cosine alignment with the task embedding.

    s_j = (cos(z_j, xi) + 1) / 2; output_j = s_j * (proj @ z_j).
    Zero-norm tokens gate to exactly 0.
    """
    if not np.any(xi.data):
        raise ContractError("task embedding must be nonzero")
    dot = (z * xi).sum(axis=-1)
    sq = (z * z).sum(axis=-1)
    alive = (sq.data > 0).astype(np.float64)
    # dead tokens get a unit norm so the sqrt stays differentiable; the
    # alive mask then forces their gate to exactly 0
    nz = (sq + Tensor(1.0 - alive)).sqrt()
    nxi = (xi * xi).sum().sqrt()
    denom = nz * nxi
    cos = dot / denom * Tensor(alive) + Tensor(alive - 1.0)
    s = (cos + 1.0) * 0.5
    pz = matmul(z, proj.swapaxes(0, 1))
    return pz * s.reshape(s.shape + (1,))


def relationship_descriptor(t, g, phi_w, phi_b):
    """Fuse class embeddings with the global image feature.

    t: (C, D) class embeddings; g: (D,) or (B, D) cls feature. Returns
    (C, D) or (B, C, D): projection of [t * g ; t] from 2D to D.
    """
    c, d = t.shape
    if g.ndim == 1:
        g_b = g.reshape(1, d)
        t_b = t
    else:
        g_b = g.reshape(g.shape[0], 1, d)
        t_b = t + Tensor(np.zeros((g.shape[0], c, d)))
    tg = t_b * g_b
    cat = concat([tg, t_b], axis=-1)
    return matmul(cat, phi_w) + phi_b


class SpectralGuidedDecoder:
    """Stack of decode layers producing class-by-patch mask logits."""

    def __init__(self, cfg: DecoderConfig, seed=0):
        self.cfg = cfg
        d = cfg.width
        rng = substream(seed, "decoder")

        def train_param(shape, scale):
            return Tensor(scale * rng.standard_normal(shape), requires_grad=True)

        self.layer_weights = []
        hidden = 2 * d
        for _ in range(cfg.layers):
            w = {
                "ln1_g": Tensor(np.ones(d), requires_grad=True),
                "ln1_b": Tensor(np.zeros(d), requires_grad=True),
                "wq": train_param((d, d), 1.0 / np.sqrt(d)),
                "wk": train_param((d, d), 1.0 / np.sqrt(d)),
                "wv": train_param((d, d), 1.0 / np.sqrt(d)),
                "wo": train_param((d, d), 1.0 / np.sqrt(d)),
                "bo": Tensor(np.zeros(d), requires_grad=True),
                "ln2_g": Tensor(np.ones(d), requires_grad=True),
                "ln2_b": Tensor(np.zeros(d), requires_grad=True),
                "mlp_w1": train_param((d, hidden), 1.0 / np.sqrt(d)),
                "mlp_b1": Tensor(np.zeros(hidden), requires_grad=True),
                "mlp_w2": train_param((hidden, d), 1.0 / np.sqrt(hidden)),
                "mlp_b2": Tensor(np.zeros(d), requires_grad=True),
            }
            if cfg.spectral_guided:
                xi = rng.standard_normal(d)
                w["xi"] = Tensor(xi / np.linalg.norm(xi), requires_grad=True)
                w["p"] = Tensor(np.eye(d) + 0.02 * rng.standard_normal((d, d)),
                                requires_grad=True)
            self.layer_weights.append(w)
        self.phi_w = train_param((2 * d, d), 1.0 / np.sqrt(2 * d))
        self.phi_b = Tensor(np.zeros(d), requires_grad=True)

    def params(self):
        out = {}
        for i, w in enumerate(self.layer_weights):
            for k, v in w.items():
                out[f"decoder.layer{i + 1}.{k}"] = v
        out["decoder.phi_w"] = self.phi_w
        out["decoder.phi_b"] = self.phi_b
        return out

    def _attend(self, x, w):
        cfg = self.cfg
        if cfg.spectral_guided:
            return hilo_attention(x, cfg, w)
        side = int(round(np.sqrt(x.shape[-2])))
        return windowed_attention(x, cfg, w, win=side)  # one window: plain MSA

    def decode(self, h_final, g_final, t):
        """(B, N, D) patch features + (B, D) cls + (C, D) embeddings -> (B, C, N)."""
        if t.shape[0] < 2:
            raise ContractError("need at least two classes")
        z = h_final if h_final.ndim == 3 else h_final.reshape((1,) + h_final.shape)
        g = g_final if g_final.ndim == 2 else g_final.reshape((1,) + g_final.shape)
        for w in self.layer_weights:
            a = z + self._attend(layer_norm(z, w["ln1_g"], w["ln1_b"]), w)
            y = layer_norm(a, w["ln2_g"], w["ln2_b"])
            y = matmul(y, w["mlp_w1"]) + w["mlp_b1"]
            y = y.gelu()
            y = matmul(y, w["mlp_w2"]) + w["mlp_b2"]
            z = a + y
            if self.cfg.spectral_guided:
                z = freq_select(z, w["xi"], w["p"])
        that = relationship_descriptor(t, g, self.phi_w, self.phi_b)
        return matmul(that, z.swapaxes(-1, -2))


def predict(masks, class_subset, image_side):
    """Per-patch argmax over a class subset, upsampled to pixel labels.

    masks: (C, N) logits (Tensor or array) for one image. Ties break toward
    the lowest class id; patch labels expand to pixels by nearest neighbor.
    """
    if len(class_subset) == 0:
        raise ContractError("class subset must be non-empty")
    arr = masks.data if isinstance(masks, Tensor) else np.asarray(masks)
    subset = np.asarray(sorted(class_subset), dtype=np.int64)
    picked = subset[np.argmax(arr[subset], axis=0)]
    n = arr.shape[1]
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise DimensionError(f"token count {n} is not a perfect square")
    if image_side % side != 0:
        raise DimensionError(f"image side {image_side} not a multiple of grid {side}")
    f = image_side // side
    grid = picked.reshape(side, side)
    return np.repeat(np.repeat(grid, f, axis=0), f, axis=1)
