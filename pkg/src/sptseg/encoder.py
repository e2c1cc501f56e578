"""Frozen toy vision-transformer encoder with deep visual prompts and
spectral prompts in a configurable shallow layer range.

The backbone (patch embedding, attention, MLP, norms) is randomly
initialized and frozen; only the per-layer prompt tokens and the spectral
filters are trainable. Prompt-slot outputs of each block are discarded and
replaced by the next layer's own prompt parameter (deep-prompt regime).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, concat, layer_norm, matmul, softmax
from .errors import ContractError, DimensionError
from .spectral import SpectralFilter, spectral_prompt
from .utils import substream


@dataclass
class EncoderConfig:
    layers: int = 4
    width: int = 32
    heads: int = 4
    patch: int = 4
    image_side: int = 48
    prompt_len: int = 4
    spt_first: int = 1   # inclusive, 1-based; spt_last < spt_first disables SPT
    spt_last: int = 2

    def __post_init__(self):
        if self.image_side % self.patch != 0:
            raise DimensionError(
                f"image side {self.image_side} not divisible by patch {self.patch}")
        if self.width % self.heads != 0:
            raise ContractError(f"width {self.width} not divisible by heads {self.heads}")
        if self.spt_last >= self.spt_first:
            if self.spt_first < 1 or self.spt_last > self.layers:
                raise ContractError(
                    f"spt range [{self.spt_first}, {self.spt_last}] outside [1, {self.layers}]")

    @property
    def grid(self):
        return self.image_side // self.patch

    @property
    def n_patches(self):
        return self.grid * self.grid

    @property
    def spt_layers(self):
        return [l for l in range(1, self.layers + 1)
                if self.spt_first <= l <= self.spt_last]


@dataclass
class TokenSequence:
    """One layer's token state: cls feature, visual prompts, patch tokens."""

    g: Tensor   # (B, D)
    v: Tensor   # (M, D) prompt parameter feeding the next layer
    h: Tensor   # (B, N, D)


def sinusoidal_positions(n, d):
    """Fixed 1D sinusoidal position table of shape (n, d)."""
    pos = np.arange(n)[:, None]
    i = np.arange(d // 2)[None, :]
    ang = pos / np.power(10000.0, 2.0 * i / d)
    table = np.zeros((n, d))
    table[:, 0::2] = np.sin(ang)
    table[:, 1::2] = np.cos(ang)
    return table


class PromptedEncoder:
    """Frozen ViT backbone plus trainable prompt and spectral-filter params."""

    def __init__(self, cfg: EncoderConfig, seed=0):
        self.cfg = cfg
        d = cfg.width
        bb_rng = substream(seed, "encoder", "backbone")
        pr_rng = substream(seed, "encoder", "prompts")
        sf_rng = substream(seed, "encoder", "spt")

        def frozen(shape, scale):
            return Tensor(scale * bb_rng.standard_normal(shape))

        p = {}
        pdim = cfg.patch * cfg.patch * 3
        p["backbone.patch_w"] = frozen((pdim, d), 1.0 / np.sqrt(pdim))
        p["backbone.patch_b"] = frozen((d,), 0.02)
        p["backbone.cls"] = frozen((d,), 0.02)
        p["backbone.pos"] = Tensor(0.1 * sinusoidal_positions(cfg.n_patches, d))
        hidden = 4 * d
        for l in range(1, cfg.layers + 1):
            pre = f"backbone.layer{l}."
            p[pre + "ln1_g"] = Tensor(np.ones(d))
            p[pre + "ln1_b"] = Tensor(np.zeros(d))
            for w in ("wq", "wk", "wv", "wo"):
                p[pre + w] = frozen((d, d), 1.0 / np.sqrt(d))
            p[pre + "bo"] = Tensor(np.zeros(d))
            p[pre + "ln2_g"] = Tensor(np.ones(d))
            p[pre + "ln2_b"] = Tensor(np.zeros(d))
            p[pre + "mlp_w1"] = frozen((d, hidden), 1.0 / np.sqrt(d))
            p[pre + "mlp_b1"] = Tensor(np.zeros(hidden))
            p[pre + "mlp_w2"] = frozen((hidden, d), 1.0 / np.sqrt(hidden))
            p[pre + "mlp_b2"] = Tensor(np.zeros(d))

        for l in range(1, cfg.layers + 1):
            p[f"prompt.v{l}"] = Tensor(
                0.02 * pr_rng.standard_normal((cfg.prompt_len, d)), requires_grad=True)

        self.filters = {}
        for l in cfg.spt_layers:
            filt = SpectralFilter.initialize(cfg.grid, d, sf_rng)
            self.filters[l] = filt
            p[f"spt.wf{l}.re"] = filt.re
            p[f"spt.wf{l}.im"] = filt.im

        self.params = p

    # -- parameter views ---------------------------------------------------

    def backbone_params(self):
        return {k: v for k, v in self.params.items() if k.startswith("backbone.")}

    def trainable_params(self):
        return {k: v for k, v in self.params.items() if v.requires_grad}

    # -- forward -----------------------------------------------------------

    def patch_embed(self, images):
        """Project images (B, S, S, 3) to patch tokens; attach cls and prompts."""
        cfg = self.cfg
        arr = images.data if isinstance(images, Tensor) else np.asarray(images, dtype=np.float64)
        if arr.ndim == 3:
            arr = arr[None]
        b, s1, s2, ch = arr.shape
        if s1 != cfg.image_side or s2 != cfg.image_side or ch != 3:
            raise DimensionError(
                f"expected (B, {cfg.image_side}, {cfg.image_side}, 3) image, got {arr.shape}")
        gsz, psz = cfg.grid, cfg.patch
        patches = (arr.reshape(b, gsz, psz, gsz, psz, 3)
                      .transpose(0, 1, 3, 2, 4, 5)
                      .reshape(b, cfg.n_patches, psz * psz * 3))
        x = Tensor(patches)
        h = matmul(x, self.params["backbone.patch_w"]) + self.params["backbone.patch_b"]
        h = h + self.params["backbone.pos"]
        g = self.params["backbone.cls"] + Tensor(np.zeros((b, cfg.width)))
        return TokenSequence(g=g, v=self.params["prompt.v1"], h=h)

    def _block(self, l, tokens):
        """Pre-norm MSA + MLP transformer block on (B, T, D) tokens."""
        cfg = self.cfg
        p = self.params
        pre = f"backbone.layer{l}."
        x = layer_norm(tokens, p[pre + "ln1_g"], p[pre + "ln1_b"])
        b, t, d = x.shape
        nh = cfg.heads
        dh = d // nh

        def heads(w):
            return (matmul(x, w).reshape(b, t, nh, dh).transpose((0, 2, 1, 3)))

        q, k, v = heads(p[pre + "wq"]), heads(p[pre + "wk"]), heads(p[pre + "wv"])
        scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dh))
        attn = softmax(scores, axis=-1)
        ctx = matmul(attn, v).transpose((0, 2, 1, 3)).reshape(b, t, d)
        ctx = matmul(ctx, p[pre + "wo"]) + p[pre + "bo"]
        a = tokens + ctx
        y = layer_norm(a, p[pre + "ln2_g"], p[pre + "ln2_b"])
        y = matmul(y, p[pre + "mlp_w1"]) + p[pre + "mlp_b1"]
        y = y.gelu()
        y = matmul(y, p[pre + "mlp_w2"]) + p[pre + "mlp_b2"]
        return a + y

    def encoder_layer(self, l, seq, spt_filter=None):
        """Run layer l on the sequence, injecting the spectral prompt if given.

        The prompt-slot output is discarded; the returned sequence carries the
        next layer's own prompt parameter (or the last one at the top).
        """
        cfg = self.cfg
        if not 1 <= l <= cfg.layers:
            raise ContractError(f"layer index {l} outside [1, {cfg.layers}]")
        in_range = l in cfg.spt_layers
        if (spt_filter is not None) != in_range:
            raise ContractError(
                f"spectral filter {'missing for' if in_range else 'supplied outside'} "
                f"spt range at layer {l}")
        h = seq.h
        if spt_filter is not None:
            h = h + spectral_prompt(seq.h, seq.g, spt_filter)
        b = h.shape[0]
        m, d = cfg.prompt_len, cfg.width
        v_in = self.params[f"prompt.v{l}"] + Tensor(np.zeros((b, m, d)))
        tokens = concat([seq.g.reshape(b, 1, d), v_in, h], axis=1)
        out = self._block(l, tokens)
        g_out = out[:, 0]
        h_out = out[:, 1 + m:]
        v_next = self.params[f"prompt.v{min(l + 1, cfg.layers)}"]
        return TokenSequence(g=g_out, v=v_next, h=h_out)

    def encode(self, images):
        """Full pipeline: patch embedding then all layers.

        Returns (g_final (B, D), h_final (B, N, D)).
        """
        seq = self.patch_embed(images)
        for l in range(1, self.cfg.layers + 1):
            seq = self.encoder_layer(l, seq, self.filters.get(l))
        return seq.g, seq.h
