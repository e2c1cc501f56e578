"""Full segmentation model: frozen prompted encoder + spectral-guided
decoder + frozen class-embedding table."""

from __future__ import annotations

import dataclasses

import numpy as np

from .autodiff import Tensor, no_grad, softmax
from .checkpoint import load_checkpoint, save_checkpoint
from .config import FullConfig, config_from_dict, config_to_dict
from .data import GzlssSplit
from .decoder import SpectralGuidedDecoder, predict
from .encoder import PromptedEncoder
from .errors import CheckpointError, ContractError
from .utils import tensor_table_hash


class SptSegModel:
    def __init__(self, cfg: FullConfig, split: GzlssSplit):
        if split.embeddings.shape != (split.num_classes, cfg.encoder.width):
            raise ContractError(
                f"embedding table {split.embeddings.shape} does not match "
                f"{split.num_classes} classes at width {cfg.encoder.width}")
        self.cfg = cfg
        self.split = split
        seed = cfg.train.seed
        self.encoder = PromptedEncoder(cfg.encoder, seed=seed)
        dec_cfg = dataclasses.replace(cfg.decoder, width=cfg.encoder.width)
        self.decoder = SpectralGuidedDecoder(dec_cfg, seed=seed)

    @classmethod
    def create(cls, cfg: FullConfig):
        split = GzlssSplit.create(cfg.data.n_seen, cfg.data.n_unseen,
                                  cfg.encoder.width, cfg.train.seed)
        return cls(cfg, split)

    # -- parameters --------------------------------------------------------

    def named_params(self):
        out = dict(self.encoder.params)
        out.update(self.decoder.params())
        out["embed.table"] = self.split.embeddings
        return out

    def trainable_params(self):
        return {k: v for k, v in self.named_params().items() if v.requires_grad}

    def backbone_hash(self):
        return tensor_table_hash(self.encoder.backbone_params())

    # -- forward -----------------------------------------------------------

    def forward_masks(self, images, class_ids):
        """(B, S, S, 3) images -> (B, C_subset, N) mask logits."""
        class_ids = list(class_ids)
        if not class_ids:
            raise ContractError("class subset must be non-empty")
        g, h = self.encoder.encode(images)
        t = self.split.embeddings[np.asarray(class_ids, dtype=np.int64)]
        return self.decoder.decode(h, g, t)

    def predict_labels(self, images, class_ids):
        """Hard per-pixel labels for a batch; returns (B, S, S) int64."""
        class_ids = sorted(class_ids)
        side = self.cfg.encoder.image_side
        with no_grad():
            masks = self.forward_masks(images, class_ids)
        out = []
        for i in range(masks.shape[0]):
            # rows of `masks` are already the subset; map positions back to ids
            full = np.full((self.split.num_classes, masks.shape[2]), -np.inf)
            full[np.asarray(class_ids)] = masks.data[i]
            out.append(predict(full, class_ids, side))
        return np.stack(out)

    def pixel_probs(self, images, class_ids):
        """Softmax over the class axis, bilinearly lifted to pixels."""
        from .losses import upsample_probs
        masks = self.forward_masks(images, class_ids)
        probs = softmax(masks, axis=1)
        return upsample_probs(probs, self.cfg.encoder.image_side)

    # -- checkpointing -----------------------------------------------------

    def checkpoint_config(self):
        return {
            "config": config_to_dict(self.cfg),
            "split": {
                "seen": list(self.split.seen),
                "unseen": list(self.split.unseen),
                "unseen_parents": {str(k): list(v)
                                   for k, v in self.split.unseen_parents.items()},
            },
        }

    def to_checkpoint(self):
        return save_checkpoint(self.named_params(), self.checkpoint_config())

    @classmethod
    def from_checkpoint(cls, blob):
        tensors, snapshot = load_checkpoint(blob)
        cfg = config_from_dict(snapshot["config"])
        sp = snapshot["split"]
        if "embed.table" not in tensors:
            raise CheckpointError("checkpoint is missing the class-embedding table")
        split = GzlssSplit(
            seen=list(sp["seen"]), unseen=list(sp["unseen"]),
            embeddings=Tensor(tensors["embed.table"]),
            unseen_parents={int(k): tuple(v)
                            for k, v in sp["unseen_parents"].items()})
        model = cls(cfg, split)
        params = model.named_params()
        missing = set(params) - set(tensors)
        extra = set(tensors) - set(params)
        if missing or extra:
            raise CheckpointError(
                f"tensor table mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for name, arr in tensors.items():
            if params[name].data.shape != arr.shape:
                raise CheckpointError(f"{name}: shape {arr.shape} != {params[name].data.shape}")
            params[name].data = arr.copy()
        return model
