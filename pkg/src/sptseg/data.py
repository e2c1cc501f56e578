"""Deterministic synthetic scenes for the seen/unseen segmentation task.

Each image is a noisy background with 1-3 colored geometric shapes; every
pixel carries exactly one class label. Training scenes contain only seen
shape classes. Unseen classes get embeddings (and colors) blended from two
seen classes so that zero-shot transfer is geometrically possible.
"""

from __future__ import annotations

import colorsys
import os
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError, ContractError, DimensionError
from .utils import substream

SHAPE_ORDER = ("circle", "square", "triangle", "diamond", "cross",
               "ring", "checker", "stripes")


@dataclass
class GzlssSplit:
    """Seen/unseen class registry with frozen per-class embeddings."""

    seen: list
    unseen: list
    embeddings: Tensor                  # (C, D), unit-norm rows, frozen
    unseen_parents: dict = field(default_factory=dict)

    def __post_init__(self):
        if set(self.seen) & set(self.unseen):
            raise ContractError("seen and unseen class sets must be disjoint")

    @property
    def num_classes(self):
        return len(self.seen) + len(self.unseen)

    @classmethod
    def create(cls, n_seen=6, n_unseen=2, width=32, seed=0):
        """Background is class 0 (seen); shape classes follow in order."""
        rng = substream(seed, "embed")
        c = n_seen + n_unseen
        emb = rng.standard_normal((c, width))
        seen = list(range(n_seen))
        unseen = list(range(n_seen, c))
        parents = {}
        shape_seen = seen[1:]  # shape classes only, background excluded
        for j, u in enumerate(unseen):
            a = shape_seen[j % len(shape_seen)]
            b = shape_seen[(j + 1) % len(shape_seen)]
            parents[u] = (a, b)
            emb[u] = 0.5 * (emb[a] + emb[b]) + 0.1 * rng.standard_normal(width)
        emb /= np.linalg.norm(emb, axis=1, keepdims=True)
        return cls(seen=seen, unseen=unseen, embeddings=Tensor(emb),
                   unseen_parents=parents)


@dataclass
class SceneSpec:
    """Generator settings; (seed, spec) fully determines every byte."""

    seed: int = 0
    image_side: int = 48
    shapes_min: int = 1
    shapes_max: int = 3
    min_radius: int = 12
    max_radius: int = 20


# -- shape rasterizers ----------------------------------------------------

def _shape_mask(name, side, cy, cx, r):
    yy, xx = np.mgrid[0:side, 0:side]
    dy = yy - cy
    dx = xx - cx
    if name == "circle":
        return dy * dy + dx * dx <= r * r
    if name == "square":
        return (np.abs(dy) <= r) & (np.abs(dx) <= r)
    if name == "triangle":
        return (np.abs(dy) <= r) & (np.abs(dx) <= (dy + r) / 2.0)
    if name == "diamond":
        return np.abs(dy) + np.abs(dx) <= r
    if name == "cross":
        arm = max(3, r // 2)
        return (((np.abs(dx) <= arm) & (np.abs(dy) <= r))
                | ((np.abs(dy) <= arm) & (np.abs(dx) <= r)))
    if name == "ring":
        d2 = dy * dy + dx * dx
        inner = r // 2
        return (d2 <= r * r) & (d2 >= inner * inner)
    if name == "checker":
        cell = max(4, (2 * r) // 3)
        sq = (np.abs(dy) <= r) & (np.abs(dx) <= r)
        return sq & (((dy + r) // cell + (dx + r) // cell) % 2 == 0)
    if name == "stripes":
        sq = (np.abs(dy) <= r) & (np.abs(dx) <= r)
        return sq & (((dy + r) // 4) % 2 == 0)
    raise ConfigError(f"no shape generator named {name!r}")


def class_shape_names(split):
    """Map every non-background class id to its shape generator name."""
    shape_ids = [c for c in split.seen if c != 0] + list(split.unseen)
    if len(shape_ids) > len(SHAPE_ORDER):
        raise ConfigError(
            f"{len(shape_ids)} shape classes but only {len(SHAPE_ORDER)} generators")
    return {cid: SHAPE_ORDER[i] for i, cid in enumerate(shape_ids)}


def class_colors(split, seed):
    """Deterministic RGB base color per class; unseen colors blend parents.

    Seen shape classes take evenly spaced hues with a small seeded jitter,
    so any two classes stay separable regardless of the seed.
    """
    rng = substream(seed, "colors")
    colors = {0: np.array([0.15, 0.15, 0.18])}
    shape_ids = [c for c in split.seen if c != 0]
    for i, cid in enumerate(shape_ids):
        hue = (i / len(shape_ids) + 0.02 * rng.standard_normal()) % 1.0
        sat = 0.55 + 0.15 * rng.random()
        val = 0.75 + 0.15 * rng.random()
        colors[cid] = np.array(colorsys.hsv_to_rgb(hue, sat, val))
    for cid in split.unseen:
        a, b = split.unseen_parents.get(cid, (split.seen[1], split.seen[-1]))
        colors[cid] = 0.5 * (colors[a] + colors[b])
    return colors


@dataclass
class Sample:
    image: np.ndarray    # (S, S, 3) float64 in [0, 1], uint8-quantized values
    labels: np.ndarray   # (S, S) int64 class ids
    seed: int
    classes: list


def _render(spec, split, shapes, names, colors, rng):
    side = spec.image_side
    img = colors[0] + 0.05 * rng.standard_normal((side, side, 3))
    labels = np.zeros((side, side), dtype=np.int64)
    for cid in shapes:
        r = int(rng.integers(spec.min_radius, spec.max_radius + 1))
        cy = int(rng.integers(r + 1, side - r - 1))
        cx = int(rng.integers(r + 1, side - r - 1))
        mask = _shape_mask(names[cid], side, cy, cx, r)
        labels[mask] = cid
        img[mask] = colors[cid] + 0.05 * rng.standard_normal((side, side, 3))[mask]
    u8 = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    return u8.astype(np.float64) / 255.0, labels


def _make_sample(spec, split, names, colors, img_seed, pool, force_first=None):
    rng = substream(img_seed, "scene")
    k = int(rng.integers(spec.shapes_min, spec.shapes_max + 1))
    shapes = [int(rng.choice(pool)) for _ in range(k)]
    if force_first is not None:
        shapes[0] = force_first
    image, labels = _render(spec, split, shapes, names, colors, rng)
    present = sorted(set(np.unique(labels).tolist()))
    return Sample(image=image, labels=labels, seed=img_seed, classes=present)


def generate_dataset(spec: SceneSpec, split: GzlssSplit, n_train, n_test):
    """Deterministic (train, test) sample lists.

    Training labels never contain an unseen class id; every other test
    image is forced to contain at least one unseen shape.
    """
    if n_train < 1 or n_test < 1:
        raise ContractError("need at least one train and one test sample")
    names = class_shape_names(split)
    colors = class_colors(split, spec.seed)
    seen_pool = [c for c in split.seen if c != 0]
    full_pool = seen_pool + list(split.unseen)
    train = []
    for i in range(n_train):
        img_seed = int(substream(spec.seed, "data", f"train{i}").integers(2 ** 31))
        train.append(_make_sample(spec, split, names, colors, img_seed, seen_pool))
    test = []
    for i in range(n_test):
        img_seed = int(substream(spec.seed, "data", f"test{i}").integers(2 ** 31))
        force = split.unseen[(i // 2) % len(split.unseen)] if i % 2 == 0 else None
        test.append(_make_sample(spec, split, names, colors, img_seed, full_pool,
                                 force_first=force))
    return train, test


# -- on-disk format: binary PPM/PGM plus a manifest ------------------------

def write_ppm(path, image):
    """image: (S, S, 3) float in [0, 1] -> binary P6."""
    u8 = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    h, w, _ = u8.shape
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode())
        f.write(u8.tobytes())


def write_pgm(path, labels):
    arr = np.asarray(labels)
    if arr.max() > 255:
        raise ContractError("class ids above 255 do not fit the PGM format")
    u8 = arr.astype(np.uint8)
    h, w = u8.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode())
        f.write(u8.tobytes())


def _read_netpbm(path, magic):
    with open(path, "rb") as f:
        data = f.read()
    fields = data.split(b"\n", 3)
    if fields[0] != magic:
        raise ContractError(f"{path}: expected {magic.decode()} file")
    w, h = (int(v) for v in fields[1].split())
    return np.frombuffer(fields[3], dtype=np.uint8), h, w


def read_ppm(path):
    raw, h, w = _read_netpbm(path, b"P6")
    return raw.reshape(h, w, 3).astype(np.float64) / 255.0


def read_pgm(path):
    raw, h, w = _read_netpbm(path, b"P5")
    return raw.reshape(h, w).astype(np.int64)


def save_split_dir(path, samples):
    os.makedirs(path, exist_ok=True)
    lines = []
    for i, s in enumerate(samples):
        img_name = f"img_{i:04d}.ppm"
        lbl_name = f"lbl_{i:04d}.pgm"
        write_ppm(os.path.join(path, img_name), s.image)
        write_pgm(os.path.join(path, lbl_name), s.labels)
        lines.append(f"{img_name} {s.seed} {','.join(map(str, s.classes))}\n")
    with open(os.path.join(path, "manifest.txt"), "w") as f:
        f.writelines(lines)


def load_split_dir(path):
    manifest = os.path.join(path, "manifest.txt")
    if not os.path.isfile(manifest):
        raise ContractError(f"no manifest at {manifest}")
    samples = []
    with open(manifest) as f:
        for line in f:
            img_name, seed, classes = line.split()
            labels = read_pgm(os.path.join(path, img_name.replace("img_", "lbl_")
                                           .replace(".ppm", ".pgm")))
            samples.append(Sample(
                image=read_ppm(os.path.join(path, img_name)),
                labels=labels, seed=int(seed),
                classes=[int(c) for c in classes.split(",")]))
    return samples


def save_dataset(root, train, test):
    save_split_dir(os.path.join(root, "train"), train)
    save_split_dir(os.path.join(root, "test"), test)


def load_dataset(root):
    return (load_split_dir(os.path.join(root, "train")),
            load_split_dir(os.path.join(root, "test")))
