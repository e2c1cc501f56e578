import dataclasses

import pytest

from sptseg.config import parse_config

TINY_INI = """\
[encoder]
layers = 2
width = 16
heads = 4
patch = 4
image_side = 24
prompt_len = 2
spt_first = 1
spt_last = 1

[decoder]
layers = 2
window = 3

[train]
steps = 8
batch = 2
seed = 0

[data]
n_train = 6
n_test = 4
min_radius = 5
max_radius = 8
"""


@pytest.fixture
def tiny_cfg():
    return parse_config(TINY_INI)


@pytest.fixture
def tiny_ini(tmp_path):
    p = tmp_path / "tiny.ini"
    p.write_text(TINY_INI)
    return p


def tiny_dataset(cfg):
    from sptseg.data import GzlssSplit, SceneSpec, generate_dataset
    d = cfg.data
    spec = SceneSpec(seed=cfg.train.seed, image_side=cfg.encoder.image_side,
                     shapes_min=d.shapes_min, shapes_max=d.shapes_max,
                     min_radius=d.min_radius, max_radius=d.max_radius)
    split = GzlssSplit.create(d.n_seen, d.n_unseen, cfg.encoder.width,
                              cfg.train.seed)
    return split, generate_dataset(spec, split, d.n_train, d.n_test)
