"""Strict INI-style configuration: sections [encoder], [decoder], [loss],
[train], [data]. Unknown sections or keys are hard errors so ablation runs
cannot silently typo a knob. parse -> serialize -> parse is a fixed point.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass

from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .errors import ConfigError
from .losses import LossConfig


@dataclass
class TrainConfig:
    steps: int = 2000
    batch: int = 8
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 1e-4
    seed: int = 0
    overfit: bool = False

    def __post_init__(self):
        if self.steps < 1 or self.batch < 1:
            raise ConfigError("steps and batch must be positive")


@dataclass
class DataConfig:
    n_train: int = 96
    n_test: int = 32
    n_seen: int = 6
    n_unseen: int = 2
    shapes_min: int = 1
    shapes_max: int = 3
    min_radius: int = 12
    max_radius: int = 20

    def __post_init__(self):
        if self.n_seen < 2 or self.n_unseen < 1:
            raise ConfigError("need at least 2 seen and 1 unseen classes")


@dataclass
class FullConfig:
    encoder: EncoderConfig
    decoder: DecoderConfig
    loss: LossConfig
    train: TrainConfig
    data: DataConfig

    @classmethod
    def default(cls):
        return cls(EncoderConfig(), DecoderConfig(), LossConfig(),
                   TrainConfig(), DataConfig())


_SECTIONS = {
    "encoder": EncoderConfig,
    "decoder": DecoderConfig,
    "loss": LossConfig,
    "train": TrainConfig,
    "data": DataConfig,
}

# [decoder] width always mirrors [encoder] width; it is not a config key.
_HIDDEN_KEYS = {"decoder": {"width"}}


def _convert(raw, typ, section, key):
    try:
        if typ is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        return typ(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {typ.__name__}")


def parse_config(text):
    """Parse INI text into a FullConfig; unknown sections/keys are errors."""
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed config: {e}")
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
    built = {}
    for section, cls in _SECTIONS.items():
        fields = {f.name: f for f in dataclasses.fields(cls)}
        hidden = _HIDDEN_KEYS.get(section, set())
        kwargs = {}
        if cp.has_section(section):
            for key, raw in cp.items(section):
                if key not in fields or key in hidden:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                kwargs[key] = _convert(raw, fields[key].type if isinstance(fields[key].type, type)
                                       else type(fields[key].default), section, key)
        built[section] = cls(**kwargs)
    built["decoder"] = dataclasses.replace(built["decoder"], width=built["encoder"].width)
    return FullConfig(**built)


def parse_config_file(path):
    try:
        with open(path) as f:
            return parse_config(f.read())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}")


def serialize_config(cfg: FullConfig):
    """Canonical INI rendering (round-trips through parse_config)."""
    out = []
    for section, cls in _SECTIONS.items():
        obj = getattr(cfg, section)
        out.append(f"[{section}]")
        hidden = _HIDDEN_KEYS.get(section, set())
        for f in dataclasses.fields(cls):
            if f.name in hidden:
                continue
            v = getattr(obj, f.name)
            out.append(f"{f.name} = {str(v).lower() if isinstance(v, bool) else v}")
        out.append("")
    return "\n".join(out)


def config_to_dict(cfg: FullConfig):
    return {s: dataclasses.asdict(getattr(cfg, s)) for s in _SECTIONS}


def config_from_dict(d):
    built = {s: cls(**d[s]) for s, cls in _SECTIONS.items()}
    return FullConfig(**built)
