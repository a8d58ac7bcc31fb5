"""Model hyperparameters, run settings and the flat ``key=value`` config file."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, fields

from .graphs import ENTITY_VARIANTS, NEWS_VARIANTS

CONFIG_ENV = "GLORY_CONFIG"


class ConfigError(ValueError):
    pass


@dataclass
class HyperParams:
    L_his: int = 50
    L_title: int = 30
    L_entity: int = 5
    M_n: int = 8
    K: int = 2
    M_e: int = 10
    ggnn_layers: int = 3
    heads: int = 20
    d_model: int = 400
    word_dim: int = 300
    entity_dim: int = 100
    pool_dim: int = 200
    K_neg: int = 4
    use_global_news: bool = True
    use_global_entity: bool = True
    graph_encoder: str = "ggnn"  # ggnn | mean
    message_direction: str = "in"  # in | out | both
    news_variant: str = "dir-seq"
    entity_variant: str = "inter-undir"

    def validate(self) -> "HyperParams":
        for name in ("L_his", "L_title", "L_entity", "M_n", "M_e", "heads", "d_model",
                     "word_dim", "entity_dim", "pool_dim", "K_neg"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.K < 0 or self.ggnn_layers < 0:
            raise ConfigError("K and ggnn_layers must be >= 0")
        for name in ("d_model", "word_dim", "entity_dim"):
            if getattr(self, name) % self.heads:
                raise ConfigError(f"{name}={getattr(self, name)} not divisible by heads={self.heads}")
        if self.graph_encoder not in ("ggnn", "mean"):
            raise ConfigError(f"graph_encoder must be 'ggnn' or 'mean', got {self.graph_encoder!r}")
        if self.message_direction not in ("in", "out", "both"):
            raise ConfigError(f"message_direction must be in/out/both, got {self.message_direction!r}")
        if self.news_variant not in NEWS_VARIANTS:
            raise ConfigError(f"news_variant must be one of {', '.join(NEWS_VARIANTS)}")
        if self.entity_variant not in ENTITY_VARIANTS:
            raise ConfigError(f"entity_variant must be one of {', '.join(ENTITY_VARIANTS)}")
        return self


@dataclass
class RunConfig:
    seed: int = 0
    epochs: int = 5
    batch_size: int = 32
    lr: float = 2e-4
    warmup_frac: float = 0.1
    clip_norm: float = 0.0  # 0 disables clipping
    dropout: float = 0.0
    weight_decay: float = 0.0
    checkpoint_every: int = 1
    threads: int = 1
    prefetch: int = 2
    dtype: str = "float32"
    select_best: bool = False

    def validate(self) -> "RunConfig":
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError("dtype must be float32 or float64")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        return self


def _coerce(value: str, typ):
    typ = typ if isinstance(typ, type) else {"int": int, "float": float, "bool": bool, "str": str}[typ]
    if typ is bool:
        low = value.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    try:
        return typ(value.strip())
    except ValueError:
        raise ConfigError(f"cannot parse {value!r} as {typ.__name__}") from None


def field_types() -> dict[str, tuple[type, object]]:
    """Map every addressable key to (owning dataclass, field type)."""
    out = {}
    for cls in (HyperParams, RunConfig):
        for f in fields(cls):
            out[f.name] = (cls, f.type)
    return out


def read_config_file(path) -> dict[str, str]:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            values[key.strip()] = value.strip()
    return values


def build_config(file_values: dict | None = None, overrides: dict | None = None,
                 hp: HyperParams | None = None, run: RunConfig | None = None,
                 validate: bool = True) -> tuple[HyperParams, RunConfig]:
    """Merge config-file values and overrides (overrides win) onto defaults."""
    types = field_types()
    hp = dataclasses.replace(hp) if hp else HyperParams()
    run = dataclasses.replace(run) if run else RunConfig()
    merged = dict(file_values or {})
    merged.update(overrides or {})
    for key, value in merged.items():
        if key not in types:
            raise ConfigError(f"unknown config key {key!r}")
        cls, typ = types[key]
        if isinstance(value, str):
            value = _coerce(value, typ)
        setattr(hp if cls is HyperParams else run, key, value)
    if not validate:
        return hp, run
    return hp.validate(), run.validate()


def load_config(path=None, overrides=None) -> tuple[HyperParams, RunConfig]:
    path = path or os.environ.get(CONFIG_ENV)
    return build_config(read_config_file(path) if path else {}, overrides)


def config_hash(hp: HyperParams, run: RunConfig | None = None) -> str:
    payload = {"hp": dataclasses.asdict(hp)}
    if run is not None:
        payload["run"] = dataclasses.asdict(run)
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]
