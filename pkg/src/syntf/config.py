"""Run configuration as flat ``key = value`` text with dotted namespaces.

Task switches (``mode``, ``use_dep``, ``use_pos``, ``seed``) live at top
level; everything else is under ``data.``, ``model.``, ``prior.``,
``loss.`` or ``train.``. ``#`` at line start or after whitespace begins a
comment.
"""
import dataclasses
import os
import re
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .heads import LossWeights, TaskMode
from .model import ModelConfig

CONFIG_DIR_ENV = "SYNTF_CONFIG_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class DataConfig:
    dir: str = ""
    word_vectors: str = ""
    min_count: int = 1


@dataclass
class PriorConfig:
    tau: float = 1.0
    mode: str = "ancestors"  # or "parent_only"
    max_depth: int = 0       # 0 = full ancestor chain


@dataclass
class LossConfig:
    c_dep: typing.Optional[float] = None  # None -> 1 with POS, 5 without
    c_pos: typing.Optional[float] = None  # None -> 1
    batch_reduction: str = "mean"


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 100
    lr: float = 5e-4
    warmup_steps: int = -1  # -1 -> round(warmup_frac * total)
    warmup_frac: float = 0.2
    weight_decay: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    clip_norm: float = 0.0  # 0 = off
    selection: str = "auto"  # auto | slot_f1 | id_m | id_s | sum
    shuffle: bool = True
    eval_batch_size: int = 128


@dataclass
class RunConfig:
    mode: str = "joint"
    use_dep: bool = True
    use_pos: bool = True
    seed: int = 0
    output: str = "runs/default"
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def task(self) -> TaskMode:
        return TaskMode(self.mode)

    @property
    def weights(self) -> LossWeights:
        c_dep = 0.0
        if self.use_dep:
            c_dep = self.loss.c_dep if self.loss.c_dep is not None else (1.0 if self.use_pos else 5.0)
        c_pos = 0.0
        if self.use_pos:
            c_pos = self.loss.c_pos if self.loss.c_pos is not None else 1.0
        return LossWeights(c_dep, c_pos)

    @property
    def max_ancestor_depth(self) -> typing.Optional[int]:
        if self.prior.mode == "parent_only":
            return 1
        return self.prior.max_depth or None

    def validate(self) -> "RunConfig":
        try:
            TaskMode(self.mode)
        except ValueError:
            raise ConfigError(f"mode must be one of sf, id, joint; got {self.mode!r}") from None
        if self.prior.mode not in ("ancestors", "parent_only"):
            raise ConfigError(f"prior.mode must be ancestors or parent_only; got {self.prior.mode!r}")
        if self.prior.tau <= 0:
            raise ConfigError("prior.tau must be positive")
        if self.prior.max_depth < 0:
            raise ConfigError("prior.max_depth must be >= 0")
        t = self.train
        if t.batch_size < 1 or t.epochs < 1:
            raise ConfigError("train.batch_size and train.epochs must be positive")
        if t.selection not in ("auto", "slot_f1", "id_m", "id_s", "sum"):
            raise ConfigError(f"unknown train.selection {t.selection!r}")
        if self.loss.batch_reduction not in ("mean", "sum"):
            raise ConfigError("loss.batch_reduction must be mean or sum")
        if self.data.min_count < 1:
            raise ConfigError("data.min_count must be >= 1")
        try:
            self.model.encoder_config()
            LossWeights(self.weights.c_dep, self.weights.c_pos)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.model.dtype not in ("float32", "float64"):
            raise ConfigError("model.dtype must be float32 or float64")
        return self


def _coerce(raw: str, tp, key: str):
    if typing.get_origin(tp) is typing.Union:
        if raw.lower() in ("none", "null", ""):
            return None
        tp = next(a for a in typing.get_args(tp) if a is not type(None))
    try:
        if tp is bool:
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if tp is int:
            return int(raw)
        if tp is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {tp.__name__}") from None


def set_key(cfg: RunConfig, key: str, raw: str) -> None:
    obj = cfg
    parts = key.strip().split(".")
    for name in parts[:-1]:
        sub = getattr(obj, name, None)
        if not dataclasses.is_dataclass(sub):
            raise ConfigError(f"unknown config section {name!r} in {key!r}")
        obj = sub
    hints = typing.get_type_hints(type(obj))
    leaf = parts[-1]
    if leaf not in hints or dataclasses.is_dataclass(hints[leaf]):
        raise ConfigError(f"unknown config key {key!r}")
    setattr(obj, leaf, _coerce(raw.strip(), hints[leaf], key))


def parse_lines(text: str) -> list[tuple[str, str]]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        line = re.sub(r"(^|\s)#.*$", "", line).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = line.split("=", 1)
        out.append((k.strip(), v.strip()))
    return out


def resolve_path(path: str | Path) -> Path:
    p = Path(path)
    if not p.exists() and not p.is_absolute() and os.environ.get(CONFIG_DIR_ENV):
        alt = Path(os.environ[CONFIG_DIR_ENV]) / p
        if alt.exists():
            return alt
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    return p


def load_config(path: str | Path | None = None, overrides: typing.Sequence[str] = ()) -> RunConfig:
    """File values first, then ``key=value`` overrides (last wins)."""
    cfg = RunConfig()
    if path is not None:
        for k, v in parse_lines(resolve_path(path).read_text(encoding="utf-8")):
            set_key(cfg, k, v)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        set_key(cfg, k, v)
    return cfg.validate()


def to_items(cfg, prefix: str = "") -> list[tuple[str, object]]:
    items = []
    for f in dataclasses.fields(cfg):
        val = getattr(cfg, f.name)
        if dataclasses.is_dataclass(val):
            items += to_items(val, f"{prefix}{f.name}.")
        else:
            items.append((prefix + f.name, val))
    return items


def dump_config(cfg: RunConfig) -> str:
    def fmt(v):
        if v is None:
            return "none"
        if isinstance(v, bool):
            return "true" if v else "false"
        return str(v)

    return "".join(f"{k} = {fmt(v)}\n" for k, v in to_items(cfg))


def config_from_items(items: dict) -> RunConfig:
    cfg = RunConfig()
    for k, v in items.items():
        set_key(cfg, k, "none" if v is None else (str(v).lower() if isinstance(v, bool) else str(v)))
    return cfg
