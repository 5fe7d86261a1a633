"""Run configuration: one ``[lois]`` section of ``key = value`` lines.

Defaults are the full-scale settings; every field is validated on load,
before any work starts.
"""

import configparser
from dataclasses import dataclass, fields, asdict

from . import masks, nms, question, training, views
from .attention import ORDERS, ModelConfig
from .training import TrainConfig

SECTION = "lois"


class ConfigError(ValueError):
    def __init__(self, field_name, message):
        super().__init__(f"config field {field_name!r}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class RunConfig:
    grid_side: int = masks.DEFAULT_GRID
    categories: int = masks.DEFAULT_CATEGORIES
    score_threshold: float = masks.SCORE_THRESHOLD
    mask_threshold: float = masks.MASK_THRESHOLD
    post_threshold: float = nms.POST_THRESHOLD
    background_grid: int = views.DEFAULT_GRID
    feature_dim: int = views.FEATURE_DIM
    question_dim: int = question.EMBED_DIM
    question_len: int = question.MAX_LENGTH
    embed_seed: int = 0
    fused_dim: int = 1024
    rank: int = 32
    logit_rank: int = 32
    glimpses: int = 8
    answers: int = 3000
    order: str = "I-B-Q"
    dropout: float = 0.5
    mask_padding: bool = False
    lr: float = training.BASE_LR
    momentum: float = training.MOMENTUM
    weight_decay: float = training.WEIGHT_DECAY
    clip_norm: float = training.CLIP_NORM
    clip_mode: str = "norm"
    warmup_ratio: float = training.WARMUP_RATIO
    warmup_fraction: float = 0.1
    epochs: int = 100
    batch_size: int = training.BATCH_SIZE
    seed: int = 0

    def __post_init__(self):
        positive = ("grid_side", "categories", "background_grid", "feature_dim", "question_dim",
                    "question_len", "fused_dim", "rank", "logit_rank", "glimpses", "answers",
                    "batch_size")
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(name, "must be >= 1")
        for name in ("score_threshold", "mask_threshold", "post_threshold", "warmup_ratio",
                     "warmup_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(name, "must lie in [0, 1]")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout", "must lie in [0, 1)")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum", "must lie in [0, 1)")
        if self.lr < 0.0:
            raise ConfigError("lr", "must be >= 0")
        if self.weight_decay < 0.0:
            raise ConfigError("weight_decay", "must be >= 0")
        if self.clip_norm <= 0.0:
            raise ConfigError("clip_norm", "must be > 0")
        if self.clip_mode not in ("norm", "value"):
            raise ConfigError("clip_mode", "must be 'norm' or 'value'")
        if self.order not in ORDERS:
            raise ConfigError("order", f"must be one of {', '.join(ORDERS)}")
        if self.epochs < 0:
            raise ConfigError("epochs", "must be >= 0")

    def model_config(self):
        return ModelConfig(
            feature_dim=self.feature_dim, question_dim=self.question_dim,
            question_len=self.question_len, fused_dim=self.fused_dim, rank=self.rank,
            logit_rank=self.logit_rank, glimpses=self.glimpses, answers=self.answers,
            order=self.order, dropout=self.dropout, mask_padding=self.mask_padding,
        )

    def train_config(self):
        return TrainConfig(
            lr=self.lr, momentum=self.momentum, weight_decay=self.weight_decay,
            clip_norm=self.clip_norm, clip_mode=self.clip_mode, warmup_ratio=self.warmup_ratio,
            warmup_fraction=self.warmup_fraction, epochs=self.epochs,
            batch_size=self.batch_size, seed=self.seed,
        )

    def to_text(self):
        lines = [f"[{SECTION}]"]
        lines += [f"{k} = {str(v).lower() if isinstance(v, bool) else v}" for k, v in asdict(self).items()]
        return "\n".join(lines) + "\n"


def _convert(name, kind, raw):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is float and "/" in raw:
            num, den = raw.split("/")
            return float(num) / float(den)
        return kind(raw.strip())
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r} as {kind.__name__}") from None


def parse_config(text):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    if not parser.has_section(SECTION):
        raise ConfigError("<file>", f"missing [{SECTION}] section")
    known = {f.name: type(f.default) for f in fields(RunConfig)}
    values = {}
    for key, raw in parser.items(SECTION):
        if key not in known:
            raise ConfigError(key, "unknown field")
        values[key] = _convert(key, known[key], raw)
    return RunConfig(**values)


def load_config(path):
    with open(path, encoding="utf-8") as f:
        return parse_config(f.read())
