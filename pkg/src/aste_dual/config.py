"""Model and training configuration.

All hyperparameters live in one dataclass with the defaults used for the
benchmark runs; any field can be set from a YAML config file or overridden
by a CLI flag.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import yaml

from .errors import ConfigError


@dataclass
class ModelConfig:
    # basic encoder
    encoder_name: str = "bert-base-uncased"

    # widths
    d_g: int = 300  # general-domain word vectors
    d_s: int = 500  # review-domain word vectors
    d_p: int = 100  # learnable POS vectors
    d_l: int = 600  # particular-branch hidden width (both LSTM directions)
    d_relation: int = 256

    # depths
    gcn_layers: int = 2
    interaction_layers: int = 2
    cnn_layers: int = 2
    attention_heads: int = 1
    share_interaction_weights: bool = False

    # candidate selection: 0 means the max(n, 10) policy, clamped to n^2
    top_k: int = 0

    # regularization / loss
    dropout: float = 0.1
    boundary_pos_weight: float = 1.0
    max_negatives: int = 0  # training-time cap on INVALID candidates; 0 = keep all
    pooling: str = "mean"

    # graph construction
    self_loops: bool = True

    # training
    epochs: int = 15
    batch_size: int = 8
    encoder_lr: float = 2e-5  # pretrained-encoder parameter group
    lr: float = 1e-3  # everything else
    lr_decay_epoch: int = 0  # 0 = constant lr; otherwise step-decay after this epoch
    lr_decay_factor: float = 0.3
    max_grad_norm: float = 1.0
    seed: int = 42
    select_on_test: bool = False
    train_with_gold_regions: bool = True
    track_train_f1: bool = False

    # ablation switches
    no_basic: bool = False
    no_particular: bool = False
    no_interaction: bool = False
    single_embedding: bool = False
    no_gcn: bool = False

    def validate(self) -> None:
        for name in ("d_g", "d_s", "d_p", "d_l", "d_relation"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.d_l % 2 != 0:
            raise ConfigError("d_l must be even (two LSTM directions)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.no_interaction and self.interaction_layers < 1:
            raise ConfigError("interaction_layers must be >= 1")
        if self.gcn_layers < 0 or self.cnn_layers < 0:
            raise ConfigError("layer counts must be non-negative")
        if self.top_k < 0:
            raise ConfigError("top_k must be 0 (auto) or positive")
        if self.lr_decay_epoch < 0 or not 0.0 < self.lr_decay_factor <= 1.0:
            raise ConfigError("bad lr decay settings")
        if self.max_negatives < 0:
            raise ConfigError("max_negatives must be 0 (keep all) or positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.pooling not in ("mean", "max"):
            raise ConfigError(f"unknown pooling mode {self.pooling!r}")
        if self.no_basic and self.no_particular:
            raise ConfigError("cannot ablate both encoders")

    @property
    def effective_gcn_layers(self) -> int:
        return 0 if self.no_gcn else self.gcn_layers

    def top_k_for(self, n: int) -> int:
        k = self.top_k if self.top_k > 0 else max(n, 10)
        return min(k, n * n)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg


def load_config(path) -> ModelConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return ModelConfig.from_dict(data)


def save_config(config: ModelConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)
