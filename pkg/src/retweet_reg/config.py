"""Run configuration: everything a command needs beyond the dataset.

A run is reproducible from the dataset file plus one RunConfig; every
random choice downstream derives from the single seed here.
"""

import dataclasses
from dataclasses import dataclass

from .errors import UsageError
from .jsonio import read_json
from .models import ARCHITECTURES, MODES, ModelConfig
from .optim import TARGET_TRANSFORMS, AdamState


@dataclass
class RunConfig:
    data: str = ""
    out: str = "out"
    seed: int = 7
    split_ratios: tuple = (4, 1, 1)
    arch: str = "cnn"
    mode: str = "combined"
    embed_dim: int = 100
    seq_len: int = 30
    pad: int = 49
    filters_l1: int = 64
    filters_l2: int = 64
    filter_width: int = 3
    k_pool: int = 5
    rnn_hidden: int = 32
    numeric_dim: int = 12
    cnn_activation: str = "relu"
    rnn_activation: str = "tanh"
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    target_transform: str = "none"

    def validate(self, require_data: bool = True) -> None:
        if require_data and not self.data:
            raise UsageError("no dataset given; pass --data or set it in the config file")
        if self.arch not in ARCHITECTURES:
            raise UsageError(f"arch must be one of {ARCHITECTURES}, got {self.arch!r}")
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(self.split_ratios) != 3 or any(
            not isinstance(r, int) or r < 1 for r in self.split_ratios
        ):
            raise UsageError(f"split_ratios must be three positive integers, got {self.split_ratios!r}")
        if self.epochs < 1:
            raise UsageError(f"epochs must be positive, got {self.epochs}")
        if self.batch_size < 1:
            raise UsageError(f"batch size must be positive, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise UsageError(f"learning rate must be positive, got {self.learning_rate}")
        if self.target_transform not in TARGET_TRANSFORMS:
            raise UsageError(
                f"target_transform must be one of {sorted(TARGET_TRANSFORMS)}, "
                f"got {self.target_transform!r}"
            )

    def to_model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            arch=self.arch,
            mode=self.mode,
            vocab_size=vocab_size,
            embed_dim=self.embed_dim,
            seq_len=self.seq_len,
            pad=self.pad,
            filters_l1=self.filters_l1,
            filters_l2=self.filters_l2,
            filter_width=self.filter_width,
            k_pool=self.k_pool,
            rnn_hidden=self.rnn_hidden,
            numeric_dim=self.numeric_dim,
            cnn_activation=self.cnn_activation,
            rnn_activation=self.rnn_activation,
        )

    def to_adam_state(self) -> AdamState:
        return AdamState(
            alpha=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
        )


def load_run_config(path) -> RunConfig:
    """Read a RunConfig from a JSON file; unknown keys are rejected so
    typos do not silently fall back to defaults."""
    payload = read_json(path)
    if not isinstance(payload, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    if "split_ratios" in payload:
        payload["split_ratios"] = tuple(payload["split_ratios"])
    return RunConfig(**payload)
