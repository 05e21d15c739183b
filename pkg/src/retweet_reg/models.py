"""Regressor assembly: CNN and RNN architectures in three input modes.

A model is one or two branches (text, numeric) whose flattened outputs
feed a single dense output unit. In combined mode the text block comes
first in the concatenation, so the head weight's leading columns belong
to the text branch.
"""

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import BuildError, InferenceError, NumericError, ValidationError
from .jsonio import read_json, write_json
from .nn import (
    Activation,
    Conv1d,
    Dense,
    Embedding,
    Flatten,
    Fold,
    KMaxPool,
    Sequential,
    SimpleRnn,
)

ARCHITECTURES = ("cnn", "rnn")
MODES = ("numeric_only", "text_only", "combined")


@dataclass
class ModelConfig:
    arch: str = "cnn"
    mode: str = "combined"
    vocab_size: int = 2
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

    def validate(self) -> None:
        if self.arch not in ARCHITECTURES:
            raise BuildError(f"arch must be one of {ARCHITECTURES}, got {self.arch!r}")
        if self.mode not in MODES:
            raise BuildError(f"mode must be one of {MODES}, got {self.mode!r}")
        for field in ("vocab_size", "embed_dim", "seq_len", "filters_l1", "filters_l2",
                      "filter_width", "k_pool", "rnn_hidden", "numeric_dim"):
            if getattr(self, field) < 1:
                raise BuildError(f"{field} must be positive, got {getattr(self, field)}")
        if self.pad < 0:
            raise BuildError(f"pad must be non-negative, got {self.pad}")
        if self.vocab_size < 2:
            raise BuildError("vocab_size must cover the pad and oov ids")
        if self.seq_len + 2 * self.pad < self.filter_width:
            raise BuildError(
                f"padded sequence length {self.seq_len + 2 * self.pad} is shorter "
                f"than the filter width {self.filter_width}"
            )
        if self.filters_l2 % 2:
            raise BuildError(f"filters_l2 must be even for folding, got {self.filters_l2}")
        if self.cnn_activation not in ("relu", "tanh"):
            raise BuildError(f"cnn_activation must be relu or tanh, got {self.cnn_activation!r}")
        if self.rnn_activation != "tanh":
            raise BuildError("only tanh is supported as the recurrent activation")


def _cnn_lengths(cfg: ModelConfig, length: int, pad_l1: int):
    """Sequence lengths through one conv stack: conv -> pool -> conv ->
    fold -> pool. Pool size clamps to the incoming length."""
    w = cfg.filter_width
    l1 = length + 2 * pad_l1 - w + 1
    if l1 < 1:
        raise BuildError(f"first convolution output length {l1} is not positive")
    p1 = min(cfg.k_pool, l1)
    l2 = p1 + 2 * (w - 1) - w + 1
    if l2 < 1:
        raise BuildError(f"second convolution output length {l2} is not positive")
    p2 = min(cfg.k_pool, l2)
    return p1, p2


def _cnn_stack(cfg: ModelConfig, in_channels: int, length: int, pad_l1: int,
               rng, prefix: str):
    """Shared conv/pool/fold tower; returns (layers, flattened width)."""
    w = cfg.filter_width
    _, p2 = _cnn_lengths(cfg, length, pad_l1)
    layers = [
        Conv1d(in_channels, cfg.filters_l1, w, pad_l1, rng, name=f"{prefix}.conv1"),
        KMaxPool(cfg.k_pool),
        Activation(cfg.cnn_activation),
        Conv1d(cfg.filters_l1, cfg.filters_l2, w, w - 1, rng, name=f"{prefix}.conv2"),
        Fold(),
        KMaxPool(cfg.k_pool),
        Activation(cfg.cnn_activation),
        Flatten(),
    ]
    return layers, (cfg.filters_l2 // 2) * p2


class Model:
    """A mode-tagged regressor: optional text branch, optional numeric
    branch, and a dense head over the concatenated flattened features."""

    def __init__(self, config: ModelConfig, text_branch: Optional[Sequential],
                 numeric_branch: Optional[Sequential], head: Dense, text_width: int):
        self.config = config
        self.text_branch = text_branch
        self.numeric_branch = numeric_branch
        self.head = head
        self.text_width = text_width

    def params(self) -> list:
        out = []
        if self.text_branch is not None:
            out.extend(self.text_branch.params())
        if self.numeric_branch is not None:
            out.extend(self.numeric_branch.params())
        out.extend(self.head.params())
        names = [p.name for p in out]
        if len(set(names)) != len(names):
            raise BuildError("parameter names are not unique")
        return out

    def forward(self, numeric: Optional[np.ndarray] = None,
                token_ids: Optional[np.ndarray] = None) -> np.ndarray:
        parts = []
        if self.text_branch is not None:
            if token_ids is None:
                raise InferenceError(f"mode {self.config.mode!r} needs token ids")
            parts.append(self.text_branch.forward(np.asarray(token_ids)))
        if self.numeric_branch is not None:
            if numeric is None:
                raise InferenceError(f"mode {self.config.mode!r} needs numeric features")
            numeric = np.asarray(numeric, dtype=np.float64)
            if numeric.ndim != 2 or numeric.shape[1] != self.config.numeric_dim:
                raise InferenceError(
                    f"numeric features must be (batch, {self.config.numeric_dim}), "
                    f"got {numeric.shape}"
                )
            # one channel for the conv stack, 1-dim timesteps for the rnn
            parts.append(self.numeric_branch.forward(numeric[:, None, :]))
        feats = np.concatenate(parts, axis=1) if len(parts) > 1 else parts[0]
        out = self.head.forward(feats)[:, 0]
        if not np.all(np.isfinite(out)):
            raise NumericError("non-finite prediction in forward pass")
        return out

    def backward(self, grad_pred: np.ndarray) -> None:
        gfeats = self.head.backward(np.asarray(grad_pred, dtype=np.float64)[:, None])
        if self.text_branch is not None and self.numeric_branch is not None:
            self.text_branch.backward(gfeats[:, : self.text_width])
            self.numeric_branch.backward(gfeats[:, self.text_width :])
        elif self.text_branch is not None:
            self.text_branch.backward(gfeats)
        else:
            self.numeric_branch.backward(gfeats)

    def clear_grads(self) -> None:
        for p in self.params():
            p.clear_grad()

    def param_values(self) -> dict:
        return {p.name: p.value.copy() for p in self.params()}

    def set_param_values(self, values: dict) -> None:
        slots = {p.name: p for p in self.params()}
        if set(slots) != set(values):
            raise BuildError(
                f"parameter names do not match the model: "
                f"missing {sorted(set(slots) - set(values))}, "
                f"unexpected {sorted(set(values) - set(slots))}"
            )
        for name, value in values.items():
            value = np.asarray(value, dtype=np.float64)
            if value.shape != slots[name].value.shape:
                raise BuildError(
                    f"parameter '{name}' has shape {value.shape}, "
                    f"expected {slots[name].value.shape}"
                )
            slots[name].value = value.copy()


def build_cnn(cfg: ModelConfig, rng) -> Model:
    cfg.validate()
    if cfg.arch != "cnn":
        raise BuildError(f"build_cnn got arch {cfg.arch!r}")
    text_branch = numeric_branch = None
    text_width = numeric_width = 0
    if cfg.mode in ("text_only", "combined"):
        layers, text_width = _cnn_stack(
            cfg, cfg.embed_dim, cfg.seq_len, cfg.pad, rng, "text"
        )
        text_branch = Sequential(
            [Embedding(cfg.vocab_size, cfg.embed_dim, rng, name="text.embed"), *layers]
        )
    if cfg.mode in ("numeric_only", "combined"):
        # the 12 features run through the same tower as a 1-channel
        # sequence; no 128-wide padding here, just width-1 each side
        layers, numeric_width = _cnn_stack(
            cfg, 1, cfg.numeric_dim, cfg.filter_width - 1, rng, "numeric"
        )
        numeric_branch = Sequential(layers)
    head = Dense(text_width + numeric_width, 1, rng, name="head.out")
    return Model(cfg, text_branch, numeric_branch, head, text_width)


def build_rnn(cfg: ModelConfig, rng) -> Model:
    cfg.validate()
    if cfg.arch != "rnn":
        raise BuildError(f"build_rnn got arch {cfg.arch!r}")
    text_branch = numeric_branch = None
    text_width = numeric_width = 0
    if cfg.mode in ("text_only", "combined"):
        text_branch = Sequential([
            Embedding(cfg.vocab_size, cfg.embed_dim, rng, name="text.embed"),
            SimpleRnn(cfg.embed_dim, cfg.rnn_hidden, rng, name="text.rnn"),
            Flatten(),
        ])
        text_width = cfg.rnn_hidden * cfg.seq_len
    if cfg.mode in ("numeric_only", "combined"):
        numeric_branch = Sequential([
            SimpleRnn(1, cfg.rnn_hidden, rng, name="numeric.rnn"),
            Flatten(),
        ])
        numeric_width = cfg.rnn_hidden * cfg.numeric_dim
    head = Dense(text_width + numeric_width, 1, rng, name="head.out")
    return Model(cfg, text_branch, numeric_branch, head, text_width)


def build_model(cfg: ModelConfig, rng) -> Model:
    if cfg.arch == "cnn":
        return build_cnn(cfg, rng)
    if cfg.arch == "rnn":
        return build_rnn(cfg, rng)
    raise BuildError(f"arch must be one of {ARCHITECTURES}, got {cfg.arch!r}")


def loss_mse(pred: np.ndarray, target: np.ndarray):
    """Mean squared error and its gradient w.r.t. the predictions."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValidationError(
            f"prediction and target lengths differ: {pred.shape} vs {target.shape}"
        )
    n = pred.size
    if n == 0:
        raise ValidationError("cannot compute a loss over an empty batch")
    diff = pred - target
    loss = float(np.mean(diff * diff))
    if not np.isfinite(loss):
        raise NumericError("non-finite training loss")
    return loss, 2.0 * diff / n


def predict_dataset(model: Model, dataset, batch_size: int = 256) -> np.ndarray:
    """Predictions over a whole encoded dataset, in order."""
    parts = []
    for start in range(0, len(dataset), batch_size):
        chunk = slice(start, start + batch_size)
        parts.append(
            model.forward(
                numeric=dataset.numeric[chunk], token_ids=dataset.token_ids[chunk]
            )
        )
    return np.concatenate(parts) if parts else np.zeros(0)


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(model: Model, path) -> None:
    write_json(path, {
        "version": 1,
        "config": asdict(model.config),
        "params": [
            {
                "name": p.name,
                "shape": list(p.value.shape),
                "data": p.value.reshape(-1).tolist(),
            }
            for p in model.params()
        ],
    })


def load_checkpoint(path) -> Model:
    payload = read_json(path)
    if payload.get("version") != 1:
        raise BuildError(f"unsupported checkpoint version {payload.get('version')!r}")
    try:
        cfg = ModelConfig(**payload["config"])
    except TypeError as exc:
        raise BuildError(f"checkpoint config does not match ModelConfig: {exc}") from exc
    # build with a throwaway generator, then overwrite every parameter
    model = build_model(cfg, np.random.default_rng(0))
    values = {}
    for entry in payload["params"]:
        shape = tuple(entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64)
        if data.size != int(np.prod(shape)):
            raise BuildError(
                f"parameter '{entry['name']}' has {data.size} values, "
                f"shape {shape} needs {int(np.prod(shape))}"
            )
        values[entry["name"]] = data.reshape(shape)
    model.set_param_values(values)
    return model
