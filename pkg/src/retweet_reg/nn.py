"""Network building blocks on float64 numpy arrays.

Every layer follows one convention: forward caches whatever its backward
pass needs, backward consumes that cache, adds parameter gradients into
ParamSlots, and returns the gradient with respect to its input. Sequence
tensors are channels-first, shaped (batch, channels, length).
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    EmbeddingError,
    FoldError,
    PoolingError,
    ShapeError,
    ValidationError,
)


def glorot_uniform(rng, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class ParamSlot:
    """A named trainable array plus its accumulated gradient."""

    def __init__(self, name: str, value, trainable: bool = True):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.trainable = trainable

    def accumulate(self, grad: np.ndarray) -> None:
        if grad.shape != self.value.shape:
            raise ShapeError(
                f"gradient for '{self.name}' has shape {grad.shape}, "
                f"parameter has {self.value.shape}"
            )
        self.grad = grad.copy() if self.grad is None else self.grad + grad

    def clear_grad(self) -> None:
        self.grad = None


class Layer:
    def params(self) -> list:
        return []

    def forward(self, x):
        raise NotImplementedError

    def backward(self, upstream):
        raise NotImplementedError


# ---------------------------------------------------------------------------
# functional cores, shared by the layer classes and usable standalone

def _conv_columns(x: np.ndarray, width: int, pad: int):
    """im2col for a padded batch: (B, C, L) -> (B*L_out, C*W) plus L_out."""
    b, c, length = x.shape
    l_out = length + 2 * pad - width + 1
    if l_out < 1:
        raise ShapeError(
            f"convolution output length {l_out} is not positive "
            f"(input length {length}, width {width}, pad {pad})"
        )
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    windows = sliding_window_view(xp, width, axis=2)  # (B, C, L_out, W)
    cols = windows.transpose(0, 2, 1, 3).reshape(b * l_out, c * width)
    return np.ascontiguousarray(cols), l_out


def conv1d(x, filters, bias, pad: int = 0) -> np.ndarray:
    """Zero-padded 1-d cross-correlation for one example:
    (C, L) with filters (O, C, W) -> (O, L + 2*pad - W + 1)."""
    x = np.asarray(x, dtype=np.float64)
    filters = np.asarray(filters, dtype=np.float64)
    o, c, w = filters.shape
    if x.shape[0] != c:
        raise ShapeError(f"convolution expects {c} input channels, got {x.shape[0]}")
    cols, l_out = _conv_columns(x[None], w, pad)
    out = cols @ filters.reshape(o, c * w).T + np.asarray(bias, dtype=np.float64)
    return out.reshape(l_out, o).T


def kmax_indices(x: np.ndarray, k: int) -> np.ndarray:
    """Positions of the k largest values along the last axis, returned in
    original order. Ties go to the smaller index (stable sort on the
    negated values)."""
    top = np.argsort(-x, axis=-1, kind="stable")[..., :k]
    return np.sort(top, axis=-1)


def kmax_pool(x, k: int):
    """Keep the k largest entries of each row (last axis), preserving
    their original order. Returns (pooled, indices)."""
    x = np.asarray(x, dtype=np.float64)
    length = x.shape[-1]
    if k < 1:
        raise PoolingError(f"k must be positive, got {k}")
    if k > length:
        raise PoolingError(f"k={k} exceeds the row length {length}")
    idx = kmax_indices(x, k)
    return np.take_along_axis(x, idx, axis=-1), idx


def conv1d_backward(x, filters, pad: int, upstream):
    """Adjoint of conv1d for one example. upstream is (O, L_out); returns
    (grad_input, grad_filters)."""
    x = np.asarray(x, dtype=np.float64)
    filters = np.asarray(filters, dtype=np.float64)
    o, c, w = filters.shape
    cols, l_out = _conv_columns(x[None], w, pad)
    up = np.ascontiguousarray(np.asarray(upstream, dtype=np.float64).T)  # (L_out, O)
    grad_filters = (up.T @ cols).reshape(o, c, w)
    gcols = (up @ filters.reshape(o, c * w)).reshape(l_out, c, w)
    gxp = np.zeros((c, x.shape[1] + 2 * pad))
    for i in range(w):
        gxp[:, i : i + l_out] += gcols[:, :, i].T
    return gxp[:, pad : pad + x.shape[1]], grad_filters


def kmax_backward(indices, upstream, length: int) -> np.ndarray:
    """Scatter upstream values back to the selected positions; zeros
    everywhere else."""
    upstream = np.asarray(upstream, dtype=np.float64)
    grad = np.zeros(upstream.shape[:-1] + (length,))
    np.put_along_axis(grad, indices, upstream, axis=-1)
    return grad


def fold(x) -> np.ndarray:
    """Sum adjacent channel pairs: rows (0,1), (2,3), ... collapse to one
    row each, halving the channel count."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-2] % 2:
        raise FoldError(f"folding needs an even channel count, got {x.shape[-2]}")
    return x[..., 0::2, :] + x[..., 1::2, :]


def activation(x, kind: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if kind == "relu":
        return np.where(x > 0.0, x, 0.0)
    if kind == "tanh":
        return np.tanh(x)
    raise ValidationError(f"unknown activation {kind!r}")


def dense(x, weights, bias) -> np.ndarray:
    """Affine map for one vector: weights (m, n) @ x (n,) + bias (m,)."""
    x = np.asarray(x, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if x.shape[0] != weights.shape[1]:
        raise ShapeError(
            f"dense expects input of length {weights.shape[1]}, got {x.shape[0]}"
        )
    return weights @ x + np.asarray(bias, dtype=np.float64)


def embedding_lookup(ids, table) -> np.ndarray:
    """Column t of the output is the table row ids[t]: (len,) -> (d, len)."""
    table = np.asarray(table, dtype=np.float64)
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise EmbeddingError(
            f"token id outside [0, {table.shape[0]}): "
            f"min {int(ids.min())}, max {int(ids.max())}"
        )
    return table[ids].T


def rnn_forward(inputs, w_xh, w_hh, b) -> np.ndarray:
    """Single-example recurrence: inputs (d_in, T) -> all hidden states
    (H, T), starting from a zero hidden state."""
    inputs = np.asarray(inputs, dtype=np.float64)
    w_xh = np.asarray(w_xh, dtype=np.float64)
    w_hh = np.asarray(w_hh, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if inputs.shape[0] != w_xh.shape[1]:
        raise ShapeError(
            f"recurrence expects {w_xh.shape[1]}-dim inputs, got {inputs.shape[0]}"
        )
    steps = inputs.shape[1]
    hs = np.empty((w_xh.shape[0], steps))
    h = np.zeros(w_xh.shape[0])
    for t in range(steps):
        h = np.tanh(w_xh @ inputs[:, t] + w_hh @ h + b)
        hs[:, t] = h
    return hs


# ---------------------------------------------------------------------------
# layers

class Embedding(Layer):
    """Token-id lookup table. Input (B, L) integer ids, output (B, d, L).
    Ids have no gradient, so backward returns None."""

    def __init__(self, vocab_size: int, dim: int, rng, name: str = "embed"):
        if vocab_size < 2:
            raise EmbeddingError("vocabulary needs at least the pad and oov ids")
        self.vocab_size = vocab_size
        table = rng.uniform(-0.05, 0.05, size=(vocab_size, dim))
        self.table = ParamSlot(f"{name}.table", table)
        self._ids = None

    def params(self):
        return [self.table]

    def forward(self, ids):
        ids = np.asarray(ids)
        if ids.ndim != 2:
            raise ShapeError(f"embedding expects (batch, length) ids, got shape {ids.shape}")
        if ids.min() < 0 or ids.max() >= self.vocab_size:
            raise EmbeddingError(
                f"token id outside [0, {self.vocab_size}): "
                f"min {int(ids.min())}, max {int(ids.max())}"
            )
        self._ids = ids
        return self.table.value[ids].transpose(0, 2, 1)

    def backward(self, upstream):
        grad = np.zeros_like(self.table.value)
        # repeated ids must sum, so scatter with unbuffered add
        np.add.at(grad, self._ids, upstream.transpose(0, 2, 1))
        self.table.accumulate(grad)
        return None


class Conv1d(Layer):
    """Wide 1-d convolution (cross-correlation over a zero-padded input).
    Input (B, C, L), filters (O, C, W), output (B, O, L + 2*pad - W + 1)."""

    def __init__(self, in_channels: int, out_channels: int, width: int, pad: int,
                 rng, name: str = "conv"):
        fan_in = in_channels * width
        fan_out = out_channels * width
        filters = glorot_uniform(rng, (out_channels, in_channels, width), fan_in, fan_out)
        self.filters = ParamSlot(f"{name}.filters", filters)
        self.bias = ParamSlot(f"{name}.bias", np.zeros(out_channels))
        self.pad = pad
        self._cache = None

    def params(self):
        return [self.filters, self.bias]

    def forward(self, x):
        b, c, length = x.shape
        o, cf, w = self.filters.value.shape
        if c != cf:
            raise ShapeError(f"convolution expects {cf} input channels, got {c}")
        cols, l_out = _conv_columns(x, w, self.pad)
        out = cols @ self.filters.value.reshape(o, cf * w).T + self.bias.value
        self._cache = (cols, b, c, length, l_out)
        return out.reshape(b, l_out, o).transpose(0, 2, 1)

    def backward(self, upstream):
        cols, b, c, length, l_out = self._cache
        o, _, w = self.filters.value.shape
        up = np.ascontiguousarray(upstream.transpose(0, 2, 1)).reshape(b * l_out, o)
        self.bias.accumulate(up.sum(axis=0))
        self.filters.accumulate((up.T @ cols).reshape(o, c, w))
        gcols = (up @ self.filters.value.reshape(o, c * w))
        gcols = gcols.reshape(b, l_out, c, w).transpose(0, 2, 1, 3)
        gxp = np.zeros((b, c, length + 2 * self.pad))
        for i in range(w):  # each window column maps onto a shifted slice
            gxp[:, :, i : i + l_out] += gcols[:, :, :, i]
        return gxp[:, :, self.pad : self.pad + length]


class KMaxPool(Layer):
    """Keep the k largest values per (batch, channel) row, in original
    order; ties resolve to the smaller index."""

    def __init__(self, k: int):
        if k < 1:
            raise PoolingError(f"k must be positive, got {k}")
        self.k = k
        self._cache = None

    def forward(self, x):
        length = x.shape[-1]
        if length < 1:
            raise PoolingError("cannot pool an empty sequence")
        idx = kmax_indices(x, min(self.k, length))
        self._cache = (idx, x.shape)
        return np.take_along_axis(x, idx, axis=-1)

    def backward(self, upstream):
        idx, shape = self._cache
        grad = np.zeros(shape)
        # indices within a row are distinct, so assignment == scatter-add
        np.put_along_axis(grad, idx, upstream, axis=-1)
        return grad


class Fold(Layer):
    """Sum adjacent channel pairs, halving the channel count."""

    def forward(self, x):
        return fold(x)

    def backward(self, upstream):
        return np.repeat(upstream, 2, axis=-2)


class Activation(Layer):
    def __init__(self, kind: str):
        if kind not in ("relu", "tanh"):
            raise ValidationError(f"unknown activation {kind!r}")
        self.kind = kind
        self._cache = None

    def forward(self, x):
        if self.kind == "relu":
            mask = x > 0.0  # subgradient at exactly zero is taken as zero
            self._cache = mask
            return np.where(mask, x, 0.0)
        out = np.tanh(x)
        self._cache = out
        return out

    def backward(self, upstream):
        if self.kind == "relu":
            return upstream * self._cache
        return upstream * (1.0 - self._cache ** 2)


class Dense(Layer):
    """Affine map. Input (B, D_in), weight (D_out, D_in), output (B, D_out)."""

    def __init__(self, in_dim: int, out_dim: int, rng, name: str = "dense"):
        weight = glorot_uniform(rng, (out_dim, in_dim), in_dim, out_dim)
        self.weight = ParamSlot(f"{name}.weight", weight)
        self.bias = ParamSlot(f"{name}.bias", np.zeros(out_dim))
        self._x = None

    def params(self):
        return [self.weight, self.bias]

    def forward(self, x):
        if x.shape[-1] != self.weight.value.shape[1]:
            raise ShapeError(
                f"dense layer expects {self.weight.value.shape[1]} inputs, "
                f"got {x.shape[-1]}"
            )
        self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, upstream):
        self.weight.accumulate(upstream.T @ self._x)
        self.bias.accumulate(upstream.sum(axis=0))
        return upstream @ self.weight.value


class SimpleRnn(Layer):
    """Elman recurrence h_t = tanh(W_xh x_t + W_hh h_{t-1} + b) with
    h_0 = 0. Input (B, D, T); output every hidden state, (B, H, T).
    Backward runs truncation-free backpropagation through time."""

    def __init__(self, in_dim: int, hidden: int, rng, name: str = "rnn"):
        self.w_xh = ParamSlot(f"{name}.w_xh", glorot_uniform(rng, (hidden, in_dim), in_dim, hidden))
        self.w_hh = ParamSlot(f"{name}.w_hh", glorot_uniform(rng, (hidden, hidden), hidden, hidden))
        self.bias = ParamSlot(f"{name}.bias", np.zeros(hidden))
        self._cache = None

    def params(self):
        return [self.w_xh, self.w_hh, self.bias]

    def forward(self, x):
        b, d, steps = x.shape
        if d != self.w_xh.value.shape[1]:
            raise ShapeError(
                f"recurrent layer expects {self.w_xh.value.shape[1]}-dim inputs, got {d}"
            )
        hidden = self.bias.value.shape[0]
        hs = np.empty((b, hidden, steps))
        h = np.zeros((b, hidden))
        for t in range(steps):
            h = np.tanh(
                x[:, :, t] @ self.w_xh.value.T + h @ self.w_hh.value.T + self.bias.value
            )
            hs[:, :, t] = h
        self._cache = (x, hs)
        return hs

    def backward(self, upstream):
        x, hs = self._cache
        b, _, steps = x.shape
        gw_xh = np.zeros_like(self.w_xh.value)
        gw_hh = np.zeros_like(self.w_hh.value)
        gb = np.zeros_like(self.bias.value)
        gx = np.zeros_like(x)
        carry = np.zeros((b, hs.shape[1]))
        for t in reversed(range(steps)):
            gh = upstream[:, :, t] + carry
            ga = gh * (1.0 - hs[:, :, t] ** 2)  # through tanh
            h_prev = hs[:, :, t - 1] if t > 0 else np.zeros_like(carry)
            gw_xh += ga.T @ x[:, :, t]
            gw_hh += ga.T @ h_prev
            gb += ga.sum(axis=0)
            gx[:, :, t] = ga @ self.w_xh.value
            carry = ga @ self.w_hh.value
        self.w_xh.accumulate(gw_xh)
        self.w_hh.accumulate(gw_hh)
        self.bias.accumulate(gb)
        return gx


class Flatten(Layer):
    """(B, C, L) -> (B, C*L), row-major so channel blocks stay contiguous."""

    def __init__(self):
        self._shape = None

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, upstream):
        return upstream.reshape(self._shape)


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

    def params(self):
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, upstream):
        for layer in reversed(self.layers):
            upstream = layer.backward(upstream)
        return upstream
