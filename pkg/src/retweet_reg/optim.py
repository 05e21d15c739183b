"""Adam optimizer and the mini-batch training loop."""

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericError, OptimizerError, ValidationError
from .metrics import compute_report
from .models import loss_mse, predict_dataset

# label transform applied before the loss, and its inverse for reporting
# metrics on the raw count scale
TARGET_TRANSFORMS = {
    "none": (lambda y: y, lambda z: z),
    "log1p": (np.log1p, np.expm1),
}


@dataclass
class AdamState:
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params) -> None:
    """One bias-corrected Adam update over every trainable parameter.
    Gradients must be populated; they are cleared after the step."""
    trainable = [p for p in params if p.trainable]
    for p in trainable:
        if p.grad is None:
            raise OptimizerError(f"parameter '{p.name}' has no accumulated gradient")
        if not np.all(np.isfinite(p.grad)):
            raise NumericError(f"non-finite gradient for parameter '{p.name}'")
    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t
    for p in trainable:
        g = p.grad
        m = state.m.get(p.name)
        v = state.v.get(p.name)
        m = (1.0 - state.beta1) * g if m is None else state.beta1 * m + (1.0 - state.beta1) * g
        v = (1.0 - state.beta2) * g * g if v is None else state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[p.name] = m
        state.v[p.name] = v
        m_hat = m / bias1
        v_hat = v / bias2
        p.value = p.value - state.alpha * m_hat / (np.sqrt(v_hat) + state.epsilon)
    for p in params:
        p.clear_grad()


def fit(model, train, valid, epochs: int = 100, batch_size: int = 64,
        seed: int = 0, adam: AdamState = None, target_transform: str = "none"):
    """Train with seeded per-epoch shuffling and sequential mini-batches
    (the last partial batch is kept).

    Returns (log, best): log is one dict per epoch with the mean train
    loss over that epoch's pass and a validation metrics report; best
    holds the parameter values from the epoch with the lowest validation
    MAE (earliest epoch wins ties). Validation metrics are always on the
    raw count scale, whatever the target transform.
    """
    if len(train) == 0:
        raise ValidationError("training set is empty")
    if len(valid) == 0:
        raise ValidationError("validation set is empty")
    if epochs < 1:
        raise ValidationError(f"epochs must be positive, got {epochs}")
    if batch_size < 1:
        raise ValidationError(f"batch size must be positive, got {batch_size}")
    if target_transform not in TARGET_TRANSFORMS:
        raise ValidationError(
            f"target_transform must be one of {sorted(TARGET_TRANSFORMS)}, "
            f"got {target_transform!r}"
        )
    forward_t, inverse_t = TARGET_TRANSFORMS[target_transform]
    state = adam if adam is not None else AdamState()
    rng = np.random.default_rng(seed)
    n = len(train)
    log = []
    best = None
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        sse = 0.0
        for start in range(0, n, batch_size):
            idx = order[start : start + batch_size]
            batch = train.select(idx)
            model.clear_grads()
            pred = model.forward(numeric=batch.numeric, token_ids=batch.token_ids)
            loss, grad_pred = loss_mse(pred, forward_t(batch.labels))
            sse += loss * len(idx)
            model.backward(grad_pred)
            adam_step(state, model.params())
        val_pred = inverse_t(predict_dataset(model, valid))
        report = compute_report(valid.labels, val_pred)
        log.append({"epoch": epoch, "train_loss": sse / n, "validation": report})
        if best is None or report["mae"] < best["mae"]:
            best = {"epoch": epoch, "mae": report["mae"], "params": model.param_values()}
    return log, best
