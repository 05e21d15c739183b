"""Evaluation metrics for count regression.

Errors are (actual - predicted) throughout, so a positive bias means the
model under-predicts. The relative variants divide by the mean of the
PREDICTED values (not the actuals) and multiply by 100; that convention
is unusual but deliberate, and it is what the rest of the toolkit
reports. Undefined cases (zero prediction mean, constant actuals) raise
here and become nulls with warnings in compute_report.
"""

import numpy as np

from .errors import MetricError


def _pair(actual, predicted):
    actual = np.asarray(actual, dtype=np.float64)
    predicted = np.asarray(predicted, dtype=np.float64)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise MetricError(
            f"metric inputs must be 1-d arrays of equal length, "
            f"got {actual.shape} and {predicted.shape}"
        )
    if actual.size == 0:
        raise MetricError("metric inputs are empty")
    return actual, predicted


def mae(actual, predicted) -> float:
    """Mean absolute error."""
    actual, predicted = _pair(actual, predicted)
    return float(np.mean(np.abs(actual - predicted)))


def mbe(actual, predicted) -> float:
    """Mean bias error, sign-preserving."""
    actual, predicted = _pair(actual, predicted)
    return float(np.mean(actual - predicted))


def rmse(actual, predicted) -> float:
    """Root mean squared error."""
    actual, predicted = _pair(actual, predicted)
    return float(np.sqrt(np.mean((actual - predicted) ** 2)))


def relative(metric_value: float, predicted) -> float:
    """metric / mean(predicted) * 100."""
    predicted = np.asarray(predicted, dtype=np.float64)
    if predicted.size == 0:
        raise MetricError("metric inputs are empty")
    denom = float(np.mean(predicted))
    if denom == 0.0:
        raise MetricError("relative metric undefined: mean of predictions is zero")
    return float(metric_value) / denom * 100.0


def r2(actual, predicted) -> float:
    """Coefficient of determination, 1 - RSS/TSS."""
    actual, predicted = _pair(actual, predicted)
    rss = float(np.sum((actual - predicted) ** 2))
    tss = float(np.sum((actual - np.mean(actual)) ** 2))
    if tss == 0.0:
        raise MetricError("r2 undefined: actual values are constant")
    return 1.0 - rss / tss


def compute_report(actual, predicted) -> dict:
    """All seven metrics plus the sample count.

    Undefined relative metrics and r2 come back as None, with a warning
    string per affected metric.
    """
    actual, predicted = _pair(actual, predicted)
    report = {"n": int(actual.size)}
    warnings = []
    for rel_key, fn in (("rmae", mae), ("rmbe", mbe), ("rrmse", rmse)):
        base = fn(actual, predicted)
        report[rel_key[1:]] = base
        try:
            report[rel_key] = relative(base, predicted)
        except MetricError:
            report[rel_key] = None
            warnings.append(f"{rel_key} undefined: mean of predictions is zero")
    try:
        report["r2"] = r2(actual, predicted)
    except MetricError as exc:
        report["r2"] = None
        warnings.append(str(exc))
    report["warnings"] = warnings
    return report
