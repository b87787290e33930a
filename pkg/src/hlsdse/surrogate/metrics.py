"""Error metrics for QoR predictions."""

from __future__ import annotations

import numpy as np


class ZeroTargetError(ValueError):
    pass


def _pair(pred, target):
    pred = np.asarray(pred, dtype=float).ravel()
    target = np.asarray(target, dtype=float).ravel()
    if pred.shape != target.shape:
        raise ValueError(f"length mismatch: {pred.size} predictions, {target.size} targets")
    if pred.size == 0:
        raise ValueError("empty input")
    return pred, target


def rmse(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.sqrt(np.mean((pred - target) ** 2)))


def mae(pred, target) -> float:
    pred, target = _pair(pred, target)
    return float(np.mean(np.abs(pred - target)))


def mape(pred, target) -> float:
    """Mean absolute percentage error, in percent."""
    pred, target = _pair(pred, target)
    if np.any(target == 0):
        raise ZeroTargetError("MAPE undefined: targets contain zeros; use MAE for this target")
    return float(100.0 * np.mean(np.abs((pred - target) / target)))


def safe_mape(pred, target) -> float | None:
    try:
        return mape(pred, target)
    except ZeroTargetError:
        return None
