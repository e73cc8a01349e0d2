"""Floored cross-entropy, discriminator log losses and their constants."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

DEFAULT_DELTA = 1e-7


@dataclass(frozen=True)
class LossConstants:
    b: float        # magnitude bound b_l = m |log delta|
    lipschitz: float  # sqrt(m) / delta
    delta: float
    m: int


def loss_constants(m: int, delta: float = DEFAULT_DELTA) -> LossConstants:
    if not 0.0 < delta < 1.0:
        raise ConfigurationError(f"delta must lie in (0, 1), got {delta}")
    if m < 1:
        raise ConfigurationError("label dimension must be at least 1")
    return LossConstants(float(m * abs(np.log(delta))), float(np.sqrt(m) / delta), float(delta), int(m))


def _nonneg(name, a):
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError(f"{name} has negative entries")
    return a


def cross_entropy(y_pred, y_true, delta: float = DEFAULT_DELTA):
    """-sum_k log(y_pred[k] + delta) * y_true[k]; rows of a 2-d input give one value each."""
    p = _nonneg("y_pred", y_pred)
    y = _nonneg("y_true", y_true)
    out = -np.sum(np.log(p + delta) * y, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def cross_entropy_grad(y_pred, y_true, delta: float = DEFAULT_DELTA):
    """Gradient of cross_entropy with respect to y_pred."""
    p = _nonneg("y_pred", y_pred)
    y = _nonneg("y_true", y_true)
    return -y / (p + delta)


def weighted_loss(loss_s, loss_t, alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    return (1.0 - alpha) * loss_s + alpha * loss_t


def weighted_loss_grad(alpha):
    """Partial derivatives of weighted_loss in (loss_s, loss_t)."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigurationError(f"alpha must lie in [0, 1], got {alpha}")
    return 1.0 - alpha, alpha


def _check_label(label):
    if label not in (0, 1):
        raise ValueError(f"domain label must be 0 (source) or 1 (target), got {label!r}")


def domain_log_loss(v, domain_label, delta: float = DEFAULT_DELTA):
    """Source (label 0): -log(1 - v + delta); target (label 1): -log(v + delta)."""
    _check_label(domain_label)
    v = np.asarray(v, dtype=float)
    out = -np.log(1.0 - v + delta) if domain_label == 0 else -np.log(v + delta)
    return float(out) if out.ndim == 0 else out


def domain_log_loss_grad(v, domain_label, delta: float = DEFAULT_DELTA):
    _check_label(domain_label)
    v = np.asarray(v, dtype=float)
    out = 1.0 / (1.0 - v + delta) if domain_label == 0 else -1.0 / (v + delta)
    return float(out) if out.ndim == 0 else out


def loss_grads(y_pred=None, y_true=None, v=None, domain_label=None,
               delta: float = DEFAULT_DELTA):
    """Convenience bundle: gradients of whichever losses have their inputs supplied."""
    out = {}
    if y_pred is not None:
        out["cross_entropy"] = cross_entropy_grad(y_pred, y_true, delta)
    if v is not None:
        out["domain"] = domain_log_loss_grad(v, domain_label, delta)
    return out
