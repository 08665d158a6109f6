"""Dense, batch-norm, tanh, and dropout primitives with analytic backward passes.

Everything is float64 numpy.  Forward functions return ``(y, cache)``;
backward functions consume the cache and the upstream gradient and return
exact gradients of the forward map.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Mode",
    "require_finite",
    "sigmoid",
    "dense_forward",
    "dense_backward",
    "tanh_forward",
    "tanh_backward",
    "BatchNormParams",
    "init_batchnorm",
    "batchnorm_forward",
    "batchnorm_backward",
    "dropout",
    "dropout_backward",
    "recurrent_dropout_mask",
]


class Mode(Enum):
    TRAIN = "train"
    INFER = "infer"


def require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"non-finite values in {name}")


def sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# ---------------------------------------------------------------------------
# Dense
# ---------------------------------------------------------------------------


def dense_forward(w: np.ndarray, b: np.ndarray, x: np.ndarray):
    """y = x @ w + b over the trailing axis; x may have any leading shape."""
    y = x @ w + b
    return y, (x, w)


def dense_backward(cache, dy: np.ndarray):
    x, w = cache
    x2 = x.reshape(-1, x.shape[-1])
    dy2 = dy.reshape(-1, dy.shape[-1])
    dw = x2.T @ dy2
    db = dy2.sum(axis=0)
    dx = (dy2 @ w.T).reshape(x.shape)
    return dw, db, dx


def tanh_forward(x: np.ndarray):
    y = np.tanh(x)
    return y, y


def tanh_backward(cache, dy: np.ndarray):
    y = cache
    return dy * (1.0 - y * y)


# ---------------------------------------------------------------------------
# Batch normalization
# ---------------------------------------------------------------------------


@dataclass
class BatchNormParams:
    """Per-feature affine normalization state.

    Train mode normalizes by batch statistics taken jointly over every
    leading axis (batch and time), then folds them into the running
    estimates: ``running += momentum * (batch_stat - running)``, using the
    unbiased variance for the running estimate.  Infer mode normalizes by
    the running statistics.
    """

    gain: np.ndarray
    bias: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    epsilon: float = 1e-5

    def __post_init__(self) -> None:
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if np.any(self.running_var < 0):
            raise ValueError("running_var must be nonnegative")


def init_batchnorm(num_features: int, momentum: float = 0.1, epsilon: float = 1e-5):
    return BatchNormParams(
        gain=np.ones(num_features),
        bias=np.zeros(num_features),
        running_mean=np.zeros(num_features),
        running_var=np.ones(num_features),
        momentum=momentum,
        epsilon=epsilon,
    )


def batchnorm_forward(
    p: BatchNormParams,
    x: np.ndarray,
    mode: Mode,
    update_running: bool = True,
):
    """Normalize the trailing feature axis.

    In Train mode the running estimates inside ``p`` are updated in place
    unless ``update_running`` is False (useful for pure re-evaluation, e.g.
    finite-difference checks).
    """
    feat = x.shape[-1]
    x2 = x.reshape(-1, feat)
    n = x2.shape[0]
    if mode == Mode.TRAIN:
        if n < 2:
            raise ValueError(f"Train-mode batch norm needs >= 2 samples per feature, got {n}")
        mu = x2.mean(axis=0)
        var = x2.var(axis=0)
        inv_std = 1.0 / np.sqrt(var + p.epsilon)
        xhat2 = (x2 - mu) * inv_std
        if update_running:
            unbiased = var * n / (n - 1)
            p.running_mean += p.momentum * (mu - p.running_mean)
            p.running_var += p.momentum * (unbiased - p.running_var)
    else:
        inv_std = 1.0 / np.sqrt(p.running_var + p.epsilon)
        xhat2 = (x2 - p.running_mean) * inv_std
    y = (p.gain * xhat2 + p.bias).reshape(x.shape)
    cache = (mode, xhat2, inv_std, p.gain, x.shape)
    return y, cache


def batchnorm_backward(cache, dy: np.ndarray):
    mode, xhat2, inv_std, gain, shape = cache
    dy2 = dy.reshape(-1, shape[-1])
    dgain = (dy2 * xhat2).sum(axis=0)
    dbias = dy2.sum(axis=0)
    if mode == Mode.TRAIN:
        n = dy2.shape[0]
        dx2 = (gain * inv_std / n) * (
            n * dy2 - dbias - xhat2 * dgain
        )
    else:
        dx2 = dy2 * gain * inv_std
    return dgain, dbias, dx2.reshape(shape)


# ---------------------------------------------------------------------------
# Dropout
# ---------------------------------------------------------------------------


def dropout(x: np.ndarray, rate: float, seed, mode: Mode):
    """Inverted dropout: kept entries scaled by 1/(1-rate) in Train mode,
    identity in Infer mode.  Returns (y, mask); backward is ``dy * mask``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if mode == Mode.INFER or rate == 0.0:
        return x, np.ones_like(x)
    rng = np.random.default_rng(seed)
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(mask: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * mask


def recurrent_dropout_mask(
    batch: int, hidden: int, rate: float, seed, mode: Mode
) -> np.ndarray | None:
    """One inverted-dropout mask per sequence, held fixed across timesteps
    (variational recurrent dropout).  None means no masking."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"recurrent dropout rate must be in [0, 1), got {rate}")
    if mode == Mode.INFER or rate == 0.0:
        return None
    rng = np.random.default_rng(seed)
    return (rng.random((batch, hidden)) >= rate) / (1.0 - rate)
