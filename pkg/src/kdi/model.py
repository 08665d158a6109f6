"""Siamese LSTM detector: shared embedding tower, cosine head, BCE pair loss.

One tower maps a processed sequence (M x 3 feature rows) to an embedding:

    LSTM -> batch norm -> tanh -> dropout -> dense -> LSTM -> batch norm
         -> tanh -> dropout -> [final timestep] -> dense(embed_dim)

Both pair branches share every parameter.  A pair's score is
``p = (1 - cosine_similarity) / 2``: the probability the two sequences come
from opposite conditions.  Classification compares the score to a decision
threshold calibrated at the equal error rate on validation pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .nncore import (
    BatchNormParams,
    LstmParams,
    Mode,
    batchnorm_backward,
    batchnorm_forward,
    dense_backward,
    dense_forward,
    dropout,
    dropout_backward,
    init_lstm,
    lstm_backward,
    lstm_forward,
    recurrent_dropout_mask,
    tanh_backward,
    tanh_forward,
)
from .preprocess import ProcessedSequence

__all__ = [
    "TowerConfig",
    "DetectorModel",
    "ThresholdUnsetError",
    "init_detector",
    "tower_forward",
    "tower_backward",
    "embed",
    "cosine_forward",
    "cosine_backward",
    "cosine_similarity",
    "pair_score",
    "pair_scores",
    "pair_loss",
    "bce_forward",
    "bce_backward",
    "siamese_loss",
    "classify_pair",
    "verdict",
]

_NORM_FLOOR = 1e-12
_BCE_CLAMP = 1e-7


class ThresholdUnsetError(RuntimeError):
    pass


@dataclass(frozen=True)
class TowerConfig:
    """Structural description of the shared tower.

    ``m`` is the standardized sequence length.  The training policy keeps it
    within [25, 500] (enforced by the trainer's hyperparameters); the tower
    itself only needs m >= 1 so that reduced diagnostic configurations can
    be built.  ``summary`` selects how the second block's trajectory is
    condensed before the final dense map: the final timestep (default) or
    the mean over time.
    """

    m: int
    input_dim: int = 3
    hidden: int = 128
    embed_dim: int = 128
    dropout: float = 0.5
    recurrent_dropout: float = 0.2
    summary: str = "last"

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if min(self.input_dim, self.hidden, self.embed_dim) < 1:
            raise ValueError("input_dim, hidden, embed_dim must be positive")
        for name in ("dropout", "recurrent_dropout"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {v}")
        if self.summary not in ("last", "mean"):
            raise ValueError(f"summary must be 'last' or 'mean', got {self.summary!r}")


@dataclass
class DetectorModel:
    """Trained (or training) detector: tower parameters plus the decision
    threshold in score units (probability of an opposite-condition pair)."""

    config: TowerConfig
    params: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]
    threshold: float | None = None
    adam_snapshot: dict = field(default_factory=dict, repr=False)

    def copy(self) -> "DetectorModel":
        return DetectorModel(
            config=self.config,
            params={k: v.copy() for k, v in self.params.items()},
            buffers={k: v.copy() for k, v in self.buffers.items()},
            threshold=self.threshold,
        )


def init_detector(config: TowerConfig, seed: int) -> DetectorModel:
    """Fresh parameters: scaled-uniform weights, forget biases 1, unit
    running variance."""
    rng = np.random.default_rng([seed, 0x7057])
    h, e, d = config.hidden, config.embed_dim, config.input_dim
    lstm1 = init_lstm(rng, d, h)
    lstm2 = init_lstm(rng, e, h)

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    params = {
        "lstm1.w": lstm1.w,
        "lstm1.r": lstm1.r,
        "lstm1.b": lstm1.b,
        "bn1.gain": np.ones(h),
        "bn1.bias": np.zeros(h),
        "dense1.w": glorot(h, e),
        "dense1.b": np.zeros(e),
        "lstm2.w": lstm2.w,
        "lstm2.r": lstm2.r,
        "lstm2.b": lstm2.b,
        "bn2.gain": np.ones(h),
        "bn2.bias": np.zeros(h),
        "dense2.w": glorot(h, e),
        "dense2.b": np.zeros(e),
    }
    buffers = {
        "bn1.mean": np.zeros(h),
        "bn1.var": np.ones(h),
        "bn2.mean": np.zeros(h),
        "bn2.var": np.ones(h),
    }
    return DetectorModel(config=config, params=params, buffers=buffers, threshold=None)


def _bn_view(params: dict, buffers: dict, tag: str) -> BatchNormParams:
    return BatchNormParams(
        gain=params[f"{tag}.gain"],
        bias=params[f"{tag}.bias"],
        running_mean=buffers[f"{tag}.mean"],
        running_var=buffers[f"{tag}.var"],
    )


def _lstm_view(params: dict, tag: str) -> LstmParams:
    return LstmParams(w=params[f"{tag}.w"], r=params[f"{tag}.r"], b=params[f"{tag}.b"])


def tower_forward(
    params: dict[str, np.ndarray],
    buffers: dict[str, np.ndarray],
    config: TowerConfig,
    x: np.ndarray,
    mode: Mode,
    dropout_seed: int = 0,
    update_running: bool = True,
):
    """Embed a batch (B, M, input_dim) -> (B, embed_dim).

    Dropout and recurrent dropout draw their masks from ``dropout_seed`` in
    Train mode and vanish in Infer mode.  ``update_running`` controls
    whether Train-mode batch statistics are folded into the running
    estimates (disable for pure re-evaluation).
    """
    if x.ndim != 3 or x.shape[1:] != (config.m, config.input_dim):
        raise ValueError(f"input shape {x.shape} != (B, {config.m}, {config.input_dim})")
    batch = x.shape[0]
    cache: dict = {"config": config, "mode": mode}

    rmask1 = recurrent_dropout_mask(
        batch, config.hidden, config.recurrent_dropout, [dropout_seed, 1], mode
    )
    rmask2 = recurrent_dropout_mask(
        batch, config.hidden, config.recurrent_dropout, [dropout_seed, 2], mode
    )

    h1, cache["lstm1"] = lstm_forward(_lstm_view(params, "lstm1"), x, rmask1)
    n1, cache["bn1"] = batchnorm_forward(
        _bn_view(params, buffers, "bn1"), h1, mode, update_running
    )
    a1, cache["tanh1"] = tanh_forward(n1)
    d1, cache["drop1"] = dropout(a1, config.dropout, [dropout_seed, 3], mode)
    e1, cache["dense1"] = dense_forward(params["dense1.w"], params["dense1.b"], d1)

    h2, cache["lstm2"] = lstm_forward(_lstm_view(params, "lstm2"), e1, rmask2)
    n2, cache["bn2"] = batchnorm_forward(
        _bn_view(params, buffers, "bn2"), h2, mode, update_running
    )
    a2, cache["tanh2"] = tanh_forward(n2)
    d2, cache["drop2"] = dropout(a2, config.dropout, [dropout_seed, 4], mode)

    if config.summary == "last":
        summary = d2[:, -1, :]
    else:
        summary = d2.mean(axis=1)
    cache["d2_shape"] = d2.shape
    emb, cache["dense2"] = dense_forward(params["dense2.w"], params["dense2.b"], summary)
    return emb, cache


def tower_backward(cache: dict, demb: np.ndarray):
    """Gradients of :func:`tower_forward` w.r.t. every parameter and the input."""
    config: TowerConfig = cache["config"]
    grads: dict[str, np.ndarray] = {}

    dw2, db2, dsummary = dense_backward(cache["dense2"], demb)
    grads["dense2.w"], grads["dense2.b"] = dw2, db2

    dd2 = np.zeros(cache["d2_shape"])
    if config.summary == "last":
        dd2[:, -1, :] = dsummary
    else:
        dd2 += dsummary[:, None, :] / cache["d2_shape"][1]

    da2 = dropout_backward(cache["drop2"], dd2)
    dn2 = tanh_backward(cache["tanh2"], da2)
    dg2, dbeta2, dh2 = batchnorm_backward(cache["bn2"], dn2)
    grads["bn2.gain"], grads["bn2.bias"] = dg2, dbeta2
    lg2, de1 = lstm_backward(cache["lstm2"], dh2)
    grads["lstm2.w"], grads["lstm2.r"], grads["lstm2.b"] = lg2.w, lg2.r, lg2.b

    dw1, db1, dd1 = dense_backward(cache["dense1"], de1)
    grads["dense1.w"], grads["dense1.b"] = dw1, db1
    da1 = dropout_backward(cache["drop1"], dd1)
    dn1 = tanh_backward(cache["tanh1"], da1)
    dg1, dbeta1, dh1 = batchnorm_backward(cache["bn1"], dn1)
    grads["bn1.gain"], grads["bn1.bias"] = dg1, dbeta1
    lg1, dx = lstm_backward(cache["lstm1"], dh1)
    grads["lstm1.w"], grads["lstm1.r"], grads["lstm1.b"] = lg1.w, lg1.r, lg1.b
    return grads, dx


def _as_batch(batch) -> np.ndarray:
    if isinstance(batch, np.ndarray):
        return batch
    return np.stack([ps.rows for ps in batch])


def embed(model: DetectorModel, batch, mode: Mode = Mode.INFER, dropout_seed: int = 0):
    """Embeddings for a batch of processed sequences (or a raw (B, M, 3) array)."""
    x = _as_batch(batch)
    emb, _ = tower_forward(
        model.params, model.buffers, model.config, x, mode, dropout_seed=dropout_seed
    )
    return emb


# ---------------------------------------------------------------------------
# Cosine head and pair loss
# ---------------------------------------------------------------------------


def cosine_forward(a: np.ndarray, b: np.ndarray):
    """Row-wise cosine similarity of (B, E) embedding batches.

    Rows whose norm falls below 1e-12 produce similarity 0 (and zero
    gradient; the direction of a null vector is undefined).
    """
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    ok = (na >= _NORM_FLOOR) & (nb >= _NORM_FLOOR)
    denom = np.where(ok, na * nb, 1.0)
    s = np.where(ok, (a * b).sum(axis=1) / denom, 0.0)
    cache = (a, b, na, nb, s, ok)
    return s, cache


def cosine_backward(cache, ds: np.ndarray):
    a, b, na, nb, s, ok = cache
    na_safe = np.where(ok, na, 1.0)
    nb_safe = np.where(ok, nb, 1.0)
    scale = (ds * ok)[:, None]
    da = scale * (b / (na_safe * nb_safe)[:, None] - a * (s / (na_safe**2))[:, None])
    db = scale * (a / (na_safe * nb_safe)[:, None] - b * (s / (nb_safe**2))[:, None])
    return da, db


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity of two embedding vectors, in [-1, 1]."""
    s, _ = cosine_forward(np.asarray(a)[None, :], np.asarray(b)[None, :])
    return float(s[0])


def bce_forward(p: np.ndarray, labels: np.ndarray):
    """Mean binary cross entropy; probabilities clamped to
    [1e-7, 1 - 1e-7] before the logarithms."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    pc = np.clip(p, _BCE_CLAMP, 1.0 - _BCE_CLAMP)
    losses = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    cache = (p, pc, y)
    return float(losses.mean()), cache


def bce_backward(cache):
    p, pc, y = cache
    inside = (p == pc).astype(np.float64)  # zero gradient where clamped
    return inside * (-(y / pc) + (1.0 - y) / (1.0 - pc)) / p.size


def pair_loss(p: float, label: int) -> float:
    """Binary cross entropy of one pair score against its label."""
    loss, _ = bce_forward(np.array([p]), np.array([label]))
    return loss


def pair_score(
    model: DetectorModel,
    a: ProcessedSequence,
    b: ProcessedSequence,
    mode: Mode = Mode.INFER,
) -> float:
    """p = (1 - cosine similarity) / 2: probability of an opposite pair."""
    emb = embed(model, [a, b], mode)
    s = cosine_similarity(emb[0], emb[1])
    return (1.0 - s) / 2.0


def pair_scores(model: DetectorModel, pairs: Sequence, mode: Mode = Mode.INFER) -> np.ndarray:
    """Vectorized pair scores for a list of PairExample."""
    if len(pairs) == 0:
        return np.zeros(0)
    xa = np.stack([p.a.rows for p in pairs])
    xb = np.stack([p.b.rows for p in pairs])
    ea = embed(model, xa, mode)
    eb = embed(model, xb, mode)
    s, _ = cosine_forward(ea, eb)
    return (1.0 - s) / 2.0


def siamese_loss(
    params: dict[str, np.ndarray],
    buffers: dict[str, np.ndarray],
    config: TowerConfig,
    xa: np.ndarray,
    xb: np.ndarray,
    labels: np.ndarray,
    mode: Mode,
    dropout_seed: int = 0,
    update_running: bool = True,
):
    """Full pair loss with exact gradients through both shared branches.

    The two branches run as one concatenated batch through the tower, so
    Train-mode batch-norm statistics cover both sides symmetrically and
    weight sharing is inherent.  Returns (mean loss, gradient dict, scores).
    """
    n = xa.shape[0]
    emb, cache = tower_forward(
        params,
        buffers,
        config,
        np.concatenate([xa, xb], axis=0),
        mode,
        dropout_seed=dropout_seed,
        update_running=update_running,
    )
    ea, eb = emb[:n], emb[n:]
    s, cos_cache = cosine_forward(ea, eb)
    p = (1.0 - s) / 2.0
    loss, bce_cache = bce_forward(p, labels)

    dp = bce_backward(bce_cache)
    ds = -0.5 * dp
    da, db = cosine_backward(cos_cache, ds)
    grads, _ = tower_backward(cache, np.concatenate([da, db], axis=0))
    return loss, grads, p


def classify_pair(model: DetectorModel, a: ProcessedSequence, b: ProcessedSequence) -> int:
    """1 (opposite-condition pair) iff score >= threshold; ties classify as 1."""
    if model.threshold is None:
        raise ThresholdUnsetError("decision threshold not calibrated; train or load a model")
    return int(pair_score(model, a, b) >= model.threshold)


def verdict(
    model: DetectorModel,
    probe: ProcessedSequence,
    gallery: Sequence[ProcessedSequence],
) -> tuple[int, float]:
    """Single-document decision against a gallery of known bona fide
    sequences: mean pair score of probe vs each gallery item, thresholded.

    This is deployment plumbing on top of the pairwise detector; the
    evaluation scenarios themselves are purely pairwise.
    """
    if model.threshold is None:
        raise ThresholdUnsetError("decision threshold not calibrated; train or load a model")
    if len(gallery) == 0:
        raise ValueError("gallery must be non-empty")
    probe_emb = embed(model, [probe])[0]
    gallery_emb = embed(model, list(gallery))
    s, _ = cosine_forward(
        np.repeat(probe_emb[None, :], len(gallery), axis=0), gallery_emb
    )
    mean_score = float(np.mean((1.0 - s) / 2.0))
    return int(mean_score >= model.threshold), mean_score
