"""Training loop over balanced pair sets, with checkpointing and replay.

Each epoch shuffles the training pairs with a seeded permutation and runs
mini-batch Adam over the Siamese loss (batch norm in Train mode, dropout
active, the last partial batch included).  After every epoch the validation
pairs are scored in Infer mode and their equal error rate recorded; the
parameter snapshot with the best validation EER is retained.  Training ends
after the fixed epoch budget (no early stopping) and the decision threshold
is calibrated on validation scores at the EER point.

Runs are bit-reproducible in single-threaded mode: all randomness derives
from the seed, and validation pairs are never consumed for gradient updates
(the run records instrumented counters to assert this).
"""

from __future__ import annotations

import json
import time
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .metrics import ScoredPair, eer_threshold, roc
from .model import DetectorModel, TowerConfig, init_detector, pair_scores, siamese_loss
from .nncore import CheckpointError, Mode, adam_step, init_adam, load_arrays, save_arrays
from .preprocess import PairExample

__all__ = [
    "HyperParams",
    "EpochRecord",
    "TrainRun",
    "TrainDivergedError",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "load_train_config",
]

ALLOWED_BATCH_SIZES = (32, 64, 128, 256, 512)


class TrainDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class HyperParams:
    """Training-policy knobs.

    ``m`` is the standardized sequence length in [25, 500]; batch sizes are
    the powers of two from 32 to 512.  The learning-rate policy band is
    [0.0001, 0.005]; values outside it (including 0 for no-op runs) are
    accepted so diagnostics can run, since Adam itself has no such limit.
    """

    m: int = 50
    batch_size: int = 64
    lr: float = 0.001
    epochs: int = 75
    l2_lambda: float = 1e-4
    seed: int = 0

    def __post_init__(self) -> None:
        if not 25 <= self.m <= 500:
            raise ValueError(f"m must be in [25, 500], got {self.m}")
        if self.batch_size not in ALLOWED_BATCH_SIZES:
            raise ValueError(
                f"batch_size must be one of {ALLOWED_BATCH_SIZES}, got {self.batch_size}"
            )
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr < 0 or self.l2_lambda < 0:
            raise ValueError("lr and l2_lambda must be nonnegative")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    val_eer: float
    wall_time_s: float


@dataclass
class TrainRun:
    records: list[EpochRecord]
    model: DetectorModel
    best_epoch: int
    pairs_used_for_updates: int = 0
    val_scoring_passes: int = 0

    def metrics_equal(self, other: "TrainRun") -> bool:
        """Bit-exact equality of everything except wall-clock times."""
        if len(self.records) != len(other.records):
            return False
        for a, b in zip(self.records, other.records):
            if (a.epoch, a.mean_loss, a.val_eer) != (b.epoch, b.mean_loss, b.val_eer):
                return False
        if self.best_epoch != other.best_epoch:
            return False
        if self.model.threshold != other.model.threshold:
            return False
        for k in self.model.params:
            if not np.array_equal(self.model.params[k], other.model.params[k]):
                return False
        for k in self.model.buffers:
            if not np.array_equal(self.model.buffers[k], other.model.buffers[k]):
                return False
        return True


def _stack_pairs(pairs: Sequence[PairExample]):
    xa = np.stack([p.a.rows for p in pairs])
    xb = np.stack([p.b.rows for p in pairs])
    y = np.array([p.label for p in pairs], dtype=np.float64)
    return xa, xb, y


def _check_disjoint(train_pairs, val_pairs) -> None:
    def keys(pairs):
        return {
            (id(p.a), id(p.b)) for p in pairs
        } | {(id(p.b), id(p.a)) for p in pairs}

    if keys(train_pairs) & keys(val_pairs):
        raise ValueError("training and validation pair sets overlap")


def _check_balanced(pairs, name) -> None:
    ones = sum(p.label for p in pairs)
    if 2 * ones != len(pairs):
        raise ValueError(f"{name} pairs not balanced: {ones} of {len(pairs)} are label-1")


def val_scores(model: DetectorModel, pairs: Sequence[PairExample]) -> list[ScoredPair]:
    scores = pair_scores(model, pairs, Mode.INFER)
    return [ScoredPair(float(s), p.label) for s, p in zip(scores, pairs)]


def train(
    pairs_train: Sequence[PairExample],
    pairs_val: Sequence[PairExample],
    hp: HyperParams,
    config: TowerConfig,
) -> TrainRun:
    if len(pairs_train) == 0 or len(pairs_val) == 0:
        raise ValueError("empty pair set")
    if config.m != hp.m:
        raise ValueError(f"config.m={config.m} disagrees with hp.m={hp.m}")
    _check_balanced(pairs_train, "training")
    _check_balanced(pairs_val, "validation")
    _check_disjoint(pairs_train, pairs_val)

    model = init_detector(config, hp.seed)
    adam = init_adam(model.params, lr=hp.lr, l2_lambda=hp.l2_lambda, warn_policy=False)

    n = len(pairs_train)
    records: list[EpochRecord] = []
    best: tuple[float, int] | None = None
    best_snapshot: DetectorModel | None = None
    updates = 0
    val_passes = 0

    for epoch in range(hp.epochs):
        t0 = time.perf_counter()
        order = np.random.default_rng([hp.seed, 0x5A, epoch]).permutation(n)
        losses: list[float] = []
        for b_idx, start in enumerate(range(0, n, hp.batch_size)):
            batch = [pairs_train[i] for i in order[start : start + hp.batch_size]]
            xa, xb, y = _stack_pairs(batch)
            seed32 = zlib.crc32(f"{hp.seed}/{epoch}/{b_idx}".encode())
            loss, grads, _ = siamese_loss(
                model.params,
                model.buffers,
                config,
                xa,
                xb,
                y,
                Mode.TRAIN,
                dropout_seed=seed32,
            )
            if not np.isfinite(loss):
                raise TrainDivergedError(
                    f"non-finite loss at epoch {epoch}, batch {b_idx}"
                )
            losses.append(loss * len(batch))
            model.params, adam = adam_step(adam, model.params, grads)
            updates += len(batch)

        scored = val_scores(model, pairs_val)
        val_passes += 1
        _, eer = eer_threshold(roc(scored))
        mean_loss = float(np.sum(losses) / n)
        records.append(
            EpochRecord(
                epoch=epoch,
                mean_loss=mean_loss,
                val_eer=eer,
                wall_time_s=time.perf_counter() - t0,
            )
        )
        if best is None or eer < best[0]:
            best = (eer, epoch)
            best_snapshot = model.copy()

    assert best_snapshot is not None
    final = best_snapshot
    threshold, _ = eer_threshold(roc(val_scores(final, pairs_val)))
    val_passes += 1
    final.threshold = float(threshold)
    return TrainRun(
        records=records,
        model=final,
        best_epoch=best[1],
        pairs_used_for_updates=updates,
        val_scoring_passes=val_passes,
    )


# ---------------------------------------------------------------------------
# Checkpointing
# ---------------------------------------------------------------------------


def save_checkpoint(model: DetectorModel, path: str | Path) -> None:
    """Model checkpoint: parameter container + tower config + threshold."""
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    arrays |= {f"buffer/{k}": v for k, v in model.buffers.items()}
    meta = {
        "config": json.dumps(
            {
                "m": model.config.m,
                "input_dim": model.config.input_dim,
                "hidden": model.config.hidden,
                "embed_dim": model.config.embed_dim,
                "dropout": model.config.dropout,
                "recurrent_dropout": model.config.recurrent_dropout,
                "summary": model.config.summary,
            }
        ),
        "threshold": "unset" if model.threshold is None else repr(model.threshold),
    }
    save_arrays(path, arrays, meta)


def load_checkpoint(
    path: str | Path,
    expected_config: TowerConfig | None = None,
) -> DetectorModel:
    arrays, meta = load_arrays(path)
    if "config" not in meta:
        raise CheckpointError(f"{path}: missing tower config")
    config = TowerConfig(**json.loads(meta["config"]))
    if expected_config is not None and config != expected_config:
        raise CheckpointError(
            f"{path}: checkpoint config {config} does not match expected {expected_config}"
        )
    params = {k[6:]: arrays[k] for k in arrays if k.startswith("param/")}
    buffers = {k[7:]: arrays[k] for k in arrays if k.startswith("buffer/")}
    threshold = None if meta.get("threshold") == "unset" else float(meta["threshold"])
    return DetectorModel(config=config, params=params, buffers=buffers, threshold=threshold)


def load_train_config(path: str | Path) -> dict[str, str]:
    """Flat key-value training config: ``name = value`` lines, # comments."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"{path}:{line_no}: expected 'name = value', got {raw!r}")
        out[key.strip()] = value.strip()
    return out
