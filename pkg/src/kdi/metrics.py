"""ROC construction, equal-error-rate threshold selection, and the
accuracy / F1 / FAR / FRR report over scored pairs.

Label 1 (opposite-condition, assisted involvement) is the positive class.
A pair is predicted positive iff its score is >= the threshold.  FAR is the
fraction of label-0 pairs predicted positive; FRR is the fraction of
label-1 pairs predicted negative.  Candidate thresholds sit at midpoints
between adjacent distinct scores plus sentinels outside the score range, so
the equal-error point is exact for the empirical distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "ScoredPair",
    "RocPoint",
    "EvalReport",
    "MetricsError",
    "roc",
    "eer_threshold",
    "evaluate",
]


class MetricsError(ValueError):
    pass


class ScoredPair(NamedTuple):
    score: float
    label: int


class RocPoint(NamedTuple):
    threshold: float
    far: float
    frr: float


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    f1: float
    far: float
    frr: float
    threshold: float
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def to_text(self) -> str:
        """Flat key-value record, one field per line."""
        fields = ["accuracy", "f1", "far", "frr", "threshold", "tp", "tn", "fp", "fn"]
        return "".join(f"{name} = {getattr(self, name)!r}\n" for name in fields)

    @classmethod
    def from_text(cls, text: str) -> "EvalReport":
        values: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
        try:
            return cls(
                accuracy=float(values["accuracy"]),
                f1=float(values["f1"]),
                far=float(values["far"]),
                frr=float(values["frr"]),
                threshold=float(values["threshold"]),
                tp=int(values["tp"]),
                tn=int(values["tn"]),
                fp=int(values["fp"]),
                fn=int(values["fn"]),
            )
        except KeyError as exc:
            raise MetricsError(f"missing field {exc} in report text") from None


def _split_scores(scored: Iterable[ScoredPair]) -> tuple[np.ndarray, np.ndarray]:
    pairs = list(scored)
    if not pairs:
        raise MetricsError("no scored pairs")
    scores = np.array([p.score for p in pairs], dtype=np.float64)
    labels = np.array([p.label for p in pairs], dtype=np.int64)
    if not np.all(np.isfinite(scores)):
        raise MetricsError("non-finite score")
    return scores, labels


def candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints between adjacent distinct scores, plus one sentinel below
    the minimum and one above the maximum."""
    distinct = np.unique(scores)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    return np.concatenate([[distinct[0] - 0.5], mids, [distinct[-1] + 0.5]])


def roc(scored: Sequence[ScoredPair]) -> list[RocPoint]:
    """One operating point per candidate threshold.

    FAR(t) = fraction of label-0 pairs with score >= t; FRR(t) = fraction of
    label-1 pairs with score < t.  Requires both labels present.
    """
    scores, labels = _split_scores(scored)
    neg = scores[labels == 0]
    pos = scores[labels == 1]
    if len(neg) == 0 or len(pos) == 0:
        raise MetricsError("ROC needs both labels present")
    points = []
    for t in candidate_thresholds(scores):
        far = float(np.count_nonzero(neg >= t)) / len(neg)
        frr = float(np.count_nonzero(pos < t)) / len(pos)
        points.append(RocPoint(threshold=float(t), far=far, frr=frr))
    return points


def eer_threshold(roc_points: Sequence[RocPoint]) -> tuple[float, float]:
    """Threshold at the equal-error point.

    Selects the point minimizing |FAR - FRR|; ties break toward smaller
    (FAR + FRR) / 2, then smaller threshold.  Returns (threshold, eer)
    with eer = (FAR + FRR) / 2 at the selected point.
    """
    if not roc_points:
        raise MetricsError("empty ROC")
    best = min(
        roc_points,
        key=lambda p: (abs(p.far - p.frr), (p.far + p.frr) / 2.0, p.threshold),
    )
    return best.threshold, (best.far + best.frr) / 2.0


def evaluate(scored: Sequence[ScoredPair], threshold: float) -> EvalReport:
    """Confusion counts and derived metrics at a fixed threshold.

    F1 is for the positive (assisted-involvement) class and defined as 0
    when precision + recall is 0; FAR and FRR are 0 when their class is
    absent.
    """
    scores, labels = _split_scores(scored)
    pred = scores >= threshold
    tp = int(np.count_nonzero(pred & (labels == 1)))
    tn = int(np.count_nonzero(~pred & (labels == 0)))
    fp = int(np.count_nonzero(pred & (labels == 0)))
    fn = int(np.count_nonzero(~pred & (labels == 1)))

    total = tp + tn + fp + fn
    accuracy = (tp + tn) / total
    far = fp / (fp + tn) if (fp + tn) else 0.0
    frr = fn / (fn + tp) if (fn + tp) else 0.0
    precision = tp / (tp + fp) if (tp + fp) else 0.0
    recall = tp / (tp + fn) if (tp + fn) else 0.0
    f1 = 2.0 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    return EvalReport(
        accuracy=accuracy,
        f1=f1,
        far=far,
        frr=frr,
        threshold=float(threshold),
        tp=tp,
        tn=tn,
        fp=fp,
        fn=fn,
    )
