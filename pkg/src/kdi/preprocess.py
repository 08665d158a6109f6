"""Sequence filtering, feature normalization, length standardization, and
balanced Siamese pair construction.

A processed sequence is a float64 array of shape (M, 3) whose columns are
(t_norm, k_norm, a): min-max normalized timestamp, keycode / 255, and the
binary key action (down 0, up 1).  All values lie in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .events import Condition, KeySequence, SequenceMeta

__all__ = [
    "COL_T",
    "COL_K",
    "COL_A",
    "FeatureRow",
    "FilterPolicy",
    "FilterDecision",
    "ProcessedSequence",
    "PairExample",
    "PairingError",
    "filter_sequence",
    "normalize",
    "pad_clip",
    "process_pool",
    "make_pairs",
]

COL_T, COL_K, COL_A = 0, 1, 2


class FeatureRow(NamedTuple):
    """One normalized event row; mostly useful for tests and inspection."""

    t_norm: float
    k_norm: float
    a: float


class FilterDecision(Enum):
    KEEP = "keep"
    DROP_SHIFT = "drop_shift"
    DROP_SHORT = "drop_short"


@dataclass(frozen=True)
class FilterPolicy:
    """Exclusion rules applied before feature extraction.

    Sequences whose shift-key share strictly exceeds ``shift_fraction_max``
    are dropped, as are sequences with fewer events than
    ``min_len_fraction * M``.  Both comparisons are strict, so a sequence at
    exactly 20% shift or exactly half of M survives.
    """

    shift_fraction_max: float = 0.20
    min_len_fraction: float = 0.50
    shift_keycodes: frozenset[int] = frozenset({16})

    def __post_init__(self) -> None:
        for name in ("shift_fraction_max", "min_len_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        object.__setattr__(self, "shift_keycodes", frozenset(self.shift_keycodes))


@dataclass(frozen=True)
class ProcessedSequence:
    meta: SequenceMeta
    rows: np.ndarray
    valid_len: int

    def __post_init__(self) -> None:
        rows = np.asarray(self.rows, dtype=np.float64)
        object.__setattr__(self, "rows", rows)
        if rows.ndim != 2 or rows.shape[1] != 3:
            raise ValueError(f"rows must have shape (M, 3), got {rows.shape}")
        if not 1 <= self.valid_len <= rows.shape[0]:
            raise ValueError(f"valid_len {self.valid_len} outside [1, {rows.shape[0]}]")
        if np.any(rows[self.valid_len :] != 0.0):
            raise ValueError("padding rows beyond valid_len must be all-zero")
        if np.any(rows < 0.0) or np.any(rows > 1.0):
            raise ValueError("feature values outside [0, 1]")

    @property
    def m(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class PairExample:
    a: ProcessedSequence
    b: ProcessedSequence
    label: int

    def __post_init__(self) -> None:
        expected = int(self.a.meta.condition != self.b.meta.condition)
        if self.label != expected:
            raise ValueError(f"label {self.label} inconsistent with pair conditions")


class PairingError(ValueError):
    pass


def filter_sequence(seq: KeySequence, policy: FilterPolicy, m: int) -> FilterDecision:
    """Decide whether a raw sequence enters the pipeline for target length M."""
    if not 25 <= m <= 500:
        raise ValueError(f"M must be in [25, 500], got {m}")
    n = len(seq.events)
    shift = sum(1 for e in seq.events if e.keycode in policy.shift_keycodes)
    if shift / n > policy.shift_fraction_max:
        return FilterDecision.DROP_SHIFT
    if n < policy.min_len_fraction * m:
        return FilterDecision.DROP_SHORT
    return FilterDecision.KEEP


def normalize(seq: KeySequence) -> np.ndarray:
    """Normalized feature rows for the whole sequence, shape (n, 3).

    Timestamps are min-max scaled over the sequence's own span; a degenerate
    span (single event or all-equal timestamps) yields t_norm 0 everywhere.
    """
    arr = seq.to_array().astype(np.float64)
    t = arr[:, 0]
    span = t[-1] - t[0]
    if span > 0:
        t_norm = (t - t[0]) / span
    else:
        t_norm = np.zeros_like(t)
    return np.column_stack([t_norm, arr[:, 1] / 255.0, arr[:, 2]])


def pad_clip(rows: np.ndarray, m: int, meta: SequenceMeta) -> ProcessedSequence:
    """Standardize rows to exactly M entries: clip long, zero-pad short."""
    rows = np.asarray(rows, dtype=np.float64)
    n = rows.shape[0]
    if n >= m:
        out = rows[:m].copy()
        valid = m
    else:
        out = np.zeros((m, 3), dtype=np.float64)
        out[:n] = rows
        valid = n
    return ProcessedSequence(meta=meta, rows=out, valid_len=valid)


def process_pool(
    seqs: Sequence[KeySequence],
    policy: FilterPolicy,
    m: int,
) -> tuple[list[ProcessedSequence], dict[FilterDecision, int]]:
    """Run filter -> normalize -> pad_clip over a pool; returns survivors and
    per-decision counts."""
    counts = {d: 0 for d in FilterDecision}
    kept: list[ProcessedSequence] = []
    for seq in seqs:
        decision = filter_sequence(seq, policy, m)
        counts[decision] += 1
        if decision == FilterDecision.KEEP:
            kept.append(pad_clip(normalize(seq), m, seq.meta))
    return kept, counts


# ---------------------------------------------------------------------------
# Pair construction
# ---------------------------------------------------------------------------


def _largest_remainder(quotas: Sequence[float], total: int) -> list[int]:
    floors = [math.floor(q) for q in quotas]
    shortfall = total - sum(floors)
    remainders = sorted(
        range(len(quotas)), key=lambda i: (-(quotas[i] - floors[i]), i)
    )
    for i in remainders[:shortfall]:
        floors[i] += 1
    return floors


def _sample_pairs(
    rng: np.random.Generator,
    left: np.ndarray,
    right: np.ndarray,
    count: int,
    same_side: bool,
) -> list[tuple[int, int]]:
    """Uniform distinct unordered index pairs, left x right (or within left)."""
    if same_side:
        n = len(left)
        space = n * (n - 1) // 2
        # row_start[i] = flat index of pair (i, i+1) in the i<j enumeration
        row_start = np.cumsum([0] + [n - 1 - i for i in range(n - 1)])
    else:
        space = len(left) * len(right)
    if count > space:
        raise PairingError(f"requested {count} pairs but only {space} exist")

    def decode(flat: int) -> tuple[int, int]:
        if same_side:
            i = int(np.searchsorted(row_start, flat, side="right")) - 1
            j = i + 1 + (flat - int(row_start[i]))
            return int(left[i]), int(left[j])
        return int(left[flat // len(right)]), int(right[flat % len(right)])

    if count * 2 >= space:
        chosen = rng.permutation(space)[:count]
        return [decode(int(f)) for f in chosen]
    seen: set[int] = set()
    out: list[tuple[int, int]] = []
    while len(out) < count:
        flat = int(rng.integers(space))
        if flat in seen:
            continue
        seen.add(flat)
        out.append(decode(flat))
    return out


def make_pairs(
    pool: Sequence[ProcessedSequence],
    seed: int,
    target_count: int,
) -> list[PairExample]:
    """Balanced labeled pairs: exactly ``target_count`` examples, half
    opposite-condition (label 1) and half same-condition (label 0).

    Pairs are unordered, distinct, never pair a sequence with itself, and the
    same-condition half is allocated across the two conditions in proportion
    to how many distinct same-condition pairs each offers.  Output order is a
    seeded shuffle, reproducible from ``seed``.
    """
    if target_count <= 0 or target_count % 2 != 0:
        raise PairingError(f"target_count must be positive and even, got {target_count}")
    idx_bona = np.array(
        [i for i, s in enumerate(pool) if s.meta.condition == Condition.BONA_FIDE], dtype=np.int64
    )
    idx_assisted = np.array(
        [i for i, s in enumerate(pool) if s.meta.condition == Condition.ASSISTED], dtype=np.int64
    )
    for name, idx in (("BonaFide", idx_bona), ("Assisted", idx_assisted)):
        if len(idx) < 2:
            raise PairingError(
                f"pool has {len(idx)} {name} sequences; at least 2 of each condition required"
            )

    half = target_count // 2
    cross_space = len(idx_bona) * len(idx_assisted)
    same_space = [len(idx) * (len(idx) - 1) // 2 for idx in (idx_bona, idx_assisted)]
    if half > cross_space:
        raise PairingError(
            f"need {half} opposite-condition pairs but only {cross_space} exist"
        )
    if half > sum(same_space):
        raise PairingError(
            f"need {half} same-condition pairs but only {sum(same_space)} exist"
        )

    # Allocate same-condition pairs proportionally to availability, then cap
    # and push overflow to the other condition.
    quota = _largest_remainder([half * s / sum(same_space) for s in same_space], half)
    for i in (0, 1):
        if quota[i] > same_space[i]:
            quota[1 - i] += quota[i] - same_space[i]
            quota[i] = same_space[i]

    rng_cross = np.random.default_rng([seed, 1])
    rng_same0 = np.random.default_rng([seed, 2])
    rng_same1 = np.random.default_rng([seed, 3])
    rng_order = np.random.default_rng([seed, 4])

    pairs: list[tuple[int, int, int]] = []
    for i, j in _sample_pairs(rng_cross, idx_bona, idx_assisted, half, same_side=False):
        pairs.append((i, j, 1))
    for i, j in _sample_pairs(rng_same0, idx_bona, idx_bona, quota[0], same_side=True):
        pairs.append((i, j, 0))
    for i, j in _sample_pairs(rng_same1, idx_assisted, idx_assisted, quota[1], same_side=True):
        pairs.append((i, j, 0))

    order = rng_order.permutation(len(pairs))
    return [PairExample(a=pool[pairs[k][0]], b=pool[pairs[k][1]], label=pairs[k][2]) for k in order]
