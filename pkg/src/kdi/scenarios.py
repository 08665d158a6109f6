"""Reproducible train/val/test splits for the evaluation scenarios.

Four axes (user, keyboard, context, dataset), each in specific or agnostic
mode.  Specific modes split 70-10-20 within the restricted pool (the 20%
test share; the validation slice exists because threshold calibration needs
validation scores).  Agnostic modes hold an entire group out for test and
carve a seeded validation fraction from the training side, so the held-out
label never appears in train or val.

Splits are pure functions of (pool contents, parameters, seed) and are
expressed as pools of sequence identifiers, serializable to a text manifest
for exact replay.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .events import Context, DatasetTag, Keyboard, KeySequence

__all__ = [
    "SplitSpec",
    "SplitError",
    "Axis",
    "SplitMode",
    "ScenarioKind",
    "sequence_ids",
    "select",
    "user_specific",
    "user_agnostic",
    "keyboard_split",
    "context_split",
    "dataset_split",
]

SPECIFIC_PERCENTS = (70, 10, 20)  # train, val, test inside one group
AGNOSTIC_VAL_FRACTION = 0.10


class SplitError(ValueError):
    pass


class Axis(str, Enum):
    USER = "user"
    KEYBOARD = "keyboard"
    CONTEXT = "context"
    DATASET = "dataset"


class SplitMode(str, Enum):
    SPECIFIC = "specific"
    AGNOSTIC = "agnostic"


@dataclass(frozen=True)
class SplitSpec:
    name: str
    train_pool: tuple[str, ...]
    val_pool: tuple[str, ...]
    test_pool: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        pools = [set(self.train_pool), set(self.val_pool), set(self.test_pool)]
        for i in range(3):
            for j in range(i + 1, 3):
                overlap = pools[i] & pools[j]
                if overlap:
                    raise SplitError(f"pools overlap on {sorted(overlap)[:3]}...")

    def to_manifest(self) -> str:
        lines = [f"split {self.name}", f"seed {self.seed}"]
        for section, pool in (
            ("train", self.train_pool),
            ("val", self.val_pool),
            ("test", self.test_pool),
        ):
            lines.append(f"[{section}]")
            lines.extend(pool)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_manifest(cls, text: str) -> "SplitSpec":
        name, seed = "", 0
        pools: dict[str, list[str]] = {"train": [], "val": [], "test": []}
        current: list[str] | None = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("split "):
                name = line[6:]
            elif line.startswith("seed "):
                seed = int(line[5:])
            elif line.startswith("[") and line.endswith("]"):
                current = pools[line[1:-1]]
            elif current is not None:
                current.append(line)
            else:
                raise SplitError(f"manifest line outside any section: {line!r}")
        return cls(
            name=name,
            train_pool=tuple(pools["train"]),
            val_pool=tuple(pools["val"]),
            test_pool=tuple(pools["test"]),
            seed=seed,
        )


def sequence_ids(pool: Sequence[KeySequence]) -> list[str]:
    """Stable identifier per sequence: dataset:user:session:ordinal, where
    the ordinal counts duplicates of that triple in pool order."""
    seen: dict[tuple, int] = {}
    out = []
    for seq in pool:
        key = (seq.meta.dataset.value, seq.meta.user_id, seq.meta.session_id)
        ordinal = seen.get(key, 0)
        seen[key] = ordinal + 1
        out.append(f"{key[0]}:{key[1]}:{key[2]}:{ordinal}")
    return out


def select(pool: Sequence[KeySequence], ids: Sequence[str]) -> list[KeySequence]:
    """Resolve manifest identifiers back to sequences from the same pool."""
    table = dict(zip(sequence_ids(pool), pool))
    try:
        return [table[i] for i in ids]
    except KeyError as exc:
        raise SplitError(f"identifier {exc} not present in pool") from None


def _stable_int(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def _largest_remainder_counts(n: int, percents: Sequence[int]) -> list[int]:
    # Exact integer arithmetic so remainder ties break by position, not by
    # float noise; percents must sum to 100.
    floors = [n * p // 100 for p in percents]
    remainders = [n * p % 100 for p in percents]
    for i in sorted(range(len(percents)), key=lambda i: (-remainders[i], i))[
        : n - sum(floors)
    ]:
        floors[i] += 1
    return floors


def _three_way(
    ids: list[str],
    rng: np.random.Generator,
    percents=SPECIFIC_PERCENTS,
    strata: Sequence[int] | None = None,
) -> tuple[list[str], list[str], list[str]]:
    """Shuffled percentage split.  When ``strata`` labels are given (one per
    id), each stratum is split separately so every pool keeps both
    conditions; pair construction downstream needs that."""
    if strata is not None:
        groups: dict[int, list[str]] = {}
        for sid, stratum in zip(ids, strata):
            groups.setdefault(stratum, []).append(sid)
        train: list[str] = []
        val: list[str] = []
        test: list[str] = []
        for stratum in sorted(groups):
            tr, va, te = _three_way(groups[stratum], rng, percents)
            train += tr
            val += va
            test += te
        return train, val, test
    order = rng.permutation(len(ids))
    shuffled = [ids[i] for i in order]
    n_train, n_val, n_test = _largest_remainder_counts(len(ids), percents)
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )


def _carve_val(
    ids: list[str],
    strata: Sequence[int],
    rng: np.random.Generator,
    fraction: float = AGNOSTIC_VAL_FRACTION,
) -> tuple[list[str], list[str]]:
    """Split ids into (train, val) with a stratified seeded carve."""
    groups: dict[int, list[str]] = {}
    for sid, stratum in zip(ids, strata):
        groups.setdefault(stratum, []).append(sid)
    train: list[str] = []
    val: list[str] = []
    for stratum in sorted(groups):
        members = groups[stratum]
        order = rng.permutation(len(members))
        n_val = int(round(len(members) * fraction))
        val += [members[i] for i in order[:n_val]]
        train += [members[i] for i in order[n_val:]]
    return train, val


def user_specific(
    pool: Sequence[KeySequence],
    seed: int,
    min_sequences: int = 5,
) -> SplitSpec:
    """Per-user 70-10-20 split; every retained user appears in all pools.

    A user's 30% held-back share is the 80-20 train/test split with the
    validation slice carved from the training side.  Users with fewer than
    ``min_sequences`` sequences are excluded with a warning.
    """
    ids = sequence_ids(pool)
    by_user: dict[str, list[tuple[str, int]]] = {}
    for seq, sid in zip(pool, ids):
        by_user.setdefault(seq.meta.user_id, []).append((sid, int(seq.meta.condition)))

    train: list[str] = []
    val: list[str] = []
    test: list[str] = []
    for user in sorted(by_user):
        entries = by_user[user]
        if len(entries) < min_sequences:
            warnings.warn(
                f"user {user!r} excluded: {len(entries)} < {min_sequences} sequences",
                stacklevel=2,
            )
            continue
        rng = np.random.default_rng([seed, _stable_int(user)])
        tr, va, te = _three_way(
            [e[0] for e in entries], rng, strata=[e[1] for e in entries]
        )
        train += tr
        val += va
        test += te
    if not train or not test:
        raise SplitError("no users met the minimum sequence count")
    return SplitSpec(
        name=f"user-specific(seed={seed})",
        train_pool=tuple(train),
        val_pool=tuple(val),
        test_pool=tuple(test),
        seed=seed,
    )


def user_agnostic(
    pool: Sequence[KeySequence],
    ratios: tuple[int, int, int],
    seed: int,
) -> SplitSpec:
    """Partition users (not sequences) by percentage ratios; all of a user's
    sequences follow that user, so no user spans two pools."""
    if sum(ratios) != 100:
        raise SplitError(f"ratios must sum to 100, got {ratios}")
    ids = sequence_ids(pool)
    by_user: dict[str, list[str]] = {}
    for seq, sid in zip(pool, ids):
        by_user.setdefault(seq.meta.user_id, []).append(sid)
    users = sorted(by_user)
    if len(users) < 3:
        raise SplitError(f"user-agnostic split needs >= 3 users, got {len(users)}")

    rng = np.random.default_rng([seed, 0xA6])
    order = rng.permutation(len(users))
    shuffled = [users[i] for i in order]
    n_train, n_val, n_test = _largest_remainder_counts(len(users), ratios)
    groups = (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_val],
        shuffled[n_train + n_val :],
    )
    train, val, test = ([sid for u in g for sid in by_user[u]] for g in groups)
    return SplitSpec(
        name=f"user-agnostic({ratios[0]}-{ratios[1]}-{ratios[2]},seed={seed})",
        train_pool=tuple(train),
        val_pool=tuple(val),
        test_pool=tuple(test),
        seed=seed,
    )


def _label_split(
    pool: Sequence[KeySequence],
    mode: SplitMode,
    axis: Axis,
    labels: list,
    label_of,
    held_out,
    seed: int,
) -> SplitSpec:
    ids = sequence_ids(pool)
    present = {label_of(seq) for seq in pool}

    if mode == SplitMode.SPECIFIC:
        target = held_out
        if target is None:
            if len(present) != 1:
                raise SplitError(
                    f"specific {axis.value} split needs a homogeneous pool or an explicit "
                    f"target; pool has {sorted(l.value for l in present)}"
                )
            target = next(iter(present))
        members = [
            (sid, int(seq.meta.condition))
            for seq, sid in zip(pool, ids)
            if label_of(seq) == target
        ]
        if not members:
            raise SplitError(f"{axis.value} {target.value!r} absent from pool")
        rng = np.random.default_rng([seed, _stable_int(f"{axis.value}:{target.value}")])
        train, val, test = _three_way(
            [m[0] for m in members], rng, strata=[m[1] for m in members]
        )
        name = f"{axis.value}-specific({target.value},seed={seed})"
    else:
        if held_out is None:
            raise SplitError(f"agnostic {axis.value} split requires held_out")
        if held_out not in present:
            raise SplitError(f"held-out {axis.value} {held_out.value!r} absent from pool")
        missing = [l for l in labels if l not in present]
        if missing:
            raise SplitError(
                f"agnostic {axis.value} split needs all of "
                f"{[l.value for l in labels]}; missing {[l.value for l in missing]}"
            )
        members = [
            (sid, int(seq.meta.condition))
            for seq, sid in zip(pool, ids)
            if label_of(seq) != held_out
        ]
        test = [sid for seq, sid in zip(pool, ids) if label_of(seq) == held_out]
        rng = np.random.default_rng([seed, _stable_int(f"{axis.value}:{held_out.value}")])
        train, val = _carve_val([m[0] for m in members], [m[1] for m in members], rng)
        name = f"{axis.value}-agnostic(holdout={held_out.value},seed={seed})"

    return SplitSpec(
        name=name,
        train_pool=tuple(train),
        val_pool=tuple(val),
        test_pool=tuple(test),
        seed=seed,
    )


def keyboard_split(
    pool: Sequence[KeySequence],
    mode: SplitMode,
    held_out: Keyboard | None = None,
    seed: int = 0,
) -> SplitSpec:
    """Specific: 70-10-20 within one keyboard.  Agnostic: train on three
    keyboards, test entirely on ``held_out``.  Unlabeled (non-Buffalo)
    sequences are an error."""
    if any(seq.meta.keyboard == Keyboard.UNKNOWN for seq in pool):
        raise SplitError("pool contains sequences without keyboard labels")
    labels = [Keyboard.K0, Keyboard.K1, Keyboard.K2, Keyboard.K3]
    return _label_split(
        pool, mode, Axis.KEYBOARD, labels, lambda s: s.meta.keyboard, held_out, seed
    )


def context_split(
    pool: Sequence[KeySequence],
    mode: SplitMode,
    held_out: Context | None = None,
    seed: int = 0,
) -> SplitSpec:
    """Same shape as keyboard_split over the GM / GC / RF topic contexts."""
    labels = [Context.GM, Context.GC, Context.RF]
    if any(seq.meta.context not in labels for seq in pool):
        raise SplitError("pool contains sequences outside the GM/GC/RF contexts")
    return _label_split(
        pool, mode, Axis.CONTEXT, labels, lambda s: s.meta.context, held_out, seed
    )


def dataset_split(
    pool: Sequence[KeySequence],
    mode: SplitMode,
    train_sets: set[DatasetTag] | None = None,
    test_sets: set[DatasetTag] | None = None,
    seed: int = 0,
) -> SplitSpec:
    """Specific: one dataset, 70-10-20 within it (train_sets == test_sets).
    Agnostic: every sequence of train_sets trains (minus the validation
    carve), every sequence of test_sets tests; the two must not intersect."""
    train_sets = set(train_sets or ())
    test_sets = set(test_sets or ())
    ids = sequence_ids(pool)
    present = {seq.meta.dataset for seq in pool}

    if mode == SplitMode.SPECIFIC:
        if train_sets != test_sets or len(train_sets) != 1:
            raise SplitError("specific dataset split needs train_sets == test_sets, one dataset")
        (tag,) = train_sets
        return _label_split(
            pool, mode, Axis.DATASET, [tag], lambda s: s.meta.dataset, tag, seed
        )

    if not train_sets or not test_sets:
        raise SplitError("agnostic dataset split needs non-empty train_sets and test_sets")
    if train_sets & test_sets:
        raise SplitError(f"train/test dataset overlap: {sorted(t.value for t in train_sets & test_sets)}")
    for tag in sorted(train_sets | test_sets, key=lambda t: t.value):
        if tag not in present:
            raise SplitError(f"dataset {tag.value!r} absent from pool")

    members = [
        (sid, int(seq.meta.condition))
        for seq, sid in zip(pool, ids)
        if seq.meta.dataset in train_sets
    ]
    test = [sid for seq, sid in zip(pool, ids) if seq.meta.dataset in test_sets]
    key = ",".join(sorted(t.value for t in train_sets)) + "->" + ",".join(
        sorted(t.value for t in test_sets)
    )
    rng = np.random.default_rng([seed, _stable_int(f"dataset:{key}")])
    train, val = _carve_val([m[0] for m in members], [m[1] for m in members], rng)
    return SplitSpec(
        name=f"dataset-agnostic({key},seed={seed})",
        train_pool=tuple(train),
        val_pool=tuple(val),
        test_pool=tuple(test),
        seed=seed,
    )


@dataclass(frozen=True)
class ScenarioKind:
    """Declarative description of one evaluation setup, dispatchable onto a
    sequence pool."""

    axis: Axis
    mode: SplitMode
    held_out_keyboard: Keyboard | None = None
    held_out_context: Context | None = None
    ratios: tuple[int, int, int] | None = None
    train_sets: frozenset[DatasetTag] | None = None
    test_sets: frozenset[DatasetTag] | None = None

    def __post_init__(self) -> None:
        if self.axis == Axis.USER:
            if self.mode == SplitMode.AGNOSTIC and self.ratios is None:
                raise SplitError("user-agnostic scenario needs ratios")
        if self.axis == Axis.KEYBOARD and self.mode == SplitMode.AGNOSTIC:
            if self.held_out_keyboard is None:
                raise SplitError("keyboard-agnostic scenario needs held_out_keyboard")
        if self.axis == Axis.CONTEXT and self.mode == SplitMode.AGNOSTIC:
            if self.held_out_context is None:
                raise SplitError("context-agnostic scenario needs held_out_context")
        if self.axis == Axis.DATASET:
            if not self.train_sets or not self.test_sets:
                raise SplitError("dataset scenario needs train_sets and test_sets")

    def split(self, pool: Sequence[KeySequence], seed: int) -> SplitSpec:
        if self.axis == Axis.USER:
            if self.mode == SplitMode.SPECIFIC:
                return user_specific(pool, seed)
            return user_agnostic(pool, self.ratios, seed)
        if self.axis == Axis.KEYBOARD:
            return keyboard_split(pool, self.mode, self.held_out_keyboard, seed)
        if self.axis == Axis.CONTEXT:
            return context_split(pool, self.mode, self.held_out_context, seed)
        return dataset_split(pool, self.mode, set(self.train_sets), set(self.test_sets), seed)

    def train_tag(self) -> str:
        if self.axis == Axis.USER:
            return "Merged"
        if self.axis == Axis.KEYBOARD:
            if self.mode == SplitMode.SPECIFIC:
                return self.held_out_keyboard.value if self.held_out_keyboard else "K?"
            others = [k.value for k in (Keyboard.K0, Keyboard.K1, Keyboard.K2, Keyboard.K3)
                      if k != self.held_out_keyboard]
            return "+".join(others)
        if self.axis == Axis.CONTEXT:
            if self.mode == SplitMode.SPECIFIC:
                return self.held_out_context.value if self.held_out_context else "?"
            others = [c.value for c in (Context.GM, Context.GC, Context.RF)
                      if c != self.held_out_context]
            return "+".join(others)
        return "+".join(sorted(t.value for t in self.train_sets))

    def test_tag(self) -> str:
        if self.axis == Axis.USER:
            return "Merged"
        if self.axis == Axis.KEYBOARD:
            kb = self.held_out_keyboard
            return kb.value if kb else "K?"
        if self.axis == Axis.CONTEXT:
            ctx = self.held_out_context
            return ctx.value if ctx else "?"
        return "+".join(sorted(t.value for t in self.test_sets))
