from __future__ import annotations

import numpy as np
import pytest

from kdi.events import (
    Action,
    Condition,
    Context,
    DatasetTag,
    Keyboard,
    KeySequence,
    KeystrokeEvent,
    SequenceMeta,
)
from kdi.scenarios import (
    Axis,
    ScenarioKind,
    SplitError,
    SplitMode,
    SplitSpec,
    context_split,
    dataset_split,
    keyboard_split,
    select,
    sequence_ids,
    user_agnostic,
    user_specific,
)


def seq(user, dataset=DatasetTag.SYNTHETIC, session="s1", keyboard=Keyboard.UNKNOWN,
        context=Context.UNKNOWN, condition=Condition.BONA_FIDE):
    meta = SequenceMeta(
        user_id=user,
        condition=condition,
        dataset=dataset,
        session_id=session,
        keyboard=keyboard,
        context=context,
    )
    events = (KeystrokeEvent(0, 65, Action.DOWN), KeystrokeEvent(10, 65, Action.UP))
    return KeySequence(meta=meta, events=events)


def user_pool(n_users, per_user, **kw):
    return [
        seq(f"u{u:02d}", session=f"s{i}", **kw) for u in range(n_users) for i in range(per_user)
    ]


class TestIds:
    def test_unique_and_stable(self):
        pool = user_pool(3, 4)
        ids = sequence_ids(pool)
        assert len(set(ids)) == len(pool)
        assert ids == sequence_ids(pool)

    def test_select_round_trip(self):
        pool = user_pool(2, 3)
        ids = sequence_ids(pool)
        subset = select(pool, ids[2:5])
        assert subset == pool[2:5]

    def test_select_unknown_id(self):
        pool = user_pool(2, 3)
        with pytest.raises(SplitError):
            select(pool, ["nope:x:y:0"])


class TestSplitSpec:
    def test_overlap_rejected(self):
        with pytest.raises(SplitError):
            SplitSpec(name="x", train_pool=("a", "b"), val_pool=("b",), test_pool=(), seed=0)

    def test_manifest_round_trip(self):
        spec = SplitSpec(
            name="demo", train_pool=("a", "b"), val_pool=("c",), test_pool=("d", "e"), seed=9
        )
        assert SplitSpec.from_manifest(spec.to_manifest()) == spec


class TestUserSpecific:
    def test_ten_sequences_eighty_twenty(self):
        # 70-10-20 internally: train+val carry the 80% share, test exactly 20%.
        pool = user_pool(1, 10)
        spec = user_specific(pool, seed=0)
        assert len(spec.train_pool) + len(spec.val_pool) == 8
        assert len(spec.test_pool) == 2

    def test_two_users_all_present_everywhere(self):
        pool = user_pool(2, 10)
        spec = user_specific(pool, seed=1)
        assert len(spec.train_pool) + len(spec.val_pool) == 16
        assert len(spec.test_pool) == 4
        users_of = lambda ids: {i.split(":")[1] for i in ids}
        assert users_of(spec.train_pool) == {"u00", "u01"}
        assert users_of(spec.test_pool) == {"u00", "u01"}

    def test_determinism(self):
        pool = user_pool(5, 8)
        assert user_specific(pool, seed=3) == user_specific(pool, seed=3)
        assert user_specific(pool, seed=3) != user_specific(pool, seed=4)

    def test_small_user_excluded_with_warning(self):
        pool = user_pool(2, 10) + [seq("tiny", session=f"s{i}") for i in range(3)]
        with pytest.warns(UserWarning, match="tiny"):
            spec = user_specific(pool, seed=0)
        assert not any("tiny" in i for i in spec.train_pool + spec.val_pool + spec.test_pool)


class TestUserAgnostic:
    def test_ten_users_80_10_10(self):
        pool = user_pool(10, 4)
        spec = user_agnostic(pool, (80, 10, 10), seed=0)
        users_of = lambda ids: {i.split(":")[1] for i in ids}
        assert len(users_of(spec.train_pool)) == 8
        assert len(users_of(spec.val_pool)) == 1
        assert len(users_of(spec.test_pool)) == 1

    def test_four_users_50_25_25(self):
        pool = user_pool(4, 4)
        spec = user_agnostic(pool, (50, 25, 25), seed=0)
        users_of = lambda ids: {i.split(":")[1] for i in ids}
        assert len(users_of(spec.train_pool)) == 2
        assert len(users_of(spec.val_pool)) == 1
        assert len(users_of(spec.test_pool)) == 1

    def test_no_user_crosses_pools(self):
        pool = user_pool(9, 5)
        spec = user_agnostic(pool, (50, 25, 25), seed=7)
        users_of = lambda ids: {i.split(":")[1] for i in ids}
        assert not users_of(spec.train_pool) & users_of(spec.test_pool)
        assert not users_of(spec.train_pool) & users_of(spec.val_pool)
        assert not users_of(spec.val_pool) & users_of(spec.test_pool)

    def test_bad_ratios(self):
        with pytest.raises(SplitError):
            user_agnostic(user_pool(5, 4), (80, 10, 5), seed=0)

    def test_too_few_users(self):
        with pytest.raises(SplitError):
            user_agnostic(user_pool(2, 4), (50, 25, 25), seed=0)


def keyboard_pool():
    pool = []
    for k in (Keyboard.K0, Keyboard.K1, Keyboard.K2, Keyboard.K3):
        for u in range(3):
            for s in range(4):
                pool.append(
                    seq(f"{k.value}u{u}", dataset=DatasetTag.B, session=f"s{s}", keyboard=k)
                )
    return pool


class TestKeyboardSplit:
    def test_agnostic_holds_out_entirely(self):
        spec = keyboard_split(keyboard_pool(), SplitMode.AGNOSTIC, Keyboard.K1, seed=0)
        assert all(not i.startswith("B:K1") for i in spec.train_pool + spec.val_pool)
        assert all(i.split(":")[1].startswith("K1") for i in spec.test_pool)

    def test_specific_restricted_to_one_keyboard(self):
        pool = [s for s in keyboard_pool() if s.meta.keyboard == Keyboard.K0]
        spec = keyboard_split(pool, SplitMode.SPECIFIC, seed=0)
        for i in spec.train_pool + spec.val_pool + spec.test_pool:
            assert i.split(":")[1].startswith("K0")

    def test_four_agnostic_runs_cover_each_keyboard(self):
        pool = keyboard_pool()
        tested = set()
        for k in (Keyboard.K0, Keyboard.K1, Keyboard.K2, Keyboard.K3):
            spec = keyboard_split(pool, SplitMode.AGNOSTIC, k, seed=0)
            tested |= {i.split(":")[1][:2] for i in spec.test_pool}
        assert tested == {"K0", "K1", "K2", "K3"}

    def test_missing_labels_error(self):
        with pytest.raises(SplitError, match="keyboard labels"):
            keyboard_split(user_pool(2, 3), SplitMode.AGNOSTIC, Keyboard.K0, seed=0)

    def test_specific_heterogeneous_pool_needs_target(self):
        with pytest.raises(SplitError):
            keyboard_split(keyboard_pool(), SplitMode.SPECIFIC, seed=0)
        spec = keyboard_split(keyboard_pool(), SplitMode.SPECIFIC, Keyboard.K2, seed=0)
        for i in spec.train_pool + spec.test_pool:
            assert i.split(":")[1].startswith("K2")


def context_pool():
    pool = []
    for c in (Context.GM, Context.GC, Context.RF):
        for u in range(3):
            for s in range(4):
                pool.append(
                    seq(f"{c.value}u{u}", dataset=DatasetTag.S, session=f"s{s}", context=c)
                )
    return pool


class TestContextSplit:
    def test_agnostic_rf_trains_on_gm_gc(self):
        spec = context_split(context_pool(), SplitMode.AGNOSTIC, Context.RF, seed=0)
        train_users = {i.split(":")[1][:2] for i in spec.train_pool + spec.val_pool}
        assert train_users == {"GM", "GC"}
        assert {i.split(":")[1][:2] for i in spec.test_pool} == {"RF"}

    def test_specific_gm(self):
        pool = [s for s in context_pool() if s.meta.context == Context.GM]
        spec = context_split(pool, SplitMode.SPECIFIC, seed=0)
        n = len(pool)
        assert len(spec.test_pool) == round(n * 0.2)

    def test_held_out_absent(self):
        pool = [s for s in context_pool() if s.meta.context != Context.RF]
        with pytest.raises(SplitError):
            context_split(pool, SplitMode.AGNOSTIC, Context.RF, seed=0)


def dataset_pool():
    pool = []
    for tag in (DatasetTag.S, DatasetTag.P, DatasetTag.B):
        for u in range(3):
            for s in range(4):
                ctx = Context.GM if tag == DatasetTag.S else Context.UNKNOWN
                pool.append(
                    seq(f"{tag.value}u{u}", dataset=tag, session=f"s{s}", context=ctx)
                )
    return pool


class TestDatasetSplit:
    def test_agnostic_partition_by_tag(self):
        spec = dataset_split(
            dataset_pool(),
            SplitMode.AGNOSTIC,
            train_sets={DatasetTag.S, DatasetTag.B},
            test_sets={DatasetTag.P},
            seed=0,
        )
        assert all(i.split(":")[0] in ("S", "B") for i in spec.train_pool + spec.val_pool)
        assert all(i.split(":")[0] == "P" for i in spec.test_pool)

    def test_specific_single_dataset(self):
        spec = dataset_split(
            dataset_pool(),
            SplitMode.SPECIFIC,
            train_sets={DatasetTag.B},
            test_sets={DatasetTag.B},
            seed=0,
        )
        pools = spec.train_pool + spec.val_pool + spec.test_pool
        assert all(i.split(":")[0] == "B" for i in pools)

    def test_overlapping_agnostic_sets_rejected(self):
        with pytest.raises(SplitError):
            dataset_split(
                dataset_pool(),
                SplitMode.AGNOSTIC,
                train_sets={DatasetTag.S},
                test_sets={DatasetTag.S},
                seed=0,
            )


ALL_KINDS = [
    ScenarioKind(axis=Axis.USER, mode=SplitMode.SPECIFIC),
    ScenarioKind(axis=Axis.USER, mode=SplitMode.AGNOSTIC, ratios=(80, 10, 10)),
    ScenarioKind(axis=Axis.KEYBOARD, mode=SplitMode.SPECIFIC, held_out_keyboard=Keyboard.K0),
    ScenarioKind(axis=Axis.KEYBOARD, mode=SplitMode.AGNOSTIC, held_out_keyboard=Keyboard.K3),
    ScenarioKind(axis=Axis.CONTEXT, mode=SplitMode.SPECIFIC, held_out_context=Context.GM),
    ScenarioKind(axis=Axis.CONTEXT, mode=SplitMode.AGNOSTIC, held_out_context=Context.RF),
    ScenarioKind(
        axis=Axis.DATASET,
        mode=SplitMode.SPECIFIC,
        train_sets=frozenset({DatasetTag.B}),
        test_sets=frozenset({DatasetTag.B}),
    ),
    ScenarioKind(
        axis=Axis.DATASET,
        mode=SplitMode.AGNOSTIC,
        train_sets=frozenset({DatasetTag.S, DatasetTag.B}),
        test_sets=frozenset({DatasetTag.P}),
    ),
]


def mixed_pool(rng):
    pool = []
    for tag in (DatasetTag.S, DatasetTag.P, DatasetTag.B):
        for u in range(6):
            for s in range(6):
                kb = (
                    [Keyboard.K0, Keyboard.K1, Keyboard.K2, Keyboard.K3][
                        int(rng.integers(4))
                    ]
                    if tag == DatasetTag.B
                    else Keyboard.UNKNOWN
                )
                ctx = (
                    [Context.GM, Context.GC, Context.RF][int(rng.integers(3))]
                    if tag == DatasetTag.S
                    else Context.UNKNOWN
                )
                pool.append(
                    seq(
                        f"{tag.value}u{u}",
                        dataset=tag,
                        session=f"s{s}",
                        keyboard=kb,
                        context=ctx,
                        condition=Condition(int(rng.integers(2))),
                    )
                )
    return pool


def pool_for(kind, pool):
    if kind.axis == Axis.KEYBOARD:
        if kind.mode == SplitMode.SPECIFIC:
            return [s for s in pool if s.meta.keyboard == kind.held_out_keyboard]
        return [s for s in pool if s.meta.dataset == DatasetTag.B]
    if kind.axis == Axis.CONTEXT:
        if kind.mode == SplitMode.SPECIFIC:
            return [s for s in pool if s.meta.context == kind.held_out_context]
        return [s for s in pool if s.meta.dataset == DatasetTag.S]
    return pool


class TestEveryScenarioKind:
    @pytest.mark.parametrize("kind", ALL_KINDS, ids=lambda k: f"{k.axis.value}-{k.mode.value}")
    def test_disjoint_over_seeded_pools(self, kind):
        for trial in range(10):
            rng = np.random.default_rng(trial)
            pool = pool_for(kind, mixed_pool(rng))
            spec = kind.split(pool, seed=trial)
            pools = [set(spec.train_pool), set(spec.val_pool), set(spec.test_pool)]
            assert not pools[0] & pools[2]
            assert not pools[0] & pools[1]
            assert not pools[1] & pools[2]
            assert kind.split(pool, seed=trial) == spec  # deterministic
