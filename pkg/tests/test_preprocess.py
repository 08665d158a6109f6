from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kdi.events import Action, Condition, DatasetTag, KeySequence, KeystrokeEvent, SequenceMeta
from kdi.preprocess import (
    COL_A,
    COL_K,
    COL_T,
    FilterDecision,
    FilterPolicy,
    PairingError,
    ProcessedSequence,
    filter_sequence,
    make_pairs,
    normalize,
    pad_clip,
    process_pool,
)


def make_seq(n=10, keycodes=None, gaps=None, condition=Condition.BONA_FIDE, user="u1"):
    keycodes = keycodes if keycodes is not None else [65] * n
    gaps = gaps if gaps is not None else [100] * n
    t = 0
    events = []
    for i in range(n):
        t += gaps[i]
        events.append(KeystrokeEvent(t, keycodes[i], Action.DOWN if i % 2 == 0 else Action.UP))
    meta = SequenceMeta(
        user_id=user, condition=condition, dataset=DatasetTag.SYNTHETIC, session_id="s1"
    )
    return KeySequence(meta=meta, events=tuple(events))


def processed(condition=Condition.BONA_FIDE, user="u1", m=10, fill=0.5):
    rows = np.full((m, 3), fill)
    meta = SequenceMeta(
        user_id=user, condition=condition, dataset=DatasetTag.SYNTHETIC, session_id="s1"
    )
    return ProcessedSequence(meta=meta, rows=rows, valid_len=m)


class TestFilter:
    def test_drop_shift_over_twenty_percent(self):
        seq = make_seq(100, keycodes=[16] * 25 + [65] * 75)
        assert filter_sequence(seq, FilterPolicy(), 100) == FilterDecision.DROP_SHIFT

    def test_drop_short_below_half_m(self):
        seq = make_seq(49)
        assert filter_sequence(seq, FilterPolicy(), 100) == FilterDecision.DROP_SHORT

    def test_keep_at_both_boundaries(self):
        # exactly 20% shift and exactly 50% of M: strict comparisons keep it
        seq = make_seq(50, keycodes=[16] * 10 + [65] * 40)
        assert filter_sequence(seq, FilterPolicy(), 100) == FilterDecision.KEEP

    def test_m_range_enforced(self):
        seq = make_seq(30)
        with pytest.raises(ValueError):
            filter_sequence(seq, FilterPolicy(), 24)
        with pytest.raises(ValueError):
            filter_sequence(seq, FilterPolicy(), 501)

    def test_custom_shift_keycodes(self):
        policy = FilterPolicy(shift_keycodes=frozenset({16, 160, 161}))
        seq = make_seq(10, keycodes=[160] * 3 + [65] * 7)
        assert filter_sequence(seq, policy, 25) == FilterDecision.DROP_SHIFT

    def test_policy_fraction_validation(self):
        with pytest.raises(ValueError):
            FilterPolicy(shift_fraction_max=0.0)
        with pytest.raises(ValueError):
            FilterPolicy(min_len_fraction=1.5)


class TestNormalize:
    def test_minmax_timestamps(self):
        seq = make_seq(3, gaps=[1000, 500, 500])
        rows = normalize(seq)
        assert rows[:, COL_T].tolist() == [0.0, 0.5, 1.0]

    def test_keycode_division(self):
        seq = make_seq(2, keycodes=[65, 65])
        rows = normalize(seq)
        assert rows[0, COL_K] == pytest.approx(65 / 255, abs=1e-12)
        assert rows[0, COL_K] == pytest.approx(0.254902, abs=1e-6)

    def test_action_encoding(self):
        seq = make_seq(2)
        rows = normalize(seq)
        assert rows[0, COL_A] == 0.0  # Down
        assert rows[1, COL_A] == 1.0  # Up

    def test_degenerate_span(self):
        events = (KeystrokeEvent(5, 65, Action.DOWN), KeystrokeEvent(5, 66, Action.UP))
        seq = KeySequence(meta=make_seq().meta, events=events)
        rows = normalize(seq)
        assert rows[:, COL_T].tolist() == [0.0, 0.0]

    def test_single_event(self):
        seq = make_seq(1)
        rows = normalize(seq)
        assert rows[0, COL_T] == 0.0

    def test_idempotent_minmax(self):
        seq = make_seq(20, gaps=list(range(1, 21)))
        t = normalize(seq)[:, COL_T]
        again = (t - t.min()) / (t.max() - t.min())
        np.testing.assert_array_equal(t, again)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 100_000), min_size=1, max_size=200), st.integers(0, 255))
    def test_all_values_in_unit_interval(self, gaps, keycode):
        seq = make_seq(len(gaps), keycodes=[keycode] * len(gaps), gaps=gaps)
        rows = normalize(seq)
        assert rows.min() >= 0.0 and rows.max() <= 1.0


class TestPadClip:
    def test_pad_short(self):
        rows = np.full((3, 3), 0.5)
        ps = pad_clip(rows, 5, make_seq().meta)
        assert ps.rows.shape == (5, 3)
        assert ps.valid_len == 3
        assert np.all(ps.rows[3:] == 0.0)

    def test_clip_long(self):
        rows = np.linspace(0, 1, 500 * 3).reshape(500, 3)
        ps = pad_clip(rows, 100, make_seq().meta)
        assert ps.rows.shape == (100, 3)
        assert ps.valid_len == 100
        np.testing.assert_array_equal(ps.rows, rows[:100])

    def test_exact_length_unchanged(self):
        rows = np.full((7, 3), 0.25)
        ps = pad_clip(rows, 7, make_seq().meta)
        assert ps.valid_len == 7
        np.testing.assert_array_equal(ps.rows, rows)

    def test_padding_invariant_enforced(self):
        rows = np.full((5, 3), 0.5)
        meta = make_seq().meta
        with pytest.raises(ValueError):
            ProcessedSequence(meta=meta, rows=rows, valid_len=3)


class TestProcessPool:
    def test_counts_and_order(self):
        seqs = [
            make_seq(60),
            make_seq(10),  # short for M=50
            make_seq(60, keycodes=[16] * 30 + [65] * 30),  # shift-heavy
        ]
        kept, counts = process_pool(seqs, FilterPolicy(), 50)
        assert len(kept) == 1
        assert counts[FilterDecision.DROP_SHORT] == 1
        assert counts[FilterDecision.DROP_SHIFT] == 1
        assert kept[0].valid_len == 50


class TestMakePairs:
    def test_forced_two_two(self):
        pool = [
            processed(Condition.BONA_FIDE, "u1"),
            processed(Condition.BONA_FIDE, "u2"),
            processed(Condition.ASSISTED, "u3"),
            processed(Condition.ASSISTED, "u4"),
        ]
        pairs = make_pairs(pool, seed=0, target_count=4)
        labels = sorted(p.label for p in pairs)
        assert labels == [0, 0, 1, 1]

    def test_single_condition_pool_errors(self):
        pool = [processed(Condition.BONA_FIDE, f"u{i}") for i in range(4)]
        with pytest.raises(PairingError, match="Assisted"):
            make_pairs(pool, seed=0, target_count=4)

    def test_deterministic_from_seed(self):
        pool = [processed(Condition(i % 2), f"u{i}", fill=(i + 1) / 50) for i in range(40)]
        a = make_pairs(pool, seed=123, target_count=100)
        b = make_pairs(pool, seed=123, target_count=100)
        assert a == b
        c = make_pairs(pool, seed=124, target_count=100)
        assert a != c

    def test_exact_balance_and_distinctness(self):
        pool = [processed(Condition(i % 2), f"u{i}", fill=(i + 1) / 50) for i in range(30)]
        pairs = make_pairs(pool, seed=7, target_count=200)
        assert len(pairs) == 200
        assert sum(p.label for p in pairs) == 100
        seen = set()
        for p in pairs:
            key = frozenset([id(p.a), id(p.b)])
            assert len(key) == 2, "self-pair"
            assert key not in seen, "duplicate unordered pair"
            seen.add(key)

    def test_label_matches_conditions(self):
        pool = [processed(Condition(i % 2), f"u{i}", fill=(i + 1) / 50) for i in range(20)]
        for p in make_pairs(pool, seed=3, target_count=60):
            assert p.label == int(p.a.meta.condition != p.b.meta.condition)

    def test_odd_target_rejected(self):
        pool = [processed(Condition(i % 2), f"u{i}") for i in range(6)]
        with pytest.raises(PairingError):
            make_pairs(pool, seed=0, target_count=5)

    def test_requesting_more_than_space_errors(self):
        pool = [
            processed(Condition.BONA_FIDE, "u1"),
            processed(Condition.BONA_FIDE, "u2"),
            processed(Condition.ASSISTED, "u3"),
            processed(Condition.ASSISTED, "u4"),
        ]
        with pytest.raises(PairingError):
            make_pairs(pool, seed=0, target_count=10)

    @settings(max_examples=25, deadline=None)
    @given(
        st.integers(2, 12),
        st.integers(2, 12),
        st.integers(1, 30),
        st.integers(0, 2**32 - 1),
    )
    def test_balance_property(self, n_bona, n_assisted, half, seed):
        pool = [processed(Condition.BONA_FIDE, f"b{i}", fill=(i + 1) / 20) for i in range(n_bona)]
        pool += [
            processed(Condition.ASSISTED, f"a{i}", fill=(i + 1) / 20) for i in range(n_assisted)
        ]
        target = 2 * half
        cross = n_bona * n_assisted
        same = n_bona * (n_bona - 1) // 2 + n_assisted * (n_assisted - 1) // 2
        if half > cross or half > same:
            with pytest.raises(PairingError):
                make_pairs(pool, seed=seed, target_count=target)
        else:
            pairs = make_pairs(pool, seed=seed, target_count=target)
            assert sum(p.label for p in pairs) * 2 == target
