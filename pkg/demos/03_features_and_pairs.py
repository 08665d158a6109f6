"""Preprocessing: filtering, normalization, length standardization, pairing.

Every sequence becomes an M x 3 matrix of (t_norm, k_norm, action) rows in
[0, 1]; shift-heavy and too-short sequences are excluded; balanced labeled
pairs feed the Siamese trainer.
"""

import numpy as np

from kdi import FilterPolicy, make_pairs, normalize, pad_clip, process_pool
from kdi.preprocess import filter_sequence
from kdi.synth import default_profiles, generate_corpus, generate_sequence
from kdi.events import Condition

M = 50
policy = FilterPolicy()  # shift > 20% or length < 50% of M drops a sequence

seq = generate_sequence(default_profiles()[Condition.BONA_FIDE], 1.0, seed=3)
print(f"raw sequence: {len(seq.events)} events")
print("filter decision:", filter_sequence(seq, policy, M).value)

rows = normalize(seq)
print(f"normalized rows: {rows.shape}, min {rows.min():.3f}, max {rows.max():.3f}")
processed = pad_clip(rows, M, seq.meta)
print(f"standardized to M={M}: shape {processed.rows.shape}, valid_len {processed.valid_len}")
np.set_printoptions(precision=4, suppress=True)
print("first rows (t_norm, k_norm, action):")
print(processed.rows[:5])

corpus = generate_corpus(n_users=8, seqs_per_user_per_condition=3, seed=11)
pool, counts = process_pool(corpus, policy, M)
print(f"\npool: {len(corpus)} sequences -> {len(pool)} kept, drops: "
      f"{ {k.value: v for k, v in counts.items() if v} or 'none' }")

pairs = make_pairs(pool, seed=5, target_count=60)
n_pos = sum(p.label for p in pairs)
print(f"pairs: {len(pairs)} total, {n_pos} opposite-condition, {len(pairs) - n_pos} same-condition")
print("labels always mean condition disagreement:",
      all(p.label == int(p.a.meta.condition != p.b.meta.condition) for p in pairs))
