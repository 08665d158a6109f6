"""Shared builders for tests."""

from __future__ import annotations

import numpy as np

from kdi.events import Condition, DatasetTag, SequenceMeta
from kdi.preprocess import ProcessedSequence


def meta_for(user="u1", condition=Condition.BONA_FIDE, dataset=DatasetTag.SYNTHETIC, session="s1"):
    return SequenceMeta(user_id=user, condition=condition, dataset=dataset, session_id=session)


def random_processed(rng, m=10, condition=Condition.BONA_FIDE, user="u1") -> ProcessedSequence:
    rows = rng.random((m, 3))
    rows[:, 0] = np.sort(rows[:, 0])
    rows[0, 0] = 0.0
    rows[:, 2] = (rows[:, 2] > 0.5).astype(float)
    return ProcessedSequence(meta=meta_for(user=user, condition=condition), rows=rows, valid_len=m)
