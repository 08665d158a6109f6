"""Seeded generator of synthetic bona fide and assisted keystroke sequences.

The generator walks the four cognitive stages of writing and turns each into
an observable timing pattern:

* idea generation: an initial pause before the first key and long pauses at
  sentence boundaries;
* translation: uninterrupted bursts of character keys separated by
  within-burst gaps, with thinking pauses between bursts and words;
* transcription: occasional immediate within-word corrections as backspace
  runs followed by retyping;
* review: occasional revision bursts landing after a long pause at a
  sentence boundary (a stand-in for cursor jumps, which the event model
  cannot represent).

Every key press gets a matching release after a sampled hold time.  Stored
timestamps are rebased to the first event, so the initial pause itself is
not observable downstream; the profile keeps it for realism of the raw
trace.  This is a controllable desk-scale stand-in, not a validated human
typing simulator; the default parameters live in ``data/synth_defaults.txt``
and are calibration choices of this artifact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .events import Action, Condition, DatasetTag, KeySequence, KeystrokeEvent, SequenceMeta

__all__ = [
    "LogNormalSpec",
    "GenParams",
    "ConditionProfile",
    "default_profiles",
    "load_profiles",
    "generate_sequence",
    "generate_corpus",
    "USER_SPEED_SIGMA",
]

BACKSPACE = 8
SPACE = 32
PERIOD = 190

# Per-user persistent speed multiplier: exp(sigma * N(0,1)).
USER_SPEED_SIGMA = 0.18

_INITIAL, _BURST, _WORD, _SENTENCE = 0, 1, 2, 3


@dataclass(frozen=True)
class LogNormalSpec:
    median_ms: float
    sigma: float

    def __post_init__(self) -> None:
        if self.median_ms <= 0 or self.sigma < 0:
            raise ValueError(f"invalid log-normal spec {self}")

    def sample(self, rng: np.random.Generator, n: int | None = None):
        return self.median_ms * np.exp(self.sigma * rng.standard_normal(n))


@dataclass(frozen=True)
class GenParams:
    within_burst_gap: LogNormalSpec
    word_gap: LogNormalSpec
    sentence_pause: LogNormalSpec
    initial_pause_ms: tuple[float, float]
    burst_len_chars: float
    revision_prob: float
    backspace_run: float
    hold_time_ms: LogNormalSpec
    chars_per_sequence: tuple[int, int]

    def __post_init__(self) -> None:
        if self.burst_len_chars <= 0 or self.backspace_run <= 0:
            raise ValueError("burst_len_chars and backspace_run must be positive")
        if not 0.0 <= self.revision_prob <= 1.0:
            raise ValueError(f"revision_prob {self.revision_prob} outside [0, 1]")
        lo, hi = self.chars_per_sequence
        if lo < 1 or hi < lo:
            raise ValueError(f"degenerate chars_per_sequence range {self.chars_per_sequence}")
        plo, phi = self.initial_pause_ms
        if plo < 0 or phi < plo:
            raise ValueError(f"degenerate initial_pause_ms range {self.initial_pause_ms}")


@dataclass(frozen=True)
class ConditionProfile:
    condition: Condition
    params: GenParams


def _parse_kv(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _params_from_kv(kv: dict[str, str], prefix: str) -> GenParams:
    def num(key: str) -> float:
        return float(kv[f"{prefix}.{key}"])

    def pair(key: str) -> tuple[float, float]:
        a, b = kv[f"{prefix}.{key}"].split()
        return float(a), float(b)

    def lognorm(key: str) -> LogNormalSpec:
        return LogNormalSpec(median_ms=num(f"{key}.median_ms"), sigma=num(f"{key}.sigma"))

    lo, hi = pair("chars_per_sequence")
    return GenParams(
        within_burst_gap=lognorm("within_burst_gap"),
        word_gap=lognorm("word_gap"),
        sentence_pause=lognorm("sentence_pause"),
        initial_pause_ms=pair("initial_pause_ms"),
        burst_len_chars=num("burst_len_chars"),
        revision_prob=num("revision_prob"),
        backspace_run=num("backspace_run"),
        hold_time_ms=lognorm("hold_time"),
        chars_per_sequence=(int(lo), int(hi)),
    )


def load_profiles(path: str | Path) -> dict[Condition, ConditionProfile]:
    """Read a flat key-value defaults file into per-condition profiles."""
    kv = _parse_kv(Path(path).read_text())
    bona = _params_from_kv(kv, "bonafide")
    assisted = _params_from_kv(kv, "assisted")
    return {
        Condition.BONA_FIDE: ConditionProfile(Condition.BONA_FIDE, bona),
        Condition.ASSISTED: ConditionProfile(Condition.ASSISTED, assisted),
    }


def default_profiles() -> dict[Condition, ConditionProfile]:
    """Packaged defaults; bona fide must pause longer at sentence boundaries
    and revise more often than assisted, or the file is rejected."""
    profiles = load_profiles(Path(__file__).parent / "data" / "synth_defaults.txt")
    bona = profiles[Condition.BONA_FIDE].params
    assisted = profiles[Condition.ASSISTED].params
    if not (
        bona.sentence_pause.median_ms > assisted.sentence_pause.median_ms
        and bona.revision_prob > assisted.revision_prob
    ):
        raise ValueError(
            "defaults file violates the profile contract: bona fide needs longer "
            "sentence pauses and a higher revision probability than assisted"
        )
    return profiles


def _build_intents(rng: np.random.Generator, p: GenParams, target: int):
    """Press intents as (keycode, gap-kind) streams covering >= target presses."""
    keycodes: list[int] = []
    kinds: list[int] = []
    burst_left = max(1, int(rng.geometric(1.0 / p.burst_len_chars)))
    pending: int | None = _INITIAL

    def push(code: int, kind: int | None = None) -> None:
        nonlocal pending, burst_left
        if kind is None:
            if pending is not None:
                kind, pending = pending, None
            else:
                burst_left -= 1
                if burst_left <= 0:
                    burst_left = max(1, int(rng.geometric(1.0 / p.burst_len_chars)))
                    kind = _WORD  # thinking pause between bursts
                else:
                    kind = _BURST
        keycodes.append(code)
        kinds.append(kind)

    while len(keycodes) < target:
        n_words = int(rng.integers(8, 15))
        for w in range(n_words):
            length = int(rng.integers(4, 10))
            for i, c in enumerate(rng.integers(65, 91, size=length)):
                if i == 0 and pending is None:
                    push(int(c), _WORD)
                else:
                    push(int(c))
            if rng.random() < p.revision_prob:
                run = min(length, max(1, int(rng.geometric(1.0 / p.backspace_run))))
                for _ in range(run):
                    push(BACKSPACE)
                for c in rng.integers(65, 91, size=run):
                    push(int(c))
            push(PERIOD if w == n_words - 1 else SPACE)
        if rng.random() < p.revision_prob:
            pending = _SENTENCE  # review jump lands after a long pause
            run = min(8, max(2, 2 * int(rng.geometric(1.0 / p.backspace_run))))
            for _ in range(run):
                push(BACKSPACE)
            for c in rng.integers(65, 91, size=run):
                push(int(c))
        pending = _SENTENCE
    return keycodes, kinds


def generate_sequence(
    profile: ConditionProfile,
    user_bias: float,
    seed,
    user_id: str = "synth000",
    session_id: str = "g0",
) -> KeySequence:
    """One synthetic sequence; identical (profile, user_bias, seed) always
    reproduce the same events.  ``user_bias`` scales every gap and hold."""
    if user_bias <= 0:
        raise ValueError(f"user_bias must be positive, got {user_bias}")
    p = profile.params
    rng = np.random.default_rng(seed)
    lo, hi = p.chars_per_sequence
    target = int(rng.integers(lo, hi + 1))
    keycodes, kinds = _build_intents(rng, p, target)
    n = len(keycodes)

    kinds_arr = np.asarray(kinds)
    gaps = np.empty(n)
    for kind in (_INITIAL, _BURST, _WORD, _SENTENCE):
        where = kinds_arr == kind
        count = int(where.sum())
        if count == 0:
            continue
        if kind == _INITIAL:
            vals = rng.uniform(p.initial_pause_ms[0], p.initial_pause_ms[1], count)
        elif kind == _BURST:
            vals = p.within_burst_gap.sample(rng, count)
        elif kind == _WORD:
            vals = p.word_gap.sample(rng, count)
        else:
            vals = p.sentence_pause.sample(rng, count)
        gaps[where] = vals
    holds = p.hold_time_ms.sample(rng, n)

    t_down = np.cumsum(gaps * user_bias) * 1000.0
    t_up = t_down + holds * user_bias * 1000.0
    times = np.round(np.concatenate([t_down, t_up])).astype(np.int64)
    codes = np.concatenate([keycodes, keycodes]).astype(np.int64)
    acts = np.concatenate([np.zeros(n, np.int64), np.ones(n, np.int64)])
    # Down_i precedes Up_i; ties in time resolve by emission order.
    emit_order = np.concatenate([2 * np.arange(n), 2 * np.arange(n) + 1])

    idx = np.lexsort((emit_order, times))
    t = times[idx]
    ar = np.arange(2 * n)
    t = np.maximum.accumulate(t - ar) + ar  # strictly increasing, order kept
    t -= t[0]  # stored relative to the first event

    meta = SequenceMeta(
        user_id=user_id,
        condition=profile.condition,
        dataset=DatasetTag.SYNTHETIC,
        session_id=session_id,
    )
    events = tuple(
        KeystrokeEvent(int(t[k]), int(codes[idx[k]]), Action(int(acts[idx[k]])))
        for k in range(2 * n)
    )
    return KeySequence(meta=meta, events=events)


def generate_corpus(
    n_users: int = 40,
    seqs_per_user_per_condition: int = 4,
    seed: int = 0,
    profiles: dict[Condition, ConditionProfile] | None = None,
) -> list[KeySequence]:
    """Balanced corpus: every user contributes the same number of sequences
    per condition, with a persistent per-user speed multiplier so users stay
    distinguishable."""
    if n_users < 2:
        raise ValueError(f"n_users must be >= 2, got {n_users}")
    if profiles is None:
        profiles = default_profiles()
    out: list[KeySequence] = []
    for u in range(n_users):
        bias_rng = np.random.default_rng([seed, u, 0xB1A5])
        bias = float(np.exp(USER_SPEED_SIGMA * bias_rng.standard_normal()))
        for condition, profile in sorted(profiles.items(), key=lambda kv: int(kv[0])):
            for k in range(seqs_per_user_per_condition):
                out.append(
                    generate_sequence(
                        profile,
                        bias,
                        seed=[seed, u, int(condition), k],
                        user_id=f"synth{u:03d}",
                        session_id=f"g{int(condition)}{k}",
                    )
                )
    return out
