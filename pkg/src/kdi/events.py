"""Canonical keystroke data model, parsing, and external-corpus adapters.

The canonical on-disk format is line-delimited text.  Each sequence starts
with a header line::

    kdi1 <user> <condition> <keyboard> <context> <dataset> <session> [load=<n>]

followed by one event per line::

    <timestamp_us> <keycode> <D|U>

Fields are single-space separated.  Timestamps are integer microseconds
relative to the first event of the sequence; keycodes are legacy byte-range
codes in [0, 255].  The optional trailing ``load=<n>`` header token carries
the cognitive-load level (1..6) when known, so serialization is lossless.
A stream may concatenate any number of sequences.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable

import numpy as np

__all__ = [
    "Action",
    "Condition",
    "Keyboard",
    "Context",
    "DatasetTag",
    "KeystrokeEvent",
    "SequenceMeta",
    "KeySequence",
    "ExternalFormat",
    "IngestReport",
    "CanonicalParseError",
    "IngestError",
    "parse_canonical",
    "write_canonical",
    "ingest_external",
]


class Action(IntEnum):
    DOWN = 0
    UP = 1


class Condition(IntEnum):
    """Ground-truth label: 0 bona fide, 1 assisted."""

    BONA_FIDE = 0
    ASSISTED = 1


class Keyboard(str, Enum):
    K0 = "K0"
    K1 = "K1"
    K2 = "K2"
    K3 = "K3"
    UNKNOWN = "Unknown"


class Context(str, Enum):
    GM = "GM"
    GC = "GC"
    RF = "RF"
    OPINION = "Opinion"
    FACT = "Fact"
    UNKNOWN = "Unknown"


class DatasetTag(str, Enum):
    S = "S"
    P = "P"
    B = "B"
    SYNTHETIC = "Synthetic"


class CanonicalParseError(ValueError):
    """Malformed canonical text; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class IngestError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class KeystrokeEvent:
    timestamp_us: int
    keycode: int
    action: Action

    def __post_init__(self) -> None:
        if not 0 <= self.keycode <= 255:
            raise ValueError(f"keycode {self.keycode} outside [0, 255]")
        if self.timestamp_us < 0:
            raise ValueError(f"negative timestamp {self.timestamp_us}")


@dataclass(frozen=True, slots=True)
class SequenceMeta:
    user_id: str
    condition: Condition
    dataset: DatasetTag
    session_id: str
    keyboard: Keyboard = Keyboard.UNKNOWN
    context: Context = Context.UNKNOWN
    cognitive_load: int | None = None

    def __post_init__(self) -> None:
        # Keyboard labels exist only in the Buffalo corpus; GM/GC/RF contexts
        # only in the SBU corpus.
        if self.keyboard != Keyboard.UNKNOWN and self.dataset != DatasetTag.B:
            raise ValueError(
                f"keyboard {self.keyboard.value} labeled on dataset {self.dataset.value}"
            )
        if self.context in (Context.GM, Context.GC, Context.RF) and self.dataset != DatasetTag.S:
            raise ValueError(
                f"context {self.context.value} labeled on dataset {self.dataset.value}"
            )
        if self.cognitive_load is not None and not 1 <= self.cognitive_load <= 6:
            raise ValueError(f"cognitive_load {self.cognitive_load} outside 1..6")
        for name in ("user_id", "session_id"):
            value = getattr(self, name)
            if not value or any(ch.isspace() for ch in value):
                raise ValueError(f"{name} must be non-empty and whitespace-free: {value!r}")


@dataclass(frozen=True)
class KeySequence:
    meta: SequenceMeta
    events: tuple[KeystrokeEvent, ...]

    def __post_init__(self) -> None:
        if not self.events:
            raise ValueError("sequence has no events")
        object.__setattr__(self, "events", tuple(self.events))
        ts = [e.timestamp_us for e in self.events]
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps not nondecreasing")

    def __len__(self) -> int:
        return len(self.events)

    def to_array(self) -> np.ndarray:
        """Events as an int64 array of shape (n, 3): timestamp, keycode, action."""
        return np.array(
            [(e.timestamp_us, e.keycode, int(e.action)) for e in self.events],
            dtype=np.int64,
        )


# ---------------------------------------------------------------------------
# Canonical format
# ---------------------------------------------------------------------------

_MAGIC = "kdi1"
_ACTION_CODE = {Action.DOWN: "D", Action.UP: "U"}
_CODE_ACTION = {"D": Action.DOWN, "U": Action.UP}


def _meta_to_header(meta: SequenceMeta) -> str:
    parts = [
        _MAGIC,
        meta.user_id,
        str(int(meta.condition)),
        meta.keyboard.value,
        meta.context.value,
        meta.dataset.value,
        meta.session_id,
    ]
    if meta.cognitive_load is not None:
        parts.append(f"load={meta.cognitive_load}")
    return " ".join(parts)


def _header_to_meta(tokens: list[str], line_no: int) -> SequenceMeta:
    if len(tokens) not in (7, 8):
        raise CanonicalParseError(line_no, f"header has {len(tokens)} tokens, expected 7 or 8")
    load: int | None = None
    if len(tokens) == 8:
        if not tokens[7].startswith("load="):
            raise CanonicalParseError(line_no, f"unrecognized header token {tokens[7]!r}")
        try:
            load = int(tokens[7][5:])
        except ValueError:
            raise CanonicalParseError(line_no, f"bad cognitive load {tokens[7]!r}") from None
    try:
        return SequenceMeta(
            user_id=tokens[1],
            condition=Condition(int(tokens[2])),
            keyboard=Keyboard(tokens[3]),
            context=Context(tokens[4]),
            dataset=DatasetTag(tokens[5]),
            session_id=tokens[6],
            cognitive_load=load,
        )
    except ValueError as exc:
        raise CanonicalParseError(line_no, f"bad header: {exc}") from None


def parse_canonical(
    data: bytes | str,
    diagnostics: list[str] | None = None,
) -> list[KeySequence]:
    """Parse canonical text into sequences.

    Malformed lines raise :class:`CanonicalParseError` with the line number.
    Sequences that violate invariants (non-monotonic timestamps, zero events)
    are skipped; a message naming the sequence is appended to ``diagnostics``
    when a list is supplied, otherwise emitted as a warning.
    """
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data

    sequences: list[KeySequence] = []
    rejected: list[str] = []
    meta: SequenceMeta | None = None
    events: list[KeystrokeEvent] = []
    header_line = 0

    def flush() -> None:
        nonlocal meta, events
        if meta is None:
            return
        name = f"{meta.dataset.value}:{meta.user_id}:{meta.session_id} (header line {header_line})"
        try:
            sequences.append(KeySequence(meta=meta, events=tuple(events)))
        except ValueError as exc:
            rejected.append(f"sequence {name} rejected: {exc}")
        meta = None
        events = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split(" ")
        if tokens[0] == _MAGIC:
            flush()
            meta = _header_to_meta(tokens, line_no)
            header_line = line_no
            continue
        if meta is None:
            raise CanonicalParseError(line_no, "event line before any header")
        if len(tokens) != 3:
            raise CanonicalParseError(line_no, f"event line has {len(tokens)} tokens, expected 3")
        try:
            ts = int(tokens[0])
            keycode = int(tokens[1])
        except ValueError:
            raise CanonicalParseError(line_no, f"non-integer field in {line!r}") from None
        if ts < 0:
            raise CanonicalParseError(line_no, f"negative timestamp {ts}")
        if not 0 <= keycode <= 255:
            raise CanonicalParseError(line_no, f"keycode {keycode} outside [0, 255]")
        action = _CODE_ACTION.get(tokens[2])
        if action is None:
            raise CanonicalParseError(line_no, f"bad action {tokens[2]!r}, expected D or U")
        events.append(KeystrokeEvent(ts, keycode, action))
    flush()

    for msg in rejected:
        if diagnostics is not None:
            diagnostics.append(msg)
        else:
            warnings.warn(msg, stacklevel=2)
    return sequences


def write_canonical(seqs: Iterable[KeySequence]) -> bytes:
    """Serialize sequences; ``parse_canonical(write_canonical(x)) == x``."""
    lines: list[str] = []
    for seq in seqs:
        lines.append(_meta_to_header(seq.meta))
        for e in seq.events:
            lines.append(f"{e.timestamp_us} {e.keycode} {_ACTION_CODE[e.action]}")
    if not lines:
        return b""
    return ("\n".join(lines) + "\n").encode("utf-8")


# ---------------------------------------------------------------------------
# External-corpus adapters
# ---------------------------------------------------------------------------


class ExternalFormat(str, Enum):
    BUFFALO_RAW = "buffalo-raw"
    SBU_RAW = "sbu-raw"


@dataclass
class IngestReport:
    """Counters accumulated while ingesting external files."""

    sequences_kept: int = 0
    sequences_rejected: list[str] = field(default_factory=list)
    keycodes_clamped: int = 0
    keys_unmapped: int = 0


# Default timestamp units per external format; both corpora record
# millisecond clocks.  Override with units="us" when a source deviates.
_DEFAULT_UNITS = {ExternalFormat.BUFFALO_RAW: "ms", ExternalFormat.SBU_RAW: "ms"}

# Buffalo-style files use .NET-style key names.  Single characters fall back
# to their upper-case code point; anything else unmappable becomes keycode 0
# and bumps the unmapped counter.
_BUFFALO_KEYMAP: dict[str, int] = {
    "space": 32,
    "back": 8,
    "backspace": 8,
    "tab": 9,
    "return": 13,
    "enter": 13,
    "shift": 16,
    "shiftkey": 16,
    "lshiftkey": 16,
    "rshiftkey": 16,
    "ctrl": 17,
    "controlkey": 17,
    "lcontrolkey": 17,
    "rcontrolkey": 17,
    "alt": 18,
    "menu": 18,
    "lmenu": 18,
    "rmenu": 18,
    "capital": 20,
    "capslock": 20,
    "escape": 27,
    "end": 35,
    "home": 36,
    "left": 37,
    "up": 38,
    "right": 39,
    "down": 40,
    "delete": 46,
    "oemsemicolon": 186,
    "oem1": 186,
    "oemplus": 187,
    "oemcomma": 188,
    "oemminus": 189,
    "oemperiod": 190,
    "oemquestion": 191,
    "oem2": 191,
    "oemtilde": 192,
    "oem3": 192,
    "oemopenbrackets": 219,
    "oem5": 220,
    "oempipe": 220,
    "oem6": 221,
    "oemquotes": 222,
    "oem7": 222,
}

_ACTION_TOKENS = {
    "keydown": Action.DOWN,
    "down": Action.DOWN,
    "d": Action.DOWN,
    "0": Action.DOWN,
    "keyup": Action.UP,
    "up": Action.UP,
    "u": Action.UP,
    "1": Action.UP,
}


def _clamp_keycode(code: int, report: IngestReport) -> int:
    if 0 <= code <= 255:
        return code
    report.keycodes_clamped += 1
    return min(max(code, 0), 255)


def _buffalo_keycode(symbol: str, report: IngestReport) -> int:
    name = symbol.lower()
    if name in _BUFFALO_KEYMAP:
        return _BUFFALO_KEYMAP[name]
    if len(symbol) == 1:
        return _clamp_keycode(ord(symbol.upper()), report)
    if name.startswith("d") and len(name) == 2 and name[1].isdigit():
        return 48 + int(name[1])
    report.keys_unmapped += 1
    return 0


def _to_us(value: float, units: str) -> int:
    if units == "ms":
        return int(round(value * 1000.0))
    if units == "us":
        return int(round(value))
    raise IngestError(f"unknown timestamp units {units!r}, expected 'ms' or 'us'")


def _rebase(rows: list[tuple[int, int, Action]]) -> list[KeystrokeEvent]:
    origin = rows[0][0]
    return [KeystrokeEvent(t - origin, k, a) for t, k, a in rows]


def _finish_sequence(
    meta: SequenceMeta,
    rows: list[tuple[int, int, Action]],
    name: str,
    out: list[KeySequence],
    report: IngestReport,
) -> None:
    if not rows:
        return
    rows = sorted(rows, key=lambda r: r[0])
    try:
        out.append(KeySequence(meta=meta, events=tuple(_rebase(rows))))
        report.sequences_kept += 1
    except ValueError as exc:
        report.sequences_rejected.append(f"{name}: {exc}")


def _ingest_buffalo(path: Path, units: str, report: IngestReport) -> list[KeySequence]:
    """One file is one typing session.

    Expected file naming: underscore-separated tokens in the stem, e.g.
    ``u012_s1_k2_free.txt``.  First token is the user id; a ``k0``..``k3``
    token sets the keyboard; ``free`` marks bona fide typing and ``fixed``
    marks transcription (the assisted analogue).  A session token ``s<n>``
    is used when present, else the whole stem.  Rows are
    ``<key> <timestamp> <KeyDown|KeyUp>``.
    """
    tokens = path.stem.split("_")
    user = tokens[0]
    keyboard = Keyboard.UNKNOWN
    condition: Condition | None = None
    session = path.stem
    for tok in tokens[1:]:
        low = tok.lower()
        if low in ("k0", "k1", "k2", "k3"):
            keyboard = Keyboard(low.upper())
        elif low == "free":
            condition = Condition.BONA_FIDE
        elif low == "fixed":
            condition = Condition.ASSISTED
        elif low.startswith("s") and low[1:].isdigit():
            session = low
    if condition is None:
        raise IngestError(
            f"{path.name}: cannot determine condition; expected a 'free' or 'fixed' "
            "token in the file name (labels are ground truth, so no default is taken)"
        )

    meta = SequenceMeta(
        user_id=user,
        condition=condition,
        dataset=DatasetTag.B,
        session_id=session,
        keyboard=keyboard,
    )
    rows: list[tuple[int, int, Action]] = []
    for line_no, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise IngestError(f"{path.name}:{line_no}: expected 3 columns, got {len(parts)}")
        action = _ACTION_TOKENS.get(parts[2].lower())
        if action is None:
            raise IngestError(f"{path.name}:{line_no}: bad action {parts[2]!r}")
        try:
            ts = _to_us(float(parts[1]), units)
        except ValueError:
            raise IngestError(f"{path.name}:{line_no}: bad timestamp {parts[1]!r}") from None
        rows.append((ts, _buffalo_keycode(parts[0], report), action))

    out: list[KeySequence] = []
    _finish_sequence(meta, rows, path.name, out, report)
    return out


_SBU_COLUMNS = ["user_id", "session_id", "context", "condition", "timestamp", "keycode", "action"]


def _ingest_sbu(path: Path, units: str, report: IngestReport) -> list[KeySequence]:
    """CSV with header ``user_id,session_id,context,condition,timestamp,keycode,action``.

    Context tokens are GM, GC, or RF; condition is 0 (bona fide, free typing)
    or 1 (assisted, retyped); action accepts D/U, Down/Up, KeyDown/KeyUp, 0/1.
    Rows sharing (user_id, session_id, context, condition) form one sequence,
    in file order, with timestamps rebased to the first event.
    """
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = [c for c in _SBU_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise IngestError(f"{path.name}: missing columns {missing}")

        groups: dict[tuple[str, str, str, str], list[tuple[int, int, Action]]] = {}
        order: list[tuple[str, str, str, str]] = []
        for row_no, row in enumerate(reader, start=2):
            key = (row["user_id"], row["session_id"], row["context"], row["condition"])
            if key not in groups:
                groups[key] = []
                order.append(key)
            action = _ACTION_TOKENS.get(row["action"].strip().lower())
            if action is None:
                raise IngestError(f"{path.name}:{row_no}: bad action {row['action']!r}")
            try:
                ts = _to_us(float(row["timestamp"]), units)
                code = _clamp_keycode(int(row["keycode"]), report)
            except ValueError:
                raise IngestError(f"{path.name}:{row_no}: bad numeric field") from None
            groups[key].append((ts, code, action))

    out: list[KeySequence] = []
    for user, session, context, condition in order:
        try:
            ctx = Context(context)
        except ValueError:
            ctx = Context.UNKNOWN
        try:
            cond = Condition(int(condition))
        except ValueError:
            raise IngestError(f"{path.name}: bad condition {condition!r}") from None
        meta = SequenceMeta(
            user_id=user,
            condition=cond,
            dataset=DatasetTag.S,
            session_id=session,
            context=ctx,
        )
        name = f"{path.name}[{user}/{session}/{context}/{condition}]"
        _finish_sequence(meta, groups[(user, session, context, condition)], name, out, report)
    return out


def ingest_external(
    path: str | Path,
    format: ExternalFormat | str,
    units: str | None = None,
    report: IngestReport | None = None,
) -> list[KeySequence]:
    """Map one external corpus file to canonical sequences.

    ``units`` selects the source timestamp resolution ("ms" or "us"); when
    omitted, the documented per-format default (milliseconds) applies.
    Counters accumulate into ``report`` when supplied.
    """
    fmt = ExternalFormat(format)
    path = Path(path)
    if not path.is_file():
        raise IngestError(f"unreadable file: {path}")
    if report is None:
        report = IngestReport()
    resolved_units = units or _DEFAULT_UNITS[fmt]
    if fmt == ExternalFormat.BUFFALO_RAW:
        return _ingest_buffalo(path, resolved_units, report)
    return _ingest_sbu(path, resolved_units, report)


def rebase_sequence(seq: KeySequence) -> KeySequence:
    """Shift timestamps so the first event sits at 0 microseconds."""
    origin = seq.events[0].timestamp_us
    if origin == 0:
        return seq
    return replace(
        seq,
        events=tuple(
            KeystrokeEvent(e.timestamp_us - origin, e.keycode, e.action) for e in seq.events
        ),
    )
