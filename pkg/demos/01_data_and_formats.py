"""Events, the canonical text format, and external-corpus ingestion.

Builds a tiny sequence by hand, round-trips it through the canonical
serializer, and ingests the committed Buffalo-style fixture to show how an
external layout maps onto the data model.
"""

from pathlib import Path

from kdi import (
    Action,
    Condition,
    DatasetTag,
    KeySequence,
    KeystrokeEvent,
    SequenceMeta,
    parse_canonical,
    write_canonical,
)
from kdi.events import ExternalFormat, IngestReport, ingest_external

# --- a sequence from scratch ------------------------------------------------

meta = SequenceMeta(
    user_id="demo",
    condition=Condition.BONA_FIDE,
    dataset=DatasetTag.SYNTHETIC,
    session_id="s1",
)
seq = KeySequence(
    meta=meta,
    events=(
        KeystrokeEvent(0, 72, Action.DOWN),        # H down
        KeystrokeEvent(88_000, 72, Action.UP),     # H up after an 88 ms hold
        KeystrokeEvent(241_000, 73, Action.DOWN),  # I down
        KeystrokeEvent(322_000, 73, Action.UP),
    ),
)

blob = write_canonical([seq])
print("canonical serialization:")
print(blob.decode(), end="")

round_tripped = parse_canonical(blob)
print("round-trip identical:", round_tripped == [seq])

# --- ingesting an external layout --------------------------------------------

fixture = Path(__file__).parent.parent / "tests" / "fixtures" / "buffalo_raw"
report = IngestReport()
sequences = ingest_external(
    fixture / "u012_s1_k2_free.txt", ExternalFormat.BUFFALO_RAW, report=report
)
print(f"\ningested {report.sequences_kept} Buffalo-style session(s):")
for s in sequences:
    print(
        f"  user={s.meta.user_id} keyboard={s.meta.keyboard.value} "
        f"condition={s.meta.condition.name} events={len(s.events)}"
    )
    for e in s.events[:4]:
        print(f"    {e.timestamp_us:>8} us  keycode {e.keycode:>3}  {e.action.name}")
print(f"  unmapped keys: {report.keys_unmapped}, clamped keycodes: {report.keycodes_clamped}")
