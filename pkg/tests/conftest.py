import struct

import pytest

from griffstyle.ingest import Alignment, PerformanceNote, ScoreNote
from griffstyle.synth import SynthConfig, generate


def varlen(value):
    out = [value & 0x7F]
    value >>= 7
    while value:
        out.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(out))


def smf(tracks, division=480, fmt=None):
    """Assemble a Standard MIDI File from lists of (delta, event-bytes)."""
    if fmt is None:
        fmt = 0 if len(tracks) == 1 else 1
    data = b"MThd" + struct.pack(">IHHH", 6, fmt, len(tracks), division)
    for events in tracks:
        body = b"".join(varlen(d) + e for d, e in events)
        data += b"MTrk" + struct.pack(">I", len(body)) + body
    return data


def tempo(us_per_quarter):
    return b"\xff\x51\x03" + us_per_quarter.to_bytes(3, "big")


END = b"\xff\x2f\x00"


def on(pitch, vel=64, ch=0):
    return bytes([0x90 | ch, pitch, vel])


def off(pitch, ch=0):
    return bytes([0x80 | ch, pitch, 0])


def notes_at(spec):
    """PerformanceNotes from (onset_ms, pitch) pairs, ids in sorted order."""
    ordered = sorted(spec)
    return [PerformanceNote(f"p{i}", float(t), float(t) + 100.0, p) for i, (t, p) in enumerate(ordered)]


def simple_score(pitches, name_step=1):
    return [ScoreNote(f"n{i * name_step}", i, p) for i, p in enumerate(pitches)]


def align_all(notes, score_ids):
    return Alignment(tuple((n.note_id, s) for n, s in zip(notes, score_ids)))


@pytest.fixture(scope="session")
def separable_corpus():
    return generate(SynthConfig(players=7, takes=5, score_length=20, overlap=0.0,
                                jitter_ms=5.0, deletion_prob=0.02, seed=11))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line for the terminal summary, then assert."""
    def check(label, ok, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())
        print(ACCEPTANCE_LINES[-1])
        assert ok, f"{label}: {detail}"
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
