"""
Loading of performances, score continuo lines and note alignments.

A dataset is described by a JSON manifest listing the scores (with their
continuo-line notes) and the performances, each one a Standard MIDI File
plus an alignment CSV mapping performance notes to score notes.
"""

from __future__ import annotations

import bisect
import csv
import hashlib
import io
import json
import logging
import struct
import warnings
from collections import Counter, defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

logger = logging.getLogger(__name__)

ALIGNMENT_HEADER = ("perf_note_id", "score_note_id")


class IngestError(ValueError):
    """Raised for any invalid input file or manifest entry."""


class MidiParseError(IngestError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class UnclosedNoteWarning(UserWarning):
    """A note-on had no matching note-off and was closed at end of track."""


@dataclass(frozen=True)
class PerformanceNote:
    note_id: str
    onset: float
    offset: float
    pitch: int
    velocity: int = 64

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise IngestError(f"pitch {self.pitch} out of MIDI range")
        if self.onset < 0 or self.offset <= self.onset:
            raise IngestError(
                f"note {self.note_id}: invalid times onset={self.onset} offset={self.offset}")


@dataclass(frozen=True)
class ScoreNote:
    score_note_id: str
    ordinal: int
    pitch: int
    spelling: str | None = None


@dataclass(frozen=True)
class Alignment:
    pairs: tuple[tuple[str, str], ...]
    insertions: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)


@dataclass(frozen=True)
class Performance:
    score: str
    player: str
    take: str
    notes: tuple[PerformanceNote, ...]
    alignment: Alignment

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.score, self.player, self.take)


@dataclass(frozen=True)
class Dataset:
    scores: Mapping[str, tuple[ScoreNote, ...]]
    performances: Mapping[tuple[str, str, str], Performance]
    checksums: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "scores", MappingProxyType(dict(self.scores)))
        object.__setattr__(
            self, "performances", MappingProxyType(dict(sorted(self.performances.items()))))
        object.__setattr__(self, "checksums", MappingProxyType(dict(self.checksums)))

    def __len__(self):
        return len(self.performances)

    @property
    def players(self) -> list[str]:
        return sorted({k[1] for k in self.performances})

    def for_score(self, score: str) -> list[Performance]:
        if score not in self.scores:
            raise IngestError(f"unknown score {score!r}")
        return [p for k, p in self.performances.items() if k[0] == score]

    def counts(self) -> dict[tuple[str, str], int]:
        """Number of performances per (score, player)."""
        return dict(sorted(Counter(k[:2] for k in self.performances).items()))


# --------------------------------------------------------------------------
# MIDI

def _read_varlen(data: bytes, pos: int, end: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= end:
            raise MidiParseError("truncated variable-length quantity", pos)
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise MidiParseError("variable-length quantity longer than 4 bytes", pos)


def _parse_track(data: bytes, pos: int, end: int):
    """Yield (tick, kind, payload) for one MTrk chunk body."""
    tick = 0
    status = None
    while pos < end:
        delta, pos = _read_varlen(data, pos, end)
        tick += delta
        if pos >= end:
            raise MidiParseError("event missing after delta time", pos)
        byte = data[pos]
        if byte == 0xFF:
            if pos + 2 > end:
                raise MidiParseError("truncated meta event", pos)
            meta_type = data[pos + 1]
            length, pos = _read_varlen(data, pos + 2, end)
            if pos + length > end:
                raise MidiParseError("meta event overruns track", pos)
            body = data[pos:pos + length]
            pos += length
            if meta_type == 0x51:
                if length != 3:
                    raise MidiParseError("set-tempo event with bad length", pos - length)
                yield tick, "tempo", int.from_bytes(body, "big")
            elif meta_type == 0x2F:
                yield tick, "end", None
                return
            continue
        if byte in (0xF0, 0xF7):
            length, pos = _read_varlen(data, pos + 1, end)
            pos += length
            if pos > end:
                raise MidiParseError("sysex event overruns track", pos)
            status = None
            continue
        if byte & 0x80:
            status = byte
            pos += 1
        elif status is None:
            raise MidiParseError("data byte without running status", pos)
        kind = status & 0xF0
        if kind == 0xF0:
            raise MidiParseError(f"unsupported system message 0x{status:02X}", pos - 1)
        n_data = 1 if kind in (0xC0, 0xD0) else 2
        if pos + n_data > end:
            raise MidiParseError("truncated channel message", pos)
        params = data[pos:pos + n_data]
        pos += n_data
        channel = status & 0x0F
        if kind == 0x90 and params[1] > 0:
            yield tick, "on", (channel, params[0], params[1])
        elif kind == 0x80 or kind == 0x90:
            yield tick, "off", (channel, params[0])
    yield tick, "end", None


class _TempoMap:
    """Piecewise-linear tick to millisecond conversion."""

    def __init__(self, division: int, tempo_events: Iterable[tuple[int, int]]):
        self.smpte = division & 0x8000
        if self.smpte:
            fps = 256 - (division >> 8)
            ticks_per_frame = division & 0xFF
            self.ms_per_tick_fixed = 1000.0 / (fps * ticks_per_frame)
            return
        self.ppq = division
        ticks, ms, tempos = [0], [0.0], [500000]
        for tick, tempo in sorted(tempo_events, key=lambda e: e[0]):
            last_tick = ticks[-1]
            if tick == last_tick:
                tempos[-1] = tempo
                continue
            ms.append(ms[-1] + (tick - last_tick) * tempos[-1] / (1000.0 * division))
            ticks.append(tick)
            tempos.append(tempo)
        self.ticks, self.ms, self.tempos = ticks, ms, tempos

    def __call__(self, tick: int) -> float:
        if self.smpte:
            return tick * self.ms_per_tick_fixed
        lo = bisect.bisect_right(self.ticks, tick) - 1
        return self.ms[lo] + (tick - self.ticks[lo]) * self.tempos[lo] / (1000.0 * self.ppq)


def parse_midi(data: bytes) -> list[PerformanceNote]:
    """Read note events from a Standard MIDI File (format 0 or 1).

    Note-ons are paired with note-offs per channel and pitch in FIFO order.
    Notes are returned sorted by onset, then pitch, with ids ``p0, p1, ...``
    in that order. Times are milliseconds under the file's full tempo map.
    """
    if len(data) < 14 or data[:4] != b"MThd":
        raise MidiParseError("missing MThd header", 0)
    header_len = struct.unpack(">I", data[4:8])[0]
    if header_len < 6 or 8 + header_len > len(data):
        raise MidiParseError("bad header length", 4)
    fmt, n_tracks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise MidiParseError(f"unsupported MIDI format {fmt}", 8)
    if division == 0:
        raise MidiParseError("zero time division", 12)

    pos = 8 + header_len
    tracks = []
    while pos < len(data) and len(tracks) < n_tracks:
        if pos + 8 > len(data):
            raise MidiParseError("truncated chunk header", pos)
        chunk_type = data[pos:pos + 4]
        length = struct.unpack(">I", data[pos + 4:pos + 8])[0]
        body = pos + 8
        if body + length > len(data):
            raise MidiParseError("chunk overruns file", pos)
        if chunk_type == b"MTrk":
            tracks.append(list(_parse_track(data, body, body + length)))
        pos = body + length
    if len(tracks) != n_tracks:
        raise MidiParseError(f"header declares {n_tracks} tracks, found {len(tracks)}", pos)

    tempo_map = _TempoMap(
        division, [(t, v) for events in tracks for t, k, v in events if k == "tempo"])

    raw = []
    for events in tracks:
        open_notes: dict[tuple[int, int], deque] = defaultdict(deque)
        end_tick = 0
        for tick, kind, payload in events:
            end_tick = tick
            if kind == "on":
                channel, pitch, velocity = payload
                open_notes[channel, pitch].append((tick, velocity))
            elif kind == "off":
                pending = open_notes.get(payload)
                if pending:
                    start, velocity = pending.popleft()
                    raw.append((start, tick, payload[1], velocity))
        for (channel, pitch), pending in open_notes.items():
            for start, velocity in pending:
                warnings.warn(
                    f"note-on pitch {pitch} channel {channel} at tick {start} "
                    "has no note-off; closed at end of track", UnclosedNoteWarning)
                raw.append((start, end_tick, pitch, velocity))

    timed = []
    for start, stop, pitch, velocity in raw:
        onset, offset = tempo_map(start), tempo_map(stop)
        if offset <= onset:
            logger.warning("dropping zero-length note pitch %d at %.3f ms", pitch, onset)
            continue
        timed.append((onset, pitch, offset, velocity))
    timed.sort()
    return [PerformanceNote(f"p{i}", on, off, pitch, vel)
            for i, (on, pitch, off, vel) in enumerate(timed)]


# --------------------------------------------------------------------------
# alignments

def parse_alignment(text: str) -> Alignment:
    """Parse the ``perf_note_id,score_note_id`` alignment CSV.

    An empty score-note field marks the performance note as an insertion.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise IngestError("alignment file is empty") from None
    header = [h.strip() for h in header]
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    unknown = [h for h in header if h not in ALIGNMENT_HEADER]
    if unknown:
        raise IngestError(f"unknown alignment column(s): {', '.join(unknown)}")
    if tuple(header) != ALIGNMENT_HEADER:
        raise IngestError(f"alignment header must be {','.join(ALIGNMENT_HEADER)}")

    pairs, insertions, seen = [], [], set()
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise IngestError(f"line {line_no}: expected 2 fields, got {len(row)}")
        perf_id, score_id = row[0].strip(), row[1].strip()
        if not perf_id:
            raise IngestError(f"line {line_no}: empty performance note id")
        if perf_id in seen:
            raise IngestError(f"line {line_no}: performance note {perf_id} aligned more than once")
        seen.add(perf_id)
        if score_id:
            pairs.append((perf_id, score_id))
        else:
            insertions.append(perf_id)
    return Alignment(tuple(pairs), tuple(insertions))


def format_alignment(alignment: Alignment) -> str:
    lines = [",".join(ALIGNMENT_HEADER)]
    rows = list(alignment.pairs) + [(p, "") for p in alignment.insertions]
    rows.sort(key=lambda r: (int(r[0][1:]) if r[0][1:].isdigit() else r[0], r[0]))
    lines += [f"{p},{s}" for p, s in rows]
    return "\n".join(lines) + "\n"


def alignment_from_records(records: Iterable[Mapping[str, str]]) -> Alignment:
    """Convert match/insertion/deletion records to an :class:`Alignment`.

    This is the adapter boundary for alignments produced elsewhere. Records
    use the common ``{"label", "score_id", "performance_id"}`` layout;
    deletions carry no performance note and are implied by the score.
    """
    pairs, insertions = [], []
    for rec in records:
        label = rec.get("label")
        if label == "match":
            pairs.append((str(rec["performance_id"]), str(rec["score_id"])))
        elif label == "insertion":
            insertions.append(str(rec["performance_id"]))
        elif label != "deletion":
            raise IngestError(f"unknown alignment record label {label!r}")
    ids = [p for p, _ in pairs] + insertions
    dupes = sorted(p for p, c in Counter(ids).items() if c > 1)
    if dupes:
        raise IngestError(f"performance note(s) aligned more than once: {', '.join(dupes)}")
    return Alignment(tuple(pairs), tuple(insertions))


# --------------------------------------------------------------------------
# dataset

def _validate_score(name: str, notes: Sequence[ScoreNote]) -> tuple[ScoreNote, ...]:
    notes = tuple(sorted(notes, key=lambda n: n.ordinal))
    if [n.ordinal for n in notes] != list(range(len(notes))):
        raise IngestError(f"score {name}: ordinals must be consecutive from 0")
    ids = Counter(n.score_note_id for n in notes)
    dupes = [i for i, c in ids.items() if c > 1]
    if dupes:
        raise IngestError(f"score {name}: duplicate note id {dupes[0]}")
    return notes


def make_performance(score: str, player: str, take: str,
                     notes: Sequence[PerformanceNote], alignment: Alignment,
                     score_notes: Sequence[ScoreNote]) -> Performance:
    """Validate an alignment against its notes and score, and bundle them.

    Performance notes that the alignment does not mention are recorded as
    insertions so that aligned notes and insertions partition the notes.
    """
    label = f"{score}/{player}/{take}"
    if not player or not take:
        raise IngestError(f"{label}: player and take must be non-empty")
    note_ids = {n.note_id for n in notes}
    if len(note_ids) != len(notes):
        raise IngestError(f"{label}: duplicate performance note ids")
    score_ids = {n.score_note_id for n in score_notes}
    for perf_id, score_id in alignment.pairs:
        if score_id not in score_ids:
            raise IngestError(f"{label}: unknown score note {score_id}")
        if perf_id not in note_ids:
            raise IngestError(f"{label}: unknown performance note {perf_id}")
    for perf_id in alignment.insertions:
        if perf_id not in note_ids:
            raise IngestError(f"{label}: unknown performance note {perf_id}")
    mentioned = {p for p, _ in alignment.pairs} | set(alignment.insertions)
    missing = [n.note_id for n in notes if n.note_id not in mentioned]
    if missing:
        logger.info("%s: %d unaligned notes recorded as insertions", label, len(missing))
        alignment = Alignment(alignment.pairs, alignment.insertions + tuple(missing))
    return Performance(score, player, take, tuple(notes), alignment)


def _score_from_manifest(entry: Mapping) -> tuple[str, tuple[ScoreNote, ...]]:
    try:
        name = str(entry["name"])
        notes = [ScoreNote(str(n["id"]), int(n["ordinal"]), int(n["midi_pitch"]),
                           n.get("spelling"))
                 for n in entry["notes"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"malformed score entry: {exc!r}") from exc
    return name, _validate_score(name, notes)


def load_dataset(manifest: str | Path | Mapping, base_dir: str | Path | None = None) -> Dataset:
    """Load and validate every file referenced by a dataset manifest.

    ``manifest`` is a path to the JSON manifest or the already-decoded
    object. Relative file paths resolve against the manifest's directory
    (or ``base_dir``).
    """
    checksums = {}
    if isinstance(manifest, (str, Path)):
        path = Path(manifest)
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise IngestError(f"cannot read manifest {path}: {exc.strerror}") from exc
        checksums[path.name] = hashlib.sha256(raw).hexdigest()
        try:
            manifest = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise IngestError(f"manifest {path} is not valid JSON: {exc}") from exc
        base = Path(base_dir) if base_dir is not None else path.parent
    else:
        base = Path(base_dir) if base_dir is not None else Path.cwd()

    scores = {}
    for entry in manifest.get("scores", []):
        name, notes = _score_from_manifest(entry)
        if name in scores:
            raise IngestError(f"duplicate score {name}")
        scores[name] = notes

    def read(rel: str) -> bytes:
        file = base / rel
        try:
            content = file.read_bytes()
        except OSError:
            raise IngestError(f"missing file {rel}") from None
        checksums[str(rel)] = hashlib.sha256(content).hexdigest()
        return content

    performances = {}
    for entry in manifest.get("performances", []):
        try:
            score, player, take = str(entry["score"]), str(entry["player"]), str(entry["take"])
            midi_path, align_path = entry["midi_path"], entry["alignment_path"]
        except KeyError as exc:
            raise IngestError(f"performance entry missing field {exc}") from None
        label = f"{score}/{player}/{take}"
        if score not in scores:
            raise IngestError(f"{label}: unknown score {score}")
        key = (score, player, take)
        if key in performances:
            raise IngestError(f"{label}: label collision")
        try:
            notes = parse_midi(read(midi_path))
            alignment = parse_alignment(read(align_path).decode("utf-8"))
        except IngestError as exc:
            raise IngestError(f"{label}: {exc}") from exc
        performances[key] = make_performance(score, player, take, notes, alignment, scores[score])

    dataset = Dataset(scores, performances, dict(sorted(checksums.items())))
    for (score, player), n in dataset.counts().items():
        logger.info("loaded %d performance(s) of %s by %s", n, score, player)
    return dataset
