"""
Griff extraction.

A griff describes what a player did above one score (bass) note: the
aligned performance notes are cut into onset windows, each window becomes a
vector of intervals from the bass pitch, and the vectors are written as
a string, e.g. ``"0_16_19|24"``. Consecutive griffs joined by ``#`` form
griff n-grams.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .ingest import Alignment, Dataset, Performance, PerformanceNote, ScoreNote

DEFAULT_WINDOW_MS = 35.0

INTERVAL_SEP = "_"
VECTOR_SEP = "|"
NGRAM_SEP = "#"

Griff = tuple[tuple[int, ...], ...]
EMPTY: Griff = ()

_TOKEN_RE = re.compile(r"-?\d+(?:_-?\d+)*(?:\|-?\d+(?:_-?\d+)*)*")


@dataclass(frozen=True)
class GriffSequence:
    """Griffs of one performance, one per score-note ordinal."""

    griffs: tuple[Griff, ...]
    window_ms: float
    source: tuple[str, str, str] = ("", "", "")

    @property
    def tokens(self) -> list[str]:
        return [encode(g) for g in self.griffs]

    def __len__(self):
        return len(self.griffs)


def group_by_score_note(notes: Sequence[PerformanceNote], alignment: Alignment,
                        score: Sequence[ScoreNote]) -> dict[int, list[PerformanceNote]]:
    ordinal_of = {n.score_note_id: n.ordinal for n in score}
    groups: dict[int, list[PerformanceNote]] = {n.ordinal: [] for n in score}
    target = alignment.as_dict()
    for note in notes:
        score_id = target.get(note.note_id)
        if score_id is not None:
            groups[ordinal_of[score_id]].append(note)
    return groups


def segment_windows(notes: Sequence[PerformanceNote], window_ms: float) -> list[list[PerformanceNote]]:
    """Split notes into onset windows anchored at the first note of each.

    A note joins the current group while its onset is strictly less than
    the anchor onset plus ``window_ms``; otherwise it anchors a new group.
    """
    if not window_ms > 0:
        raise ValueError(f"window_ms must be positive, got {window_ms}")
    ordered = sorted(notes, key=lambda n: (n.onset, n.pitch))
    groups: list[list[PerformanceNote]] = []
    anchor = None
    for note in ordered:
        if anchor is None or note.onset >= anchor + window_ms:
            groups.append([])
            anchor = note.onset
        groups[-1].append(note)
    return groups


def to_griff(groups: Iterable[Sequence[PerformanceNote]], bass_pitch: int,
             keep_duplicates: bool = False) -> Griff:
    vectors = []
    for group in groups:
        intervals = [n.pitch - bass_pitch for n in group]
        if not keep_duplicates:
            intervals = set(intervals)
        if intervals:
            vectors.append(tuple(sorted(intervals)))
    return tuple(vectors)


def encode(griff: Griff) -> str:
    return VECTOR_SEP.join(INTERVAL_SEP.join(map(str, vec)) for vec in griff)


def decode(token: str) -> Griff:
    """Inverse of :func:`encode`; the empty string is the empty griff."""
    if token == "":
        return EMPTY
    if not _TOKEN_RE.fullmatch(token):
        raise ValueError(f"not a griff token: {token!r}")
    return tuple(tuple(int(i) for i in vec.split(INTERVAL_SEP))
                 for vec in token.split(VECTOR_SEP))


def extract_griffs(notes: Sequence[PerformanceNote], alignment: Alignment,
                   score: Sequence[ScoreNote], window_ms: float = DEFAULT_WINDOW_MS,
                   keep_duplicates: bool = False,
                   source: tuple[str, str, str] = ("", "", "")) -> GriffSequence:
    if not window_ms > 0:
        raise ValueError(f"window_ms must be positive, got {window_ms}")
    groups = group_by_score_note(notes, alignment, score)
    griffs = []
    for score_note in sorted(score, key=lambda n: n.ordinal):
        windows = segment_windows(groups[score_note.ordinal], window_ms)
        griffs.append(to_griff(windows, score_note.pitch, keep_duplicates))
    return GriffSequence(tuple(griffs), window_ms, source)


def extract_performance(perf: Performance, score: Sequence[ScoreNote],
                        window_ms: float = DEFAULT_WINDOW_MS,
                        keep_duplicates: bool = False) -> GriffSequence:
    return extract_griffs(perf.notes, perf.alignment, score, window_ms,
                          keep_duplicates, source=perf.key)


def extract_dataset(dataset: Dataset, window_ms: float = DEFAULT_WINDOW_MS,
                    keep_duplicates: bool = False) -> dict[tuple[str, str, str], GriffSequence]:
    return {key: extract_performance(perf, dataset.scores[perf.score], window_ms, keep_duplicates)
            for key, perf in dataset.performances.items()}


def make_ngrams(seq: GriffSequence | Sequence[str], n: int) -> list[str]:
    """Join each run of ``n`` consecutive non-empty griff tokens with ``#``.

    Empty griffs (deletions) break adjacency, so windows spanning one are
    skipped.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    tokens = seq.tokens if isinstance(seq, GriffSequence) else list(seq)
    out = []
    for i in range(len(tokens) - n + 1):
        window = tokens[i:i + n]
        if all(window):
            out.append(NGRAM_SEP.join(window))
    return out


def intervals_repr(notes: Sequence[PerformanceNote], alignment: Alignment,
                   score: Sequence[ScoreNote]) -> list[str]:
    pitch_of: Mapping[str, int] = {n.score_note_id: n.pitch for n in score}
    target = alignment.as_dict()
    return [str(n.pitch - pitch_of[target[n.note_id]])
            for n in notes if n.note_id in target]
