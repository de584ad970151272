"""
Synthetic corpora with known per-player griff preferences.

Each player draws griff shapes from a palette; ``overlap`` controls what
share of every palette is common to all players (0: disjoint palettes,
1: identical). The intended token of every score note is kept as ground
truth so the extraction pipeline can be checked end to end.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Mapping

import mido
import numpy as np

from .griffs import Griff, encode
from .ingest import Alignment, Dataset, PerformanceNote, ScoreNote, format_alignment, make_performance

# intervals above the bass used to build shapes
_SHAPE_INTERVALS = (3, 4, 5, 7, 8, 9, 10, 12, 14, 15, 16, 17, 19, 21, 22, 24)

NOTE_SPACING_MS = 800
MIDI_PPQ = 480
MIDI_TEMPO = 480_000    # 1 tick == 1 ms


@dataclass(frozen=True)
class SynthConfig:
    players: int = 7
    takes: int = 5
    scores: int = 1
    score_length: int = 30
    palette_size: int = 6
    overlap: float = 0.0
    jitter_ms: float = 0.0
    deletion_prob: float = 0.0
    insertion_prob: float = 0.0
    window_ms: float = 35.0
    max_vectors: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.overlap <= 1.0:
            raise ValueError("overlap must be in [0, 1]")
        for name in ("deletion_prob", "insertion_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.score_length < 1 or self.players < 1 or self.takes < 1 or self.scores < 1:
            raise ValueError("players, takes, scores and score_length must be >= 1")
        if self.palette_size < 1 or self.max_vectors < 1:
            raise ValueError("palette_size and max_vectors must be >= 1")
        if self.jitter_ms < 0 or self.window_ms <= 0:
            raise ValueError("jitter_ms must be >= 0 and window_ms > 0")

    @classmethod
    def from_json(cls, text: str) -> "SynthConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class SynthCorpus:
    dataset: Dataset
    ground_truth: Mapping[tuple[str, str, str], tuple[str, ...]]
    palettes: Mapping[str, tuple[str, ...]]
    config: SynthConfig


def _random_shape(rng: np.random.Generator, max_vectors: int) -> Griff:
    n_vectors = int(rng.integers(1, max_vectors + 1))
    vectors = []
    for v in range(n_vectors):
        size = int(rng.integers(1, 4))
        intervals = set(int(i) for i in rng.choice(_SHAPE_INTERVALS, size=size, replace=False))
        if v == 0:
            intervals.add(0)
        vectors.append(tuple(sorted(intervals)))
    return tuple(vectors)


def _palettes(config: SynthConfig, rng: np.random.Generator, players: list[str]) -> dict[str, list[Griff]]:
    shared = int(round(config.overlap * config.palette_size))
    own = config.palette_size - shared
    needed = shared + own * len(players)
    pool: dict[str, Griff] = {}
    attempts = 0
    while len(pool) < needed:
        shape = _random_shape(rng, config.max_vectors)
        token = encode(shape)
        if token != "0":
            pool.setdefault(token, shape)
        attempts += 1
        if attempts > 1000 * needed:
            raise ValueError("cannot draw enough distinct shapes; lower palette_size")
    shapes = list(pool.values())
    common = shapes[:shared]
    return {p: common + shapes[shared + i * own: shared + (i + 1) * own]
            for i, p in enumerate(players)}


def generate(config: SynthConfig) -> SynthCorpus:
    rng = np.random.default_rng(config.seed)
    players = [f"P{i + 1:02d}" for i in range(config.players)]
    palettes = _palettes(config, rng, players)
    # jitter stays well inside the window so realized shapes are recoverable
    max_jitter = 0.45 * config.window_ms
    gap = 3 * config.window_ms
    # shorter than the vector gap so restruck pitches never overlap
    length = max(1, int(0.8 * gap))

    scores, performances, truth = {}, {}, {}
    for s in range(config.scores):
        name = f"synth{s + 1:03d}"
        bass = rng.integers(36, 53, size=config.score_length)
        # ids index a full score, so they are not the continuo ordinals
        scores[name] = tuple(ScoreNote(f"n{3 * o + 1}", o, int(p)) for o, p in enumerate(bass))
        for pi, player in enumerate(players):
            for t in range(config.takes):
                take = str(t + 1)
                sub = np.random.default_rng([config.seed, s, pi, t])
                raw, tokens = [], []
                for note in scores[name]:
                    start = 200 + note.ordinal * NOTE_SPACING_MS
                    if sub.random() < config.deletion_prob:
                        tokens.append("")
                        continue
                    palette = palettes[player]
                    shape = palette[int(sub.integers(len(palette)))]
                    tokens.append(encode(shape))
                    for v, vector in enumerate(shape):
                        for interval in vector:
                            jitter = np.clip(sub.normal(0, config.jitter_ms), -max_jitter, max_jitter) \
                                if config.jitter_ms else 0.0
                            onset = round(start + v * gap + jitter)
                            raw.append((onset, note.pitch + interval, note.score_note_id))
                    if sub.random() < config.insertion_prob:
                        raw.append((start + NOTE_SPACING_MS // 2, int(sub.integers(60, 84)), None))
                raw.sort(key=lambda r: (r[0], r[1]))
                notes, pairs, inserted = [], [], []
                for i, (onset, pitch, score_id) in enumerate(raw):
                    note_id = f"p{i}"
                    notes.append(PerformanceNote(note_id, float(onset), float(onset + length),
                                                 pitch, 64))
                    if score_id is None:
                        inserted.append(note_id)
                    else:
                        pairs.append((note_id, score_id))
                key = (name, player, take)
                performances[key] = make_performance(name, player, take, notes,
                                                     Alignment(tuple(pairs), tuple(inserted)),
                                                     scores[name])
                truth[key] = tuple(tokens)
    return SynthCorpus(Dataset(scores, performances), truth,
                       {p: tuple(encode(g) for g in pal) for p, pal in palettes.items()}, config)


def midi_bytes(notes) -> bytes:
    """Encode notes as a single-track SMF in which one tick is one millisecond."""
    mid = mido.MidiFile(type=0, ticks_per_beat=MIDI_PPQ)
    track = mido.MidiTrack()
    mid.tracks.append(track)
    track.append(mido.MetaMessage("set_tempo", tempo=MIDI_TEMPO, time=0))
    events = []
    for n in notes:
        events.append((int(round(n.offset)), 0, n.pitch, 0))
        events.append((int(round(n.onset)), 1, n.pitch, n.velocity))
    now = 0
    for tick, is_on, pitch, velocity in sorted(events):
        kind = "note_on" if is_on else "note_off"
        track.append(mido.Message(kind, note=pitch, velocity=velocity, time=tick - now))
        now = tick
    buf = io.BytesIO()
    mid.save(file=buf)
    return buf.getvalue()


def export(corpus: SynthCorpus, out_dir: str | Path) -> Path:
    """Write MIDI files, alignment CSVs and a manifest; return the manifest path."""
    out = Path(out_dir)
    (out / "midi").mkdir(parents=True, exist_ok=True)
    (out / "alignments").mkdir(parents=True, exist_ok=True)
    manifest = {"scores": [], "performances": []}
    for name, notes in corpus.dataset.scores.items():
        manifest["scores"].append({
            "name": name,
            "notes": [{"id": n.score_note_id, "ordinal": n.ordinal, "midi_pitch": n.pitch}
                      for n in notes],
        })
    for (score, player, take), perf in corpus.dataset.performances.items():
        stem = f"{score}_{player}_{take}"
        (out / "midi" / f"{stem}.mid").write_bytes(midi_bytes(perf.notes))
        (out / "alignments" / f"{stem}.csv").write_text(format_alignment(perf.alignment),
                                                         encoding="utf-8", newline="\n")
        manifest["performances"].append({
            "score": score, "player": player, "take": take,
            "midi_path": f"midi/{stem}.mid", "alignment_path": f"alignments/{stem}.csv",
        })
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
    (out / "synth_config.json").write_text(json.dumps(asdict(corpus.config), indent=1) + "\n")
    return path
