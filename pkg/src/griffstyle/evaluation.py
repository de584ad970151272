"""Cross-validation, player-focused runs, segment scans and per-note statistics."""

from __future__ import annotations

import logging
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import skew

from .classifier import KernelSpec, train_multiclass
from .features import (
    EXCLUDED_GRIFF_TOKENS, FeatureMatrix, bow_matrix, build_vocabulary, dataset_profiles, profile,
)
from .griffs import DEFAULT_WINDOW_MS, GriffSequence, extract_performance
from .ingest import Dataset

logger = logging.getLogger(__name__)

DEFAULT_SEGMENT_LENGTHS = (1, 2, 4, 8)
NOTE_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[int, ...], ...]
    seed: int

    @property
    def k(self) -> int:
        return len(self.folds)


def stratified_kfold(labels: Sequence, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign samples to k folds keeping class proportions.

    Samples are shuffled with ``seed``, then dealt out class by class in
    sorted class order, continuing the round-robin across classes so fold
    sizes stay balanced too.
    """
    n = len(labels)
    if k < 2 or k > n:
        raise ValueError(f"number of folds must be in [2, {n}], got {k}")
    order = np.random.default_rng(seed).permutation(n)
    by_class = defaultdict(list)
    for i in order:
        by_class[str(labels[i])].append(int(i))
    small = sorted(c for c, members in by_class.items() if len(members) < k)
    if small:
        warnings.warn(f"classes with fewer than {k} samples: {', '.join(small)}")
    folds = [[] for _ in range(k)]
    slot = 0
    for c in sorted(by_class):
        for i in by_class[c]:
            folds[slot % k].append(i)
            slot += 1
    return FoldPlan(tuple(tuple(sorted(f)) for f in folds), seed)


@dataclass
class CVResult:
    accuracy: float
    fold_accuracies: list[float]
    confusion: np.ndarray
    classes: tuple[str, ...]
    predictions: list[str]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "fold_accuracies": self.fold_accuracies,
            "classes": list(self.classes),
            "confusion": self.confusion.tolist(),
        }


def _fold_features(X: np.ndarray, train: np.ndarray, vocab_mode: str) -> np.ndarray:
    if vocab_mode == "corpus":
        return X
    if vocab_mode == "per-fold":
        # columns never seen in training are exactly the tokens outside the fold vocabulary
        return X[:, X[train].any(axis=0)]
    raise ValueError(f"unknown vocabulary mode {vocab_mode!r}")


def cross_validate(matrix: FeatureMatrix, plan: FoldPlan, spec: KernelSpec = KernelSpec(),
                   C: float = 1.0, vocab_mode: str = "corpus", strategy: str = "ovo",
                   tol: float = 1e-3) -> CVResult:
    """Mean fold accuracy and pooled confusion matrix (rows = true class)."""
    X = matrix.values.astype(float)
    labels = np.asarray(matrix.labels)
    n = len(labels)
    covered = sorted(i for fold in plan.folds for i in fold)
    if covered != list(range(n)):
        raise ValueError("fold plan does not partition the matrix rows")
    classes = tuple(sorted(set(labels.tolist())))
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    predictions = [""] * n
    accuracies = []
    for fold in plan.folds:
        test = np.asarray(fold, dtype=int)
        train = np.setdiff1d(np.arange(n), test)
        Xf = _fold_features(X, train, vocab_mode)
        train_classes = set(labels[train].tolist())
        if len(train_classes) == 1:
            predicted = [next(iter(train_classes))] * len(test)
        else:
            model = train_multiclass(Xf[train], labels[train], spec, C, tol, strategy)
            predicted = model.predict(Xf[test])
        correct = 0
        for i, p in zip(test, predicted):
            predictions[i] = p
            confusion[index[labels[i]], index[p]] += 1
            correct += p == labels[i]
        accuracies.append(correct / len(test))
    return CVResult(float(np.mean(accuracies)), accuracies, confusion, classes, predictions)


@dataclass
class PlayerRun:
    key: tuple[str, str, str]
    predicted: str
    correct: bool


@dataclass
class PlayerResult:
    player: str
    runs: list[PlayerRun]
    scope: str

    @property
    def accuracy(self) -> float:
        return sum(r.correct for r in self.runs) / len(self.runs)

    def by_score(self) -> dict[str, float]:
        out = defaultdict(list)
        for r in self.runs:
            out[r.key[0]].append(r.correct)
        return {s: sum(v) / len(v) for s, v in sorted(out.items())}


def player_focused(dataset: Dataset, player: str, representation: str = "griff",
                   spec: KernelSpec = KernelSpec(), C: float = 1.0, scope: str = "per-score",
                   window_ms: float = DEFAULT_WINDOW_MS, keep_duplicates: bool = False,
                   strategy: str = "ovo") -> PlayerResult:
    """Leave out each performance of ``player`` in turn and classify it.

    With ``scope='per-score'`` training uses the other performances of the
    same score; with ``'whole-dataset'`` it uses all other performances.
    """
    if player not in dataset.players:
        raise ValueError(f"unknown player {player!r}")
    if scope == "per-score":
        groups = [[s] for s in sorted(dataset.scores)]
    elif scope == "whole-dataset":
        groups = [sorted(dataset.scores)]
    else:
        raise ValueError(f"unknown scope {scope!r}")
    runs = []
    for names in groups:
        profiles = dataset_profiles(dataset, representation, window_ms, keep_duplicates, scores=names)
        if not any(p.player == player for p in profiles):
            continue
        matrix = bow_matrix(profiles, build_vocabulary(profiles, representation))
        X = matrix.values.astype(float)
        labels = np.asarray(matrix.labels)
        for i, key in enumerate(matrix.row_ids):
            if key[1] != player:
                continue
            train = np.delete(np.arange(len(labels)), i)
            if len(set(labels[train].tolist())) < 2:
                raise ValueError(f"scope {names} has fewer than two players to train on")
            model = train_multiclass(X[train], labels[train], spec, C, strategy=strategy)
            predicted = model.predict(X[i:i + 1])[0]
            runs.append(PlayerRun(key, predicted, predicted == player))
    if not runs:
        raise ValueError(f"player {player!r} has no performances in scope")
    return PlayerResult(player, runs, scope)


@dataclass
class SegmentScan:
    score: str
    segment_accuracy: dict[tuple[int, int], float]       # (length, start) -> accuracy
    note_means: dict[int, list[float]]                    # length -> mean accuracy per ordinal
    seed: int
    folds: int

    def histogram(self, length: int, bins: int = 10) -> tuple[np.ndarray, np.ndarray]:
        accs = [a for (L, _), a in sorted(self.segment_accuracy.items()) if L == length]
        return np.histogram(accs, bins=bins, range=(0.0, 1.0))

    def skewness(self, length: int) -> float:
        accs = [a for (L, _), a in self.segment_accuracy.items() if L == length]
        if len(accs) < 3 or np.ptp(accs) == 0:
            return 0.0
        return float(skew(accs))


def segment_scan(dataset: Dataset, score: str, lengths: Sequence[int] = DEFAULT_SEGMENT_LENGTHS,
                 spec: KernelSpec = KernelSpec(), C: float = 1.0, k: int = 5, seed: int = 0,
                 window_ms: float = DEFAULT_WINDOW_MS, keep_duplicates: bool = False,
                 covering: int | None = None, strategy: str = "ovo") -> SegmentScan:
    """Classify players from the griffs of each run of L consecutive score notes.

    Every start position is scanned (stride 1). A note's mean accuracy for
    length L averages all segments that contain it. ``covering`` restricts
    the scan to segments containing that ordinal.
    """
    performances = dataset.for_score(score)
    score_notes = dataset.scores[score]
    n_notes = len(score_notes)
    for L in lengths:
        if not 1 <= L <= n_notes:
            raise ValueError(f"segment length {L} invalid for score of {n_notes} notes")
    sequences: list[GriffSequence] = [
        extract_performance(p, score_notes, window_ms, keep_duplicates) for p in performances]
    token_lists = [(seq.tokens, seq.source) for seq in sequences]
    labels = [p.player for p in performances]
    plan = stratified_kfold(labels, k, seed)

    seg_acc = {}
    note_means = {}
    for L in sorted(set(lengths)):
        per_note = [[] for _ in range(n_notes)]
        for start in range(n_notes - L + 1):
            if covering is not None and not start <= covering < start + L:
                continue
            profiles = [profile(tokens[start:start + L], "griff", source)
                        for tokens, source in token_lists]
            matrix = bow_matrix(profiles, build_vocabulary(profiles, "griff"))
            acc = cross_validate(matrix, plan, spec, C, strategy=strategy).accuracy
            seg_acc[L, start] = acc
            for o in range(start, start + L):
                per_note[o].append(acc)
        note_means[L] = [float(np.mean(a)) if a else float("nan") for a in per_note]
    return SegmentScan(score, seg_acc, note_means, seed, k)


def pitch_name(midi_pitch: int) -> str:
    return f"{NOTE_NAMES[midi_pitch % 12]}{midi_pitch // 12 - 1}"


@dataclass
class NoteStats:
    score_note_id: str
    spelling: str
    n_types: int
    occurrences: int
    mean_usage: float
    accuracy_by_length: dict[int, float] = field(default_factory=dict)

    @property
    def mean_accuracy(self) -> float | None:
        if not self.accuracy_by_length:
            return None
        return float(np.mean(list(self.accuracy_by_length.values())))


def _note_tokens(dataset: Dataset, score: str, note: str, window_ms: float,
                 keep_duplicates: bool) -> list[tuple[str, str]]:
    score_notes = dataset.scores.get(score)
    if score_notes is None:
        raise ValueError(f"unknown score {score!r}")
    match = [n for n in score_notes if n.score_note_id == note]
    if not match:
        raise ValueError(f"unknown note {note!r} in score {score!r}")
    ordinal = match[0].ordinal
    out = []
    for perf in dataset.for_score(score):
        token = extract_performance(perf, score_notes, window_ms, keep_duplicates).tokens[ordinal]
        if token not in EXCLUDED_GRIFF_TOKENS:
            out.append((perf.player, token))
    return out


def note_stats(dataset: Dataset, score: str, note: str,
               accuracies: Mapping[int, float] | None = None,
               window_ms: float = DEFAULT_WINDOW_MS, keep_duplicates: bool = False) -> NoteStats:
    """Griff-type count and mean usage per type at one score note."""
    tokens = [t for _, t in _note_tokens(dataset, score, note, window_ms, keep_duplicates)]
    counts = Counter(tokens)
    score_note = next(n for n in dataset.scores[score] if n.score_note_id == note)
    spelling = score_note.spelling or pitch_name(score_note.pitch)
    mean_usage = len(tokens) / len(counts) if counts else 0.0
    return NoteStats(note, spelling, len(counts), len(tokens), mean_usage,
                     dict(sorted((accuracies or {}).items())))


def griff_distribution(dataset: Dataset, score: str, note: str,
                       window_ms: float = DEFAULT_WINDOW_MS,
                       keep_duplicates: bool = False) -> dict[str, dict[str, int]]:
    """Counts of each griff type at a score note, per player: token -> player -> count."""
    players = sorted({p.player for p in dataset.for_score(score)})
    table: dict[str, dict[str, int]] = {}
    for player, token in _note_tokens(dataset, score, note, window_ms, keep_duplicates):
        row = table.setdefault(token, dict.fromkeys(players, 0))
        row[player] += 1
    # most used types first, ties by token
    return dict(sorted(table.items(), key=lambda kv: (-sum(kv[1].values()), kv[0])))
