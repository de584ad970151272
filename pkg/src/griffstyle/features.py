"""Bag-of-words features over griffs, griff n-grams and interval tokens."""

from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .griffs import DEFAULT_WINDOW_MS, GriffSequence, extract_dataset, intervals_repr, make_ngrams
from .ingest import Dataset

REPRESENTATIONS = ("intervals", "griff", "2gram", "3gram")

# Deletions and bass-only realizations carry no pitch content.
EXCLUDED_GRIFF_TOKENS = frozenset({"", "0"})


def ngram_order(representation: str) -> int | None:
    """n for griff representations (``griff`` is 1), None for intervals."""
    if representation == "intervals":
        return None
    if representation == "griff":
        return 1
    if representation.endswith("gram") and representation[:-4].isdigit():
        n = int(representation[:-4])
        if n >= 1:
            return n
    raise ValueError(f"unknown representation {representation!r}")


@dataclass(frozen=True)
class GriffProfile:
    counts: Mapping[str, int]
    representation: str
    source: tuple[str, str, str] = ("", "", "")

    @property
    def player(self) -> str:
        return self.source[1]

    @property
    def total(self) -> int:
        return sum(self.counts.values())


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    representation: str
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def to_text(self) -> str:
        return "".join(t + "\n" for t in self.tokens)


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    vocabulary: Vocabulary
    labels: tuple[str, ...]
    row_ids: tuple[tuple[str, str, str], ...]

    @property
    def shape(self):
        return self.values.shape

    def subset(self, rows: Sequence[int]) -> "FeatureMatrix":
        rows = list(rows)
        return FeatureMatrix(self.values[rows], self.vocabulary,
                             tuple(self.labels[i] for i in rows),
                             tuple(self.row_ids[i] for i in rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["score", "player", "take", *self.vocabulary.tokens])
        for row_id, row in zip(self.row_ids, self.values):
            writer.writerow([*row_id, *(int(v) for v in row)])
        return buf.getvalue()

    def to_triplets(self) -> dict:
        rows, cols = np.nonzero(self.values)
        return {
            "shape": list(self.values.shape),
            "representation": self.vocabulary.representation,
            "rows": [list(r) for r in self.row_ids],
            "labels": list(self.labels),
            "columns": list(self.vocabulary.tokens),
            "triplets": [[int(i), int(j), int(self.values[i, j])] for i, j in zip(rows, cols)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_triplets(), indent=1)


def profile(tokens: GriffSequence | Iterable[str], representation: str = "griff",
            source: tuple[str, str, str] | None = None) -> GriffProfile:
    """Count token multiplicities.

    For griff representations the empty and bass-only tokens are dropped;
    n-grams are formed first when ``representation`` asks for them.
    Interval tokens are counted as given, including ``"0"``.
    """
    n = ngram_order(representation)
    if isinstance(tokens, GriffSequence):
        if source is None:
            source = tokens.source
        tokens = make_ngrams(tokens, n or 1)
    tokens = list(tokens)
    if n is not None:
        tokens = [t for t in tokens if t not in EXCLUDED_GRIFF_TOKENS]
    return GriffProfile(dict(sorted(Counter(tokens).items())), representation,
                        source or ("", "", ""))


def build_vocabulary(profiles: Iterable[GriffProfile], representation: str | None = None) -> Vocabulary:
    profiles = list(profiles)
    tags = {p.representation for p in profiles}
    if len(tags) > 1:
        raise ValueError(f"profiles mix representations: {sorted(tags)}")
    if representation is None:
        representation = tags.pop() if tags else "griff"
    elif tags and tags != {representation}:
        raise ValueError(f"profiles are {tags.pop()!r}, expected {representation!r}")
    tokens = set()
    for p in profiles:
        tokens.update(t for t, c in p.counts.items() if c > 0)
    if ngram_order(representation) is not None:
        tokens -= EXCLUDED_GRIFF_TOKENS
    return Vocabulary(tuple(sorted(tokens)), representation)


def bow_matrix(profiles: Sequence[GriffProfile], vocab: Vocabulary) -> FeatureMatrix:
    """Stack profiles into a count matrix; tokens outside ``vocab`` are dropped."""
    values = np.zeros((len(profiles), len(vocab)), dtype=np.int64)
    for i, p in enumerate(profiles):
        for token, count in p.counts.items():
            j = vocab.index.get(token)
            if j is not None:
                values[i, j] = count
    return FeatureMatrix(values, vocab, tuple(p.player for p in profiles),
                         tuple(p.source for p in profiles))


def dataset_profiles(dataset: Dataset, representation: str,
                     window_ms: float = DEFAULT_WINDOW_MS, keep_duplicates: bool = False,
                     scores: Iterable[str] | None = None,
                     sequences: Mapping[tuple[str, str, str], GriffSequence] | None = None,
                     ) -> list[GriffProfile]:
    """Profiles of every performance (of ``scores``, if given), in key order."""
    wanted = None if scores is None else set(scores)
    if ngram_order(representation) is not None and sequences is None:
        sequences = extract_dataset(dataset, window_ms, keep_duplicates)
    out = []
    for key, perf in dataset.performances.items():
        if wanted is not None and perf.score not in wanted:
            continue
        if representation == "intervals":
            tokens = intervals_repr(perf.notes, perf.alignment, dataset.scores[perf.score])
            out.append(profile(tokens, representation, key))
        else:
            out.append(profile(sequences[key], representation))
    return out


def dataset_matrix(dataset: Dataset, representation: str, **kwargs) -> FeatureMatrix:
    profiles = dataset_profiles(dataset, representation, **kwargs)
    return bow_matrix(profiles, build_vocabulary(profiles, representation))


def vocabulary_summary(dataset: Dataset, window_ms: float = DEFAULT_WINDOW_MS,
                       keep_duplicates: bool = False,
                       representations: Sequence[str] = REPRESENTATIONS) -> list[dict]:
    """Vocabulary size per score and for the whole dataset.

    Each row also carries ``griff_tokens``, the number of non-empty griffs.
    """
    sequences = extract_dataset(dataset, window_ms, keep_duplicates)
    scopes = [(name, [name]) for name in sorted(dataset.scores)]
    scopes.append(("Whole Dataset", sorted(dataset.scores)))
    rows = []
    for label, names in scopes:
        row = {"scope": label}
        for rep in representations:
            profiles = dataset_profiles(dataset, rep, scores=names, sequences=sequences)
            row[rep] = len(build_vocabulary(profiles, rep))
        row["griff_tokens"] = sum(
            1 for key, seq in sequences.items() if key[0] in names for t in seq.tokens if t)
        rows.append(row)
    return rows
