import pytest
from hypothesis import given, settings, strategies as st

from griffstyle.griffs import (
    EMPTY, GriffSequence, decode, encode, extract_griffs, group_by_score_note, intervals_repr,
    make_ngrams, segment_windows, to_griff,
)
from griffstyle.ingest import Alignment, PerformanceNote

from conftest import align_all, notes_at, simple_score

griffs = st.lists(
    st.lists(st.integers(-40, 80), min_size=1, max_size=5).map(lambda v: tuple(sorted(set(v)))),
    min_size=1, max_size=4,
).map(tuple)


def test_group_by_score_note_with_deletion():
    score = simple_score([48, 50], name_step=1)
    notes = notes_at([(0, 48), (5, 52), (9, 55)])
    groups = group_by_score_note(notes, align_all(notes, ["n0"] * 3), score)
    assert {k: len(v) for k, v in groups.items()} == {0: 3, 1: 0}


def test_group_by_score_note_all_insertions():
    score = simple_score([48, 50, 52])
    notes = notes_at([(0, 60), (10, 64)])
    groups = group_by_score_note(notes, Alignment((), ("p0", "p1")), score)
    assert groups == {0: [], 1: [], 2: []}


def test_group_covers_continuo_scale_score():
    score = simple_score([40 + i % 12 for i in range(135)])
    assert len(group_by_score_note([], Alignment(()), score)) == 135


def _onsets(groups):
    return [[n.onset for n in g] for g in groups]


def test_windows_greedy_anchor():
    notes = notes_at([(0, 60), (20, 61), (34, 62), (36, 63)])
    assert _onsets(segment_windows(notes, 35)) == [[0, 20, 34], [36]]


def test_windows_are_anchor_relative_not_chained():
    notes = notes_at([(0, 60), (34, 61), (68, 62)])
    assert _onsets(segment_windows(notes, 35)) == [[0, 34], [68]]


def test_windows_single_note_and_bad_window():
    notes = notes_at([(5, 60)])
    assert _onsets(segment_windows(notes, 35)) == [[5]]
    with pytest.raises(ValueError):
        segment_windows(notes, 0)


@pytest.mark.parametrize("groups, bass, expected", [
    ([[48, 64, 67]], 48, ((0, 16, 19),)),
    ([[48], [52, 55]], 48, ((0,), (4, 7))),
    ([[46]], 48, ((-2,),)),
    ([], 48, EMPTY),
    ([[48, 60, 60]], 48, ((0, 12),)),
])
def test_to_griff(groups, bass, expected):
    as_notes = [[PerformanceNote("x", 0.0, 1.0, p) for p in g] for g in groups]
    assert to_griff(as_notes, bass) == expected


def test_to_griff_keep_duplicates():
    g = [[PerformanceNote("x", 0.0, 1.0, p) for p in (60, 48, 60)]]
    assert to_griff(g, 48, keep_duplicates=True) == ((0, 12, 12),)


@pytest.mark.parametrize("griff, token", [
    (((0, 16, 19), (24,)), "0_16_19|24"),
    (((0,),), "0"),
    (((-2,), (5,)), "-2|5"),
    (EMPTY, ""),
])
def test_encode(griff, token):
    assert encode(griff) == token
    assert decode(token) == griff


@pytest.mark.parametrize("bad", ["0__4", "|0", "0|", "a", "0#4", "4_-"])
def test_decode_rejects_malformed(bad):
    with pytest.raises(ValueError):
        decode(bad)


@given(griffs)
def test_encode_round_trip(g):
    assert decode(encode(g)) == g


@given(griffs, griffs)
def test_encode_injective(a, b):
    if a != b:
        assert encode(a) != encode(b)


def test_extract_bass_only_everywhere():
    score = simple_score([48, 43, 45])
    notes = notes_at([(0, 48), (500, 43), (1000, 45)])
    seq = extract_griffs(notes, align_all(notes, ["n0", "n1", "n2"]), score)
    assert seq.tokens == ["0", "0", "0"]


def test_extract_deletion_gives_empty_at_position():
    score = simple_score([48, 43, 45])
    notes = notes_at([(0, 48), (0, 64), (1000, 45)])
    seq = extract_griffs(notes, align_all(notes, ["n0", "n0", "n2"]), score)
    assert seq.griffs[1] == EMPTY
    assert seq.tokens == ["0_16", "", "0"]
    assert len(seq) == len(score)


def test_extract_full_example():
    # arpeggiated realization: bass+third together, fifth 40 ms later, octave with the fifth
    score = simple_score([48])
    notes = notes_at([(0, 48), (10, 52), (40, 55), (60, 60)])
    seq = extract_griffs(notes, align_all(notes, ["n0"] * 4), score, window_ms=35)
    assert seq.tokens == ["0_4|7_12"]


@pytest.mark.parametrize("tokens, n, expected", [
    (["0_4_7", "0|5", "0"], 2, ["0_4_7#0|5", "0|5#0"]),
    (["0", "", "0"], 2, []),
    (["0", "", "4"], 1, ["0", "4"]),
    (["0", "3", "4", "5"], 3, ["0#3#4", "3#4#5"]),
])
def test_make_ngrams(tokens, n, expected):
    assert make_ngrams(tokens, n) == expected


def test_make_ngrams_rejects_zero():
    with pytest.raises(ValueError):
        make_ngrams(["0"], 0)


@given(st.lists(griffs, min_size=1, max_size=12))
def test_bigram_count_on_contiguous_run(gs):
    seq = GriffSequence(tuple(gs), 35.0)
    assert len(make_ngrams(seq, 2)) == len(gs) - 1


def test_intervals_repr():
    score = simple_score([48])
    notes = notes_at([(0, 52), (5, 55), (9, 70)])
    alignment = Alignment((("p0", "n0"), ("p1", "n0")), ("p2",))
    assert intervals_repr(notes, alignment, score) == ["4", "7"]
    assert intervals_repr([], Alignment(()), score) == []


note_lists = st.lists(st.tuples(st.integers(0, 400), st.integers(30, 90)), min_size=1, max_size=25)


@settings(max_examples=200)
@given(note_lists, st.floats(1, 120))
def test_window_partition_and_bound(spec, window):
    notes = notes_at(spec)
    groups = segment_windows(notes, window)
    assert sorted(n.note_id for g in groups for n in g) == sorted(n.note_id for n in notes)
    for g in groups:
        assert g[-1].onset - g[0].onset < window


@given(note_lists, st.integers(-20, 20))
def test_transposition_invariance(spec, shift):
    score = simple_score([48, 50])
    notes = notes_at(spec)
    ids = ["n0" if i % 2 else "n1" for i in range(len(notes))]
    base = extract_griffs(notes, align_all(notes, ids), score).tokens
    moved_notes = notes_at([(t, p + shift) for t, p in spec])
    moved_score = simple_score([48 + shift, 50 + shift])
    assert extract_griffs(moved_notes, align_all(moved_notes, ids), moved_score).tokens == base


def test_extract_is_pure():
    score = simple_score([48, 50])
    notes = notes_at([(0, 48), (3, 60), (500, 50), (520, 62), (600, 65)])
    alignment = align_all(notes, ["n0", "n0", "n1", "n1", "n1"])
    assert extract_griffs(notes, alignment, score) == extract_griffs(notes, alignment, score)
