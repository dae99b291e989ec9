import json

import pytest
from hypothesis import given, strategies as st

from cale.corpus import (
    CLOSE_TAG,
    OPEN_TAG,
    MarkedSentence,
    Occurrence,
    Pos,
    build_taxonomy,
    filter_corpus,
    load_taxonomy,
    mark_target,
    parse_corpus,
)
from cale.errors import CorpusError
from conftest import make_cells_corpus, make_occurrence


def record(occ_id="o1", tokens=None, target=1, lemma="walk", pos="n", concept="c1", proper=False):
    return {
        "id": occ_id,
        "tokens": tokens or [f"w{i}" for i in range(12)],
        "target_index": target,
        "lemma": lemma,
        "pos": pos,
        "concept": concept,
        "proper_noun": proper,
    }


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


def test_parse_three_valid_lines(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [record("a"), record("b"), record("c")])
    occs = parse_corpus(path)
    assert [o.id for o in occs] == ["a", "b", "c"]


def test_parse_missing_field_names_line(tmp_path):
    path = tmp_path / "c.jsonl"
    bad = record("b")
    del bad["concept"]
    write_jsonl(path, [record("a"), bad])
    with pytest.raises(CorpusError, match=r":2: missing field 'concept'"):
        parse_corpus(path)


def test_parse_duplicate_id_names_id(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [record("d001.s01.t04"), record("d001.s01.t04")])
    with pytest.raises(CorpusError, match="d001.s01.t04"):
        parse_corpus(path)


def test_parse_invalid_json_names_line(tmp_path):
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps(record("a")) + "\n{broken\n", encoding="utf-8")
    with pytest.raises(CorpusError, match=":2:"):
        parse_corpus(path)


def test_parse_merges_satellite_adjectives_and_lowercases(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [record("a", pos="s", lemma="Good"), record("b", pos="a", lemma="bad")])
    occs = parse_corpus(path)
    assert occs[0].pos is Pos.ADJECTIVE and occs[1].pos is Pos.ADJECTIVE
    assert occs[0].lemma == "good"


def test_parse_rejects_unknown_pos_and_bad_target(tmp_path):
    path = tmp_path / "c.jsonl"
    write_jsonl(path, [record("a", pos="x")])
    with pytest.raises(CorpusError, match="pos"):
        parse_corpus(path)
    write_jsonl(path, [record("a", target=99)])
    with pytest.raises(CorpusError, match="out of range"):
        parse_corpus(path)


def test_occurrence_invariants():
    with pytest.raises(ValueError):
        make_occurrence("x", n_tokens=3, target_index=3)
    with pytest.raises(ValueError):
        Occurrence(id="x", tokens=(), target_index=0, lemma="l", pos=Pos.NOUN, concept="c")


def test_filter_short_lemma_removed():
    occs = make_cells_corpus([("go", Pos.VERB, "c1")], 50)
    assert filter_corpus(occs) == []


def test_filter_per_pos_threshold():
    occs = make_cells_corpus([("ratify", Pos.VERB, "c1")], 9) + make_cells_corpus(
        [("ratify", Pos.NOUN, "c2")], 12
    )
    kept = filter_corpus(occs)
    assert len(kept) == 12
    assert all(o.pos is Pos.NOUN for o in kept)


def test_filter_sentence_length():
    short = [make_occurrence(f"s{i}", n_tokens=8) for i in range(20)]
    assert filter_corpus(short) == []
    long = [make_occurrence(f"l{i}", n_tokens=101) for i in range(20)]
    assert filter_corpus(long) == []
    edge = [make_occurrence(f"e{i}", n_tokens=10) for i in range(10)]
    assert len(filter_corpus(edge)) == 10


def test_filter_proper_nouns_and_nonalpha():
    proper = [make_occurrence(f"p{i}", proper=True) for i in range(20)]
    assert filter_corpus(proper) == []
    hyphen = make_cells_corpus([("well-known", Pos.ADJECTIVE, "c1")], 20)
    assert filter_corpus(hyphen) == []


def test_filter_preserves_order_and_counts():
    occs = make_cells_corpus([("alpha", Pos.NOUN, "c1"), ("beta", Pos.VERB, "c2")], 15)
    kept = filter_corpus(occs)
    assert [o.id for o in kept] == [o.id for o in occs]


def test_filter_idempotent():
    occs = (
        make_cells_corpus([("alpha", Pos.NOUN, "c1")], 15)
        + [make_occurrence("short", n_tokens=9)]
        + make_cells_corpus([("rare", Pos.NOUN, "c2")], 5)
    )
    once = filter_corpus(occs)
    assert filter_corpus(once) == once


@given(st.lists(st.tuples(st.sampled_from(["abc", "de", "frequent"]),
                          st.sampled_from([Pos.NOUN, Pos.VERB]),
                          st.integers(min_value=5, max_value=110)),
                min_size=0, max_size=60))
def test_filter_idempotent_property(cells):
    occs = [
        make_occurrence(f"h{i}", lemma=lemma, pos=pos, n_tokens=n, target_index=0)
        for i, (lemma, pos, n) in enumerate(cells)
    ]
    once = filter_corpus(occs)
    assert filter_corpus(once) == once
    from collections import Counter

    counts = Counter((o.lemma, o.pos) for o in once)
    assert all(c >= 10 for c in counts.values())


def test_mark_target_examples():
    occ = Occurrence(id="x", tokens=("the", "cat", "sat"), target_index=1,
                     lemma="cat", pos=Pos.NOUN, concept="c")
    assert mark_target(occ).tokens == ("the", OPEN_TAG, "cat", CLOSE_TAG, "sat")
    first = Occurrence(id="y", tokens=("run", "fast"), target_index=0,
                       lemma="run", pos=Pos.VERB, concept="c")
    assert mark_target(first).tokens == (OPEN_TAG, "run", CLOSE_TAG, "fast")
    last = Occurrence(id="z", tokens=("run", "fast"), target_index=1,
                      lemma="fast", pos=Pos.ADJECTIVE, concept="c")
    assert mark_target(last).tokens == ("run", OPEN_TAG, "fast", CLOSE_TAG)


def test_mark_target_roundtrip():
    occ = make_occurrence("x", n_tokens=15, target_index=7)
    marked = mark_target(occ)
    assert len(marked.tokens) == len(occ.tokens) + 2
    tokens, index = marked.unmark()
    assert tokens == occ.tokens
    assert index == occ.target_index
    assert marked.target_word == occ.tokens[7]


def test_marked_sentence_validation():
    with pytest.raises(ValueError):
        MarkedSentence(tokens=("a", OPEN_TAG, "b", "c", CLOSE_TAG))
    with pytest.raises(ValueError):
        MarkedSentence(tokens=(OPEN_TAG, "b", CLOSE_TAG, OPEN_TAG, "c", CLOSE_TAG))


def test_taxonomy_build_and_depths():
    tax = build_taxonomy([("A", "R"), ("B", "A"), ("C", "A")])
    assert tax.roots == {"R"}
    assert tax.depth("R") == 1 and tax.depth("A") == 2 and tax.depth("B") == 3
    assert tax.ancestors("B") == {"B", "A", "R"}
    assert "B" in tax and "missing" not in tax


def test_taxonomy_cycle_rejected():
    with pytest.raises(ValueError, match="cycle"):
        build_taxonomy([("A", "R"), ("B", "A"), ("A", "B")])
    with pytest.raises(ValueError, match="no roots"):
        build_taxonomy([("A", "B"), ("B", "A")])


def test_taxonomy_multi_root_and_diamond():
    tax = build_taxonomy([("C", "A"), ("C", "B")])
    assert tax.roots == {"A", "B"}
    assert tax.depth("C") == 2


def test_load_taxonomy(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("A\tR\nB\tA\n", encoding="utf-8")
    tax = load_taxonomy(path)
    assert tax.roots == {"R"}
    bad = tmp_path / "bad.tsv"
    bad.write_text("A\n", encoding="utf-8")
    with pytest.raises(CorpusError, match=":1:"):
        load_taxonomy(bad)
