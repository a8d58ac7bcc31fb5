import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glory.bundle import build_bundle, from_bytes, to_bytes
from glory.ingest import ParseError, load_embeddings, parse_behaviors, parse_news, tokenize

from .conftest import DATA

# tokenized by hand from tests/data/news5.tsv
HAND_TOKENS = {
    "N1": ["cowboys", "beat", "giants", "24", "17", "in", "overtime"],
    "N2": ["stocks", "rally", "as", "fed", "holds", "rates"],
    "N3": ["the", "u", "s", "election", "what", "s", "next"],
    "N4": ["nfl", "week", "10", "power", "rankings"],
    "N5": ["ten", "easy", "dinners", "for", "busy", "weeknights"],
}
HAND_ENTITIES = {"N1": ["Q1", "Q2"], "N2": ["Q3"], "N3": [], "N4": ["Q2", "Q4", "Q1"], "N5": []}


def _news_line(nid, title, ents="[]"):
    return "\t".join([nid, "cat", "sub", title, "", "", ents, "[]"]) + "\n"


def test_parse_news_matches_hand_tokenization():
    cat = parse_news(DATA / "news5.tsv")
    assert len(cat) == 5
    inv_w = {v: k for k, v in cat.word_index.items()}
    for nid, toks in HAND_TOKENS.items():
        rec = cat.entries[nid]
        assert len(rec.title_tokens) == len(toks)
        assert [inv_w[t] for t in rec.title_tokens] == toks
        assert cat.entity_symbols(nid) == HAND_ENTITIES[nid]
    assert cat.entries["N1"].category == "sports"
    assert cat.entries["N1"].subcategory == "football_nfl"
    # abstract entities (Q9) are never indexed
    assert "Q9" not in cat.entity_index


def test_title_truncated_to_first_words(tmp_path):
    words = [f"w{i}" for i in range(35)]
    p = tmp_path / "n.tsv"
    p.write_text(_news_line("A", " ".join(words)))
    cat = parse_news(p, L_title=30)
    rec = cat.entries["A"]
    assert len(rec.title_tokens) == 30
    inv = {v: k for k, v in cat.word_index.items()}
    assert [inv[t] for t in rec.title_tokens] == words[:30]


def test_empty_entity_array_and_entity_truncation(tmp_path):
    import json
    many = json.dumps([{"WikidataId": f"Q{i}"} for i in range(8)])
    p = tmp_path / "n.tsv"
    p.write_text(_news_line("A", "hello", "[]") + _news_line("B", "x", many))
    cat = parse_news(p, L_entity=5)
    assert cat.entries["A"].entity_ids == ()
    assert cat.entity_symbols("B") == [f"Q{i}" for i in range(5)]


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "n.tsv"
    p.write_text(_news_line("A", "ok") + "B\tcat\tsub\ttitle only\n")
    with pytest.raises(ParseError) as exc:
        parse_news(p)
    assert exc.value.lineno == 2
    assert ":2:" in str(exc.value)


def test_duplicate_news_keeps_first(tmp_path, caplog):
    p = tmp_path / "n.tsv"
    p.write_text(_news_line("A", "first title") + _news_line("A", "second") + _news_line("B", "b"))
    cat = parse_news(p)
    assert len(cat) == 2
    assert cat.duplicates == 1
    inv = {v: k for k, v in cat.word_index.items()}
    assert [inv[t] for t in cat.entries["A"].title_tokens] == ["first", "title"]
    assert "duplicate" in caplog.text


def test_tokenize_rules():
    assert tokenize("Hello, World!  It's 2019") == ["hello", "world", "it", "s", "2019"]
    assert tokenize("") == []


# -- behaviors ----------------------------------------------------------------
def test_behaviors_counts_match_manual_count():
    cat = parse_news(DATA / "news5.tsv")
    train = parse_behaviors(DATA / "behaviors10.tsv", cat, 50, "train")
    ev = parse_behaviors(DATA / "behaviors10.tsv", cat, 50, "eval")
    # counted by hand from the fixture: rows 2, 6 and 8 have no click
    assert [imp.impression_id for imp in train] == ["1", "3", "4", "5", "7", "9", "10"]
    assert len(ev) == 10
    pos = lambda logs: sum(l for imp in logs for _, l in imp.candidates)
    neg = lambda logs: sum(1 - l for imp in logs for _, l in imp.candidates)
    assert (pos(train), neg(train)) == (9, 9)
    assert (pos(ev), neg(ev)) == (9, 15)
    cold = next(imp for imp in train if imp.impression_id == "3")
    assert cold.history == ()


def test_candidate_field_format(tmp_path):
    cat = parse_news(DATA / "news5.tsv")
    p = tmp_path / "b.tsv"
    p.write_text("7\tU\tt\tN4\tN1-1 N2-0 N3-0\n")
    (imp,) = parse_behaviors(p, cat)
    assert imp.candidates == (("N1", 1), ("N2", 0), ("N3", 0))


def test_history_keeps_latest(tmp_path):
    ids = [f"N{i}" for i in range(60)]
    news = tmp_path / "n.tsv"
    news.write_text("".join(_news_line(n, n) for n in ids))
    cat = parse_news(news)
    b = tmp_path / "b.tsv"
    b.write_text(f"1\tU\tt\t{' '.join(ids)}\tN0-1 N1-0\n")
    (imp,) = parse_behaviors(b, cat, L_his=50)
    assert imp.history == tuple(ids[10:])


def test_unlabeled_candidate_rejected_in_train_mode(tmp_path):
    cat = parse_news(DATA / "news5.tsv")
    p = tmp_path / "b.tsv"
    p.write_text("1\tU\tt\tN1\tN2 N3-1\n")
    with pytest.raises(ParseError):
        parse_behaviors(p, cat, mode="train")
    (imp,) = parse_behaviors(p, cat, mode="eval")
    assert imp.candidates == (("N2", 0), ("N3", 1))


def test_unknown_news_id_rejected(tmp_path):
    cat = parse_news(DATA / "news5.tsv")
    p = tmp_path / "b.tsv"
    p.write_text("1\tU\tt\tN1 N99\tN2-1\n")
    with pytest.raises(ParseError, match="N99"):
        parse_behaviors(p, cat)


@settings(max_examples=50, deadline=None)
@given(n_words=st.integers(0, 60), n_hist=st.integers(0, 80),
       L_title=st.integers(1, 40), L_his=st.integers(1, 60))
def test_truncation_keeps_title_prefix_and_history_suffix(tmp_path_factory, n_words, n_hist, L_title, L_his):
    d = tmp_path_factory.mktemp("trunc")
    ids = [f"H{i}" for i in range(max(n_hist, 1))]
    words = [f"w{i}" for i in range(n_words)]
    (d / "n.tsv").write_text(_news_line("T", " ".join(words)) + "".join(_news_line(n, n) for n in ids))
    cat = parse_news(d / "n.tsv", L_title=L_title)
    inv = {v: k for k, v in cat.word_index.items()}
    assert [inv[t] for t in cat.entries["T"].title_tokens] == words[:L_title]
    hist = ids[:n_hist]
    (d / "b.tsv").write_text(f"1\tU\tt\t{' '.join(hist)}\tT-1\n")
    (imp,) = parse_behaviors(d / "b.tsv", cat, L_his=L_his)
    assert list(imp.history) == hist[max(0, len(hist) - L_his):]


# -- embeddings ----------------------------------------------------------------
def test_load_embeddings_copies_file_rows():
    index = {"cowboys": 1, "nfl": 2, "stocks": 3, "missing": 4}
    t = load_embeddings(DATA / "glove4.txt", index, 4, seed=7)
    np.testing.assert_array_equal(t.lookup("cowboys"), [0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(t.lookup("stocks"), [-1.5, 2.25, 0.0, 1e-3])
    np.testing.assert_array_equal(t.lookup("nfl"), [7, 8, 9, 10])
    assert np.all(t.rows[0] == 0)
    np.testing.assert_array_equal(t.lookup("never-indexed"), np.zeros(4))
    assert list(t.pretrained) == [False, True, True, True, False]


def test_absent_symbols_seeded_uniform():
    index = {f"s{i}": i + 1 for i in range(50)}
    a = load_embeddings(DATA / "glove4.txt", index, 4, seed=3)
    b = load_embeddings(DATA / "glove4.txt", index, 4, seed=3)
    np.testing.assert_array_equal(a.rows, b.rows)
    assert np.all(np.abs(a.rows[1:]) <= 0.1)
    assert a.rows[1:].std() > 0.03


def test_embedding_dimension_mismatch_names_symbol(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("good 1 2 3\nbad 1 2\n")
    with pytest.raises(ParseError, match="bad"):
        load_embeddings(p, {"good": 1}, 3)
    p.write_text("wide 1 2 3 4\ngood 1 2 3\n")
    with pytest.raises(ParseError, match="wide"):
        load_embeddings(p, {"good": 1}, 3)


def test_embedding_multiword_tokens_are_skipped(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("good 1 2 3\n. . 4 5 6\nfine 7 8 9\n")
    t = load_embeddings(p, {"good": 1, "fine": 2}, 3)
    np.testing.assert_array_equal(t.rows[2], [7, 8, 9])


def test_records_reference_valid_rows(bundle):
    for rec in bundle.catalog.entries.values():
        assert all(0 < t < bundle.word_table.vocab_size for t in rec.title_tokens)
        assert all(0 < e < bundle.entity_table.vocab_size for e in rec.entity_ids)
        assert len(rec.title_tokens) <= 30 and len(rec.entity_ids) <= 5


def test_reparse_is_byte_identical(corpus):
    args = (corpus["news"], corpus["behaviors"], corpus["word_emb"], corpus["entity_emb"])
    a = to_bytes(build_bundle(*args, word_dim=16, entity_dim=8, seed=5))
    b = to_bytes(build_bundle(*args, word_dim=16, entity_dim=8, seed=5))
    assert a == b


def test_bundle_round_trip(bundle):
    data = to_bytes(bundle)
    assert data[:4] == b"GLRY"
    back = from_bytes(data)
    assert back.catalog.entries == bundle.catalog.entries
    assert back.catalog.word_index == bundle.catalog.word_index
    assert back.catalog.entity_index == bundle.catalog.entity_index
    assert back.train_logs == bundle.train_logs
    assert back.eval_logs == bundle.eval_logs
    np.testing.assert_array_equal(back.word_table.rows, bundle.word_table.rows)
    np.testing.assert_array_equal(back.entity_table.pretrained, bundle.entity_table.pretrained)
    assert back.meta == bundle.meta
    assert to_bytes(back) == data
