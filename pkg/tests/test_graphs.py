import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glory.graphs import (ENTITY_VARIANTS, NEWS_VARIANTS, ClickGraph, build_entity_graph, build_news_graph,
                          extract_news_subgraph, graph_from_bytes, graph_to_bytes, select_adjacent_entities)
from glory.ingest import ImpressionLog, NewsCatalog, NewsRecord

from .oracles import entity_graph_oracle, news_graph_oracle, subgraph_nodes_oracle, top_m


def logs_from(histories):
    return [ImpressionLog(str(i), f"U{i}", tuple(h), (("X", 1),)) for i, h in enumerate(histories)]


def catalog_from(entities_of):
    cat = NewsCatalog()
    for nid, ents in entities_of.items():
        ids = tuple(cat.entity_index.setdefault(e, len(cat.entity_index) + 1) for e in ents)
        cat.entries[nid] = NewsRecord((), ids, "c", "s")
    return cat


def random_world(rnd, max_users=10, max_news=20, max_entities=30):
    news = [f"n{i:02d}" for i in range(rnd.randint(2, max_news))]
    ents = [f"e{i:02d}" for i in range(rnd.randint(1, max_entities))]
    entities_of = {n: rnd.sample(ents, rnd.randint(0, min(5, len(ents)))) for n in news}
    histories = [[rnd.choice(news) for _ in range(rnd.randint(0, 8))] for _ in range(rnd.randint(1, max_users))]
    return histories, entities_of


def test_single_pair():
    g = build_news_graph(logs_from([["A", "B"]]), "dir-seq")
    assert g.edges() == {("A", "B"): 1}
    assert g.directed


def test_frequency_counting():
    g = build_news_graph(logs_from([["A", "B", "C"], ["B", "C"]]), "dir-seq")
    assert g.edges() == {("A", "B"): 1, ("B", "C"): 2}


def test_consecutive_duplicates_skipped():
    g = build_news_graph(logs_from([["A", "A", "B"]]), "dir-seq")
    assert g.edges() == {("A", "B"): 1}


def test_empty_logs_give_empty_graph():
    assert build_news_graph([], "dir-seq").edges() == {}


def test_unknown_variant():
    with pytest.raises(ValueError, match="dir-seq"):
        build_news_graph([], "bogus")


@pytest.mark.parametrize("variant", NEWS_VARIANTS)
def test_news_graph_matches_oracle_small(variant):
    rnd = random.Random(7)
    news = [f"n{i}" for i in range(6)]
    hists = [[rnd.choice(news) for _ in range(5)] for _ in range(3)]
    g = build_news_graph(logs_from(hists), variant)
    assert g.edges() == news_graph_oracle(hists, variant)


def test_entity_graph_cross_product():
    cat = catalog_from({"n1": ["e1"], "n2": ["e2", "e3"]})
    logs = logs_from([["n1", "n2"]])
    g = build_entity_graph(logs, cat, "inter-undir")
    assert g.edges() == {("e1", "e2"): 1, ("e2", "e1"): 1, ("e1", "e3"): 1, ("e3", "e1"): 1}
    g2 = build_entity_graph(logs, cat, "intra+inter-undir")
    assert g2.edges() == {**g.edges(), ("e2", "e3"): 1, ("e3", "e2"): 1}
    g3 = build_entity_graph(logs, cat, "inter-dir")
    assert g3.edges() == {("e1", "e2"): 1, ("e1", "e3"): 1}


def test_news_without_entities_contributes_nothing():
    cat = catalog_from({"n1": [], "n2": ["e2"]})
    assert build_entity_graph(logs_from([["n1", "n2"]]), cat, "inter-undir").edges() == {}


@pytest.mark.parametrize("seed", range(5))
def test_entity_graph_matches_oracle(seed):
    rnd = random.Random(seed)
    hists, ents = random_world(rnd, max_users=3)
    cat = catalog_from(ents)
    for variant in ENTITY_VARIANTS:
        g = build_entity_graph(logs_from(hists), cat, variant)
        assert g.edges() == entity_graph_oracle(hists, ents, variant), variant


def test_undirected_twice_directed_without_reciprocal_pairs():
    cat = catalog_from({"a": ["e1", "e2"], "b": ["e3"], "c": ["e4", "e5"]})
    logs = logs_from([["a", "b", "c"], ["a", "c"]])
    d = build_entity_graph(logs, cat, "inter-dir")
    u = build_entity_graph(logs, cat, "inter-undir")
    assert u.num_edges == 2 * d.num_edges


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_graph_invariants(seed):
    rnd = random.Random(seed)
    hists, ents = random_world(rnd)
    logs = logs_from(hists)
    d = build_news_graph(logs, "dir-seq")
    # conservation: total weight = consecutive non-duplicate pairs
    assert sum(d.edges().values()) == sum(1 for h in hists for a, b in zip(h, h[1:]) if a != b)
    # undir-seq is the symmetrization of dir-seq
    u = build_news_graph(logs, "undir-seq")
    sym = {}
    for (a, b), w in d.edges().items():
        sym[(a, b)] = sym.get((a, b), 0) + w
        sym[(b, a)] = sym.get((b, a), 0) + w
    assert u.edges() == sym
    # order independence
    shuffled = logs[:]
    rnd.shuffle(shuffled)
    for variant in NEWS_VARIANTS:
        assert build_news_graph(shuffled, variant) == build_news_graph(logs, variant)
    cat = catalog_from(ents)
    for variant in ENTITY_VARIANTS:
        g = build_entity_graph(logs, cat, variant)
        assert g == build_entity_graph(shuffled, cat, variant)
        for (a, b), w in g.edges().items():
            assert a != b and w >= 1
        if variant.endswith("undir"):
            e = g.edges()
            assert all(e.get((b, a)) == w for (a, b), w in e.items())
    # co-occur covers every dir-seq pair
    co = build_news_graph(logs, "co-occur")
    assert co.num_edges >= d.num_edges


def test_adjacency_sorted_weight_then_id():
    g = build_news_graph(logs_from([["A", "C"], ["A", "B"], ["A", "D"], ["A", "D"]]), "dir-seq")
    assert g.neighbors("A") == [("D", 2), ("B", 1), ("C", 1)]


def test_repeated_user_rows_counted_once():
    rows = [ImpressionLog("1", "U", ("A", "B"), ()), ImpressionLog("2", "U", ("A", "B"), ())]
    assert build_news_graph(rows).edges() == {("A", "B"): 1}
    assert build_news_graph(rows, unique_histories=False).edges() == {("A", "B"): 2}


# -- subgraphs ------------------------------------------------------------------
def _weighted(edges):
    from collections import Counter
    return ClickGraph.from_counts(Counter(edges), True, "dir-seq")


def test_top_k_expansion():
    g = _weighted({("A", "B"): 5, ("A", "C"): 3, ("A", "D"): 1})
    sg = extract_news_subgraph(g, ["A"], K=1, M_n=2)
    assert set(sg.nodes) == {"A", "B", "C"}
    assert sg.nodes[0] == "A" and sg.history_positions == (0,)


def test_zero_hops_keeps_history_only():
    g = _weighted({("A", "B"): 5, ("B", "A"): 1, ("B", "C"): 2})
    sg = extract_news_subgraph(g, ["A", "B"], K=0, M_n=3)
    assert sg.nodes == ("A", "B")
    assert set(sg.edges) == {(0, 1, 5), (1, 0, 1)}


def test_unknown_history_nodes_are_isolated():
    g = _weighted({("A", "B"): 1})
    sg = extract_news_subgraph(g, ["Z", "A", "Z"], K=2, M_n=2)
    assert sg.nodes == ("Z", "A", "B")
    assert sg.history_positions == (0, 1, 0)
    assert sg.edges == ((1, 2, 1),)


@pytest.mark.parametrize("seed", range(10))
def test_subgraph_matches_bfs_oracle(seed):
    rnd = random.Random(seed)
    nodes = [f"v{i:02d}" for i in range(30)]
    edges = {}
    for _ in range(90):
        a, b = rnd.sample(nodes, 2)
        edges[(a, b)] = edges.get((a, b), 0) + rnd.randint(1, 4)
    g = _weighted(edges)
    hist = rnd.sample(nodes, 3)
    sg = extract_news_subgraph(g, hist, K=2, M_n=3)
    assert set(sg.nodes) == subgraph_nodes_oracle(edges, hist, 2, 3)
    pos = {n: i for i, n in enumerate(sg.nodes)}
    induced = {(pos[a], pos[b], w) for (a, b), w in edges.items() if a in pos and b in pos}
    assert set(sg.edges) == induced
    assert len(sg.nodes) <= len(hist) * (1 + 3 + 9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(0, 3), st.integers(1, 4))
def test_subgraph_fanout_bound(seed, K, M):
    rnd = random.Random(seed)
    hists, _ = random_world(rnd)
    g = build_news_graph(logs_from(hists), rnd.choice(NEWS_VARIANTS))
    hist = hists[0]
    sg = extract_news_subgraph(g, hist, K, M)
    assert len(sg.nodes) <= len(set(hist)) * sum(M ** k for k in range(K + 1))
    assert all(h in sg.nodes for h in hist)
    assert [sg.nodes[p] for p in sg.history_positions] == list(hist)


# -- adjacent entities ------------------------------------------------------------
def test_select_adjacent_top_k():
    g = _weighted({("e1", "e9"): 4, ("e1", "e2"): 2, ("e1", "e5"): 1})
    assert select_adjacent_entities(g, ["e1"], 2) == ["e9", "e2"]
    assert select_adjacent_entities(g, [], 2) == []
    assert select_adjacent_entities(g, ["zz"], 2) == []


@pytest.mark.parametrize("seed", range(5))
def test_select_adjacent_matches_sort_truncate(seed):
    rnd = random.Random(seed)
    ents = [f"e{i}" for i in range(10)]
    edges = {}
    for _ in range(40):
        a, b = rnd.sample(ents, 2)
        edges[(a, b)] = edges.get((a, b), 0) + rnd.randint(1, 5)
    g = _weighted(edges)
    cand = rnd.sample(ents, 2)
    assert select_adjacent_entities(g, cand, 3) == top_m(edges, cand[0], 3) + top_m(edges, cand[1], 3)


# -- serialization ------------------------------------------------------------------
@pytest.mark.parametrize("variant", NEWS_VARIANTS)
def test_graph_round_trip(variant):
    rnd = random.Random(3)
    hists, _ = random_world(rnd)
    g = build_news_graph(logs_from(hists), variant)
    data = graph_to_bytes(g)
    assert data[:4] == b"GGPH"
    back = graph_from_bytes(data)
    assert back == g
    assert graph_to_bytes(back) == data
