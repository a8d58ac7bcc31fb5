"""Global news/entity click graphs and per-sample neighborhood queries."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .binio import BlockReader, BlockWriter, FormatError

NEWS_VARIANTS = ("dir-seq", "undir-seq", "co-occur")
ENTITY_VARIANTS = ("intra+inter-dir", "intra+inter-undir", "inter-dir", "inter-undir")

MAGIC = b"GGPH"
VERSION = 1


@dataclass
class ClickGraph:
    """Weighted adjacency; each neighbor list sorted by (-weight, node-id)."""

    directed: bool
    variant: str
    adjacency: dict[str, list[tuple[str, int]]] = field(default_factory=dict)

    @classmethod
    def from_counts(cls, counts: Counter, directed: bool, variant: str) -> "ClickGraph":
        adj: dict[str, list[tuple[str, int]]] = {}
        for (src, dst), w in counts.items():
            adj.setdefault(src, []).append((dst, w))
        for nbrs in adj.values():
            nbrs.sort(key=lambda t: (-t[1], t[0]))
        return cls(directed, variant, dict(sorted(adj.items())))

    def neighbors(self, node: str) -> list[tuple[str, int]]:
        return self.adjacency.get(node, [])

    def top_neighbors(self, node: str, m: int) -> list[str]:
        return [n for n, _ in self.adjacency.get(node, [])[:m]]

    def edges(self) -> dict[tuple[str, str], int]:
        return {(u, v): w for u, nbrs in self.adjacency.items() for v, w in nbrs}

    def nodes(self) -> list[str]:
        out = set(self.adjacency)
        for nbrs in self.adjacency.values():
            out.update(n for n, _ in nbrs)
        return sorted(out)

    @property
    def num_edges(self) -> int:
        """Number of stored directed edges (an undirected edge counts twice)."""
        return sum(len(v) for v in self.adjacency.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, ClickGraph):
            return NotImplemented
        return (self.directed == other.directed and self.variant == other.variant
                and self.adjacency == other.adjacency)


@dataclass(frozen=True)
class SubGraph:
    nodes: tuple[str, ...]
    edges: tuple[tuple[int, int, int], ...]  # (src-pos, dst-pos, weight)
    history_positions: tuple[int, ...]


def _histories(logs, unique: bool):
    if not unique:
        return [imp.history for imp in logs]
    # MIND repeats a user's history on every impression row; count each once
    seen = set()
    out = []
    for imp in logs:
        key = (imp.user_id, imp.history)
        if key not in seen:
            seen.add(key)
            out.append(imp.history)
    return out


def _add(counts: Counter, u, v, symmetric: bool) -> None:
    if u == v:
        return
    counts[(u, v)] += 1
    if symmetric:
        counts[(v, u)] += 1


def build_news_graph(logs, variant: str = "dir-seq", unique_histories: bool = True) -> ClickGraph:
    """Global news graph from training-split histories.

    ``dir-seq`` links each history item to the next one, ``undir-seq``
    stores the same pairs in both directions, and ``co-occur`` links every
    unordered pair within a history. Weights count occurrences; self-loops
    are skipped.
    """
    if variant not in NEWS_VARIANTS:
        raise ValueError(f"unknown news-graph variant {variant!r}; valid: {', '.join(NEWS_VARIANTS)}")
    counts: Counter = Counter()
    for hist in _histories(logs, unique_histories):
        if variant == "co-occur":
            for a, b in combinations(hist, 2):
                _add(counts, a, b, True)
        else:
            for a, b in zip(hist, hist[1:]):
                _add(counts, a, b, variant == "undir-seq")
    return ClickGraph.from_counts(counts, variant == "dir-seq", variant)


def build_entity_graph(logs, catalog, variant: str = "inter-undir",
                       unique_histories: bool = True) -> ClickGraph:
    """Global entity graph induced by consecutive news transitions.

    Every entity of ``d_i`` is linked to every entity of ``d_{i+1}``;
    ``intra`` variants also link all entity pairs inside each clicked
    article (symmetrically, once per click).
    """
    if variant not in ENTITY_VARIANTS:
        raise ValueError(f"unknown entity-graph variant {variant!r}; valid: {', '.join(ENTITY_VARIANTS)}")
    symmetric = variant.endswith("undir")
    intra = variant.startswith("intra")
    inv = catalog.inverse_entity_index()
    ent_cache: dict[str, list[str]] = {}

    def ents(nid):
        if nid not in ent_cache:
            ent_cache[nid] = [inv[i] for i in catalog.entries[nid].entity_ids]
        return ent_cache[nid]

    counts: Counter = Counter()
    for hist in _histories(logs, unique_histories):
        if intra:
            for nid in hist:
                for a, b in combinations(ents(nid), 2):
                    _add(counts, a, b, True)
        for prev, nxt in zip(hist, hist[1:]):
            if prev == nxt:
                continue
            for a in ents(prev):
                for b in ents(nxt):
                    _add(counts, a, b, symmetric)
    return ClickGraph.from_counts(counts, not symmetric, variant)


def extract_news_subgraph(graph: ClickGraph, history, K: int, M_n: int) -> SubGraph:
    """K-hop neighborhood of a click history, top-``M_n`` neighbors per node.

    History nodes come first (deduplicated, in click order), then nodes in
    discovery order. Edges are every global edge among the selected nodes.
    """
    if K < 0 or M_n < 1:
        raise ValueError("need K >= 0 and M_n >= 1")
    pos: dict[str, int] = {}
    nodes: list[str] = []
    for nid in history:
        if nid not in pos:
            pos[nid] = len(nodes)
            nodes.append(nid)
    frontier = list(nodes)
    for _ in range(K):
        nxt = []
        for nid in frontier:
            for nbr in graph.top_neighbors(nid, M_n):
                if nbr not in pos:
                    pos[nbr] = len(nodes)
                    nodes.append(nbr)
                    nxt.append(nbr)
        if not nxt:
            break
        frontier = nxt
    edges = []
    for i, nid in enumerate(nodes):
        for nbr, w in graph.neighbors(nid):
            j = pos.get(nbr)
            if j is not None:
                edges.append((i, j, w))
    return SubGraph(tuple(nodes), tuple(edges), tuple(pos[n] for n in history))


def select_adjacent_entities(graph: ClickGraph, candidate_entities, M_e: int) -> list[str]:
    """Top-``M_e`` neighbors of each candidate entity, concatenated in entity order."""
    if M_e < 1:
        raise ValueError("M_e must be >= 1")
    out: list[str] = []
    for ent in candidate_entities:
        out.extend(graph.top_neighbors(ent, M_e))
    return out


def graph_to_bytes(graph: ClickGraph) -> bytes:
    w = BlockWriter(MAGIC, VERSION)
    w.string(graph.variant)
    w.u32(int(graph.directed))
    nodes = graph.nodes()
    idx = {n: i for i, n in enumerate(nodes)}
    w.strings(nodes)
    indptr = [0]
    indices: list[int] = []
    weights: list[int] = []
    for n in nodes:
        for nbr, wt in graph.neighbors(n):
            indices.append(idx[nbr])
            weights.append(wt)
        indptr.append(len(indices))
    w.array(np.array(indptr, dtype=np.int64))
    w.array(np.array(indices, dtype=np.int64))
    w.array(np.array(weights, dtype=np.int64))
    return w.getvalue()


def graph_from_bytes(data: bytes) -> ClickGraph:
    r = BlockReader(data, MAGIC, (VERSION,))
    variant = r.string()
    directed = bool(r.u32())
    nodes = r.strings()
    indptr, indices, weights = r.array(), r.array(), r.array()
    if len(indptr) != len(nodes) + 1 or not r.at_end():
        raise FormatError("inconsistent GGPH layout")
    adj = {}
    for i, n in enumerate(nodes):
        lo, hi = indptr[i], indptr[i + 1]
        if hi > lo:
            adj[n] = [(nodes[j], int(wt)) for j, wt in zip(indices[lo:hi], weights[lo:hi])]
    return ClickGraph(directed, variant, adj)


def save_graph(graph: ClickGraph, path) -> None:
    with open(path, "wb") as fh:
        fh.write(graph_to_bytes(graph))


def load_graph(path) -> ClickGraph:
    with open(path, "rb") as fh:
        return graph_from_bytes(fh.read())
