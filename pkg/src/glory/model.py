"""The recommender network: local encoders, global news/entity views, user encoder, scoring."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import HyperParams
from .graphs import ClickGraph, SubGraph, extract_news_subgraph, select_adjacent_entities
from .numerics import (AttentionParams, GruParams, PoolParams, Tensor, attention_pool, attention_weights,
                       gru_cell, log_softmax, matmul, mean, multi_head_self_attention, segment_sum,
                       stack, tanh)
from .numerics.layers import glorot
from .numerics.tensor import index, mul, reshape

# fixed stream ids so a component's initial values do not depend on which
# other components the ablation flags switch on
_STREAMS = {"emb": 0, "news": 1, "ent": 2, "graph": 3, "hist": 4, "user": 5, "gent": 6, "cand": 7}


@dataclass
class Batch:
    """Index arrays for one batch; ``uniq`` rows are catalog rows (0 = pad news)."""

    uniq: np.ndarray
    titles: np.ndarray
    entities: np.ndarray
    hist_idx: np.ndarray
    hist_mask: np.ndarray
    cand_idx: np.ndarray
    cand_mask: np.ndarray
    labels: np.ndarray
    node_idx: np.ndarray | None = None
    edge_src: np.ndarray | None = None
    edge_dst: np.ndarray | None = None
    hist_node: np.ndarray | None = None
    adj_entities: np.ndarray | None = None
    cand_adj_idx: np.ndarray | None = None
    impression_ids: list = field(default_factory=list)
    candidate_ids: list = field(default_factory=list)


class Featurizer:
    """Turns (history, candidates) samples into :class:`Batch` index arrays.

    Subgraphs and adjacent-entity lists are cached per history / per news.
    Graphs are only consulted when the matching global view is enabled.
    """

    def __init__(self, catalog, hp: HyperParams, news_graph: ClickGraph | None = None,
                 entity_graph: ClickGraph | None = None):
        self.hp = hp
        self.catalog = catalog
        self.news_row = {nid: i + 1 for i, nid in enumerate(catalog.entries)}
        n = len(catalog.entries) + 1
        self.titles = np.zeros((n, hp.L_title), dtype=np.int64)
        self.entities = np.zeros((n, hp.L_entity), dtype=np.int64)
        for nid, row in self.news_row.items():
            rec = catalog.entries[nid]
            t = rec.title_tokens[:hp.L_title]
            e = rec.entity_ids[:hp.L_entity]
            self.titles[row, :len(t)] = t
            self.entities[row, :len(e)] = e
        self.news_graph = news_graph if hp.use_global_news else None
        self.entity_graph = entity_graph if hp.use_global_entity else None
        if hp.use_global_news and news_graph is None:
            raise ValueError("use_global_news requires a news graph")
        if hp.use_global_entity and entity_graph is None:
            raise ValueError("use_global_entity requires an entity graph")
        self._subgraphs: dict[tuple, SubGraph] = {}
        self._adjacent: dict[str, np.ndarray] = {}

    def subgraph(self, history) -> SubGraph:
        key = tuple(history)
        sg = self._subgraphs.get(key)
        if sg is None:
            sg = extract_news_subgraph(self.news_graph, key, self.hp.K, self.hp.M_n)
            self._subgraphs[key] = sg
        return sg

    def adjacent_entity_rows(self, news_id: str) -> np.ndarray:
        rows = self._adjacent.get(news_id)
        if rows is None:
            syms = self.catalog.entity_symbols(news_id)
            adj = select_adjacent_entities(self.entity_graph, syms, self.hp.M_e)
            idx = self.catalog.entity_index
            rows = np.array([idx.get(s, 0) for s in adj], dtype=np.int64)
            self._adjacent[news_id] = rows
        return rows

    def batch(self, samples) -> Batch:
        """``samples``: iterable of (impression_id, history, candidate_ids, labels)."""
        samples = list(samples)
        hp = self.hp
        B = len(samples)
        C = max((len(s[2]) for s in samples), default=0)
        uniq_pos = {0: 0}

        def u(row):
            p = uniq_pos.get(row)
            if p is None:
                p = uniq_pos[row] = len(uniq_pos)
            return p

        hist_idx = np.zeros((B, hp.L_his), dtype=np.int64)
        hist_mask = np.zeros((B, hp.L_his), dtype=bool)
        cand_idx = np.zeros((B, C), dtype=np.int64)
        cand_mask = np.zeros((B, C), dtype=bool)
        labels = np.zeros((B, C), dtype=np.int64)
        for b, (_, history, cands, labs) in enumerate(samples):
            history = list(history)[-hp.L_his:]
            for i, nid in enumerate(history):
                hist_idx[b, i] = u(self.news_row[nid])
                hist_mask[b, i] = True
            for i, nid in enumerate(cands):
                cand_idx[b, i] = u(self.news_row[nid])
                cand_mask[b, i] = True
            labels[b, :len(labs)] = labs

        out = Batch(uniq=np.zeros(0, dtype=np.int64), titles=None, entities=None,
                    hist_idx=hist_idx, hist_mask=hist_mask, cand_idx=cand_idx,
                    cand_mask=cand_mask, labels=labels,
                    impression_ids=[s[0] for s in samples],
                    candidate_ids=[list(s[2]) for s in samples])

        if self.news_graph is not None:
            node_idx, src, dst = [], [], []
            hist_node = np.zeros((B, hp.L_his), dtype=np.int64)
            for b, (_, history, _, _) in enumerate(samples):
                history = list(history)[-hp.L_his:]
                if not history:
                    continue
                sg = self.subgraph(history)
                off = len(node_idx)
                node_idx.extend(u(self.news_row[nid]) for nid in sg.nodes)
                for s, d, _w in sg.edges:
                    src.append(off + s)
                    dst.append(off + d)
                hist_node[b, :len(history)] = [off + p for p in sg.history_positions]
            out.node_idx = np.array(node_idx, dtype=np.int64)
            out.edge_src = np.array(src, dtype=np.int64)
            out.edge_dst = np.array(dst, dtype=np.int64)
            out.hist_node = hist_node

        if self.entity_graph is not None:
            width = max(hp.L_entity * hp.M_e, 1)
            cand_rows = {}
            adj = []
            cand_adj_idx = np.zeros((B, C), dtype=np.int64)
            for b, (_, _, cands, _) in enumerate(samples):
                for i, nid in enumerate(cands):
                    p = cand_rows.get(nid)
                    if p is None:
                        p = cand_rows[nid] = len(adj)
                        rows = self.adjacent_entity_rows(nid)[:width]
                        padded = np.zeros(width, dtype=np.int64)
                        padded[:len(rows)] = rows
                        adj.append(padded)
                    cand_adj_idx[b, i] = p
            out.adj_entities = np.array(adj, dtype=np.int64).reshape(-1, width)
            out.cand_adj_idx = cand_adj_idx

        uniq = np.empty(len(uniq_pos), dtype=np.int64)
        for row, p in uniq_pos.items():
            uniq[p] = row
        out.uniq = uniq
        out.titles = self.titles[uniq]
        out.entities = self.entities[uniq]
        return out


class GloryModel:
    def __init__(self, hp: HyperParams, word_table: np.ndarray, entity_table: np.ndarray,
                 seed: int = 0, dtype=np.float32):
        hp.validate()
        self.hp = hp
        self.dtype = np.dtype(dtype)
        self.training = False
        self.dropout = 0.0
        self._drop_rng = np.random.default_rng(seed + 1)

        def rng(component):
            return np.random.default_rng([seed, _STREAMS[component]])

        d, dw, de, a = hp.d_model, hp.word_dim, hp.entity_dim, hp.pool_dim
        dt = self.dtype
        if word_table.shape[1] != dw or entity_table.shape[1] != de:
            raise ValueError(f"embedding widths {word_table.shape[1]}/{entity_table.shape[1]} "
                             f"do not match word_dim={dw}/entity_dim={de}")
        self.word_emb = Tensor(np.array(word_table, dtype=dt), requires_grad=True, name="word_emb")
        self.entity_emb = Tensor(np.array(entity_table, dtype=dt), requires_grad=True, name="entity_emb")
        self.word_emb.values[0] = 0
        self.entity_emb.values[0] = 0

        r = rng("news")
        self.news_msa = AttentionParams.init(r, dw, hp.heads, "news_msa.", dt)
        self.news_pool = PoolParams.init(r, dw, a, "news_pool.", dt)
        self.news_lift = Tensor(glorot(r, dw, d, dt), True, "news_lift")
        r = rng("ent")
        self.ent_msa = AttentionParams.init(r, de, hp.heads, "ent_msa.", dt)
        self.ent_pool = PoolParams.init(r, de, a, "ent_pool.", dt)
        self.ent_lift = Tensor(glorot(r, de, d, dt), True, "ent_lift")
        if hp.use_global_news:
            r = rng("graph")
            self.W_g = Tensor(glorot(r, d, d, dt), True, "ggnn.W_g")
            if hp.graph_encoder == "ggnn":
                self.gru = GruParams.init(r, d, "ggnn.gru.", dt)
        r = rng("hist")
        self.hist_agg = PoolParams.init(r, d, a, "hist_agg.", dt)
        r = rng("user")
        self.user_msa = AttentionParams.init(r, d, hp.heads, "user_msa.", dt)
        self.user_pool = PoolParams.init(r, d, a, "user_pool.", dt)
        if hp.use_global_entity:
            r = rng("gent")
            self.gent_msa = AttentionParams.init(r, de, hp.heads, "gent_msa.", dt)
            self.gent_pool = PoolParams.init(r, de, a, "gent_pool.", dt)
            self.gent_lift = Tensor(glorot(r, de, d, dt), True, "gent_lift")
        r = rng("cand")
        self.cand_agg = PoolParams.init(r, d, a, "cand_agg.", dt)

    # -- parameters ---------------------------------------------------------
    def parameters(self) -> dict[str, Tensor]:
        hp = self.hp
        out = {"word_emb": self.word_emb, "entity_emb": self.entity_emb}
        out.update(self.news_msa.named("news_msa."))
        out.update(self.news_pool.named("news_pool."))
        out["news_lift"] = self.news_lift
        out.update(self.ent_msa.named("ent_msa."))
        out.update(self.ent_pool.named("ent_pool."))
        out["ent_lift"] = self.ent_lift
        if hp.use_global_news:
            out["ggnn.W_g"] = self.W_g
            if hp.graph_encoder == "ggnn":
                out.update(self.gru.named("ggnn.gru."))
        out.update(self.hist_agg.named("hist_agg."))
        out.update(self.user_msa.named("user_msa."))
        out.update(self.user_pool.named("user_pool."))
        if hp.use_global_entity:
            out.update(self.gent_msa.named("gent_msa."))
            out.update(self.gent_pool.named("gent_pool."))
            out["gent_lift"] = self.gent_lift
        out.update(self.cand_agg.named("cand_agg."))
        return out

    def num_parameters(self) -> int:
        return sum(p.values.size for p in self.parameters().values())

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.values for k, v in self.parameters().items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        missing = set(params) ^ set(arrays)
        if missing:
            raise KeyError(f"parameter set mismatch: {sorted(missing)}")
        for k, p in params.items():
            if p.shape != arrays[k].shape:
                raise ValueError(f"shape mismatch for {k}: {p.shape} vs {arrays[k].shape}")
            p.values[...] = arrays[k]

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    # -- encoders -----------------------------------------------------------
    def _embed(self, table: Tensor, ids) -> Tensor:
        x = index(table, np.asarray(ids))
        if self.training and self.dropout > 0:
            keep = self._drop_rng.random(x.shape) >= self.dropout
            x = mul(x, keep.astype(self.dtype) / (1.0 - self.dropout))
        return x

    def _encode_sequence(self, table, ids, msa, pool, lift) -> Tensor:
        ids = np.asarray(ids)
        mask = ids != 0
        x = self._embed(table, ids)
        X = multi_head_self_attention(x, msa, mask)
        return matmul(attention_pool(X, pool, mask), lift)

    def encode_local_news(self, title_tokens) -> Tensor:
        """Title token rows ([..., L_title], 0 = pad) to local news vectors."""
        return self._encode_sequence(self.word_emb, title_tokens, self.news_msa, self.news_pool, self.news_lift)

    def encode_local_entities(self, entity_ids) -> Tensor:
        return self._encode_sequence(self.entity_emb, entity_ids, self.ent_msa, self.ent_pool, self.ent_lift)

    def encode_global_entities(self, adjacent_entity_ids) -> Tensor:
        return self._encode_sequence(self.entity_emb, adjacent_entity_ids, self.gent_msa, self.gent_pool,
                                     self.gent_lift)

    def encode_graph_nodes(self, H: Tensor, edge_src, edge_dst) -> Tensor:
        """Message passing over node rows ``H`` ([N, d_model]) for ``ggnn_layers`` rounds."""
        hp = self.hp
        n = H.shape[0]
        src = np.asarray(edge_src, dtype=np.int64)
        dst = np.asarray(edge_dst, dtype=np.int64)
        if hp.message_direction == "in":
            senders, receivers = src, dst
        elif hp.message_direction == "out":
            senders, receivers = dst, src
        else:
            senders, receivers = np.concatenate([src, dst]), np.concatenate([dst, src])
        if hp.graph_encoder == "mean":
            deg = np.bincount(receivers, minlength=n).astype(self.dtype)[:, None] + 1.0
        for _ in range(hp.ggnn_layers):
            if hp.graph_encoder == "ggnn":
                HW = matmul(H, self.W_g)
                m = segment_sum(index(HW, senders), receivers, n)
                H = gru_cell(m, H, self.gru)
            else:
                total = H + segment_sum(index(H, senders), receivers, n)
                H = tanh(matmul(mul(total, 1.0 / deg), self.W_g))
        return H

    def encode_history_graph(self, subgraph: SubGraph, local_vectors) -> Tensor:
        """Global-view vectors for the history positions of one subgraph."""
        H = local_vectors if isinstance(local_vectors, Tensor) else Tensor(np.asarray(local_vectors, self.dtype))
        src = [e[0] for e in subgraph.edges]
        dst = [e[1] for e in subgraph.edges]
        H = self.encode_graph_nodes(H, src, dst)
        return index(H, np.asarray(subgraph.history_positions, dtype=np.int64))

    def aggregate_historical_news(self, h_ln, h_le, h_gn=None) -> Tensor:
        views = [h_ln, h_le] + ([h_gn] if self.hp.use_global_news else [])
        return attention_pool(stack(views, axis=-2), self.hist_agg)

    def aggregate_candidate_news(self, h_ln, h_le, h_ge=None) -> Tensor:
        views = [h_ln, h_le] + ([h_ge] if self.hp.use_global_entity else [])
        return attention_pool(stack(views, axis=-2), self.cand_agg)

    def view_weights(self, which: str, views) -> np.ndarray:
        pool = self.hist_agg if which == "hist" else self.cand_agg
        return attention_weights(stack(views, axis=-2), pool).values

    def encode_user(self, news_vectors, mask=None) -> Tensor:
        X = multi_head_self_attention(news_vectors, self.user_msa, mask)
        return attention_pool(X, self.user_pool, mask)

    @staticmethod
    def score(emb_user: Tensor, emb_cand: Tensor) -> Tensor:
        """Inner products: user [..., d] x candidates [..., C, d] -> [..., C]."""
        u = reshape(emb_user, (*emb_user.shape, 1))
        s = matmul(emb_cand, u)
        return reshape(s, s.shape[:-1])

    @staticmethod
    def nce_loss(scores: Tensor, positive_index: int = 0) -> Tensor:
        """Mean over rows of -log softmax(scores)[positive_index]."""
        lp = log_softmax(scores, axis=-1)
        if lp.ndim == 1:
            return mul(lp[positive_index], -1.0)
        return mul(mean(lp[:, positive_index]), -1.0)

    # -- batched forward ----------------------------------------------------
    def forward(self, batch: Batch) -> Tensor:
        """Scores [B, C] for a prepared batch."""
        hp = self.hp
        h_ln_u = self.encode_local_news(batch.titles)
        h_le_u = self.encode_local_entities(batch.entities)

        h_ln = index(h_ln_u, batch.hist_idx)
        h_le = index(h_le_u, batch.hist_idx)
        h_gn = None
        if hp.use_global_news:
            if len(batch.node_idx):
                H = self.encode_graph_nodes(index(h_ln_u, batch.node_idx), batch.edge_src, batch.edge_dst)
                h_gn = index(H, batch.hist_node)
            else:
                h_gn = Tensor(np.zeros(h_ln.shape, dtype=self.dtype))
        news = self.aggregate_historical_news(h_ln, h_le, h_gn)
        user = self.encode_user(news, batch.hist_mask)

        c_ln = index(h_ln_u, batch.cand_idx)
        c_le = index(h_le_u, batch.cand_idx)
        c_ge = None
        if hp.use_global_entity:
            ge = self.encode_global_entities(batch.adj_entities)
            c_ge = index(ge, batch.cand_adj_idx)
        cand = self.aggregate_candidate_news(c_ln, c_le, c_ge)
        return self.score(user, cand)

    def loss(self, batch: Batch) -> Tensor:
        return self.nce_loss(self.forward(batch), 0)

    def predict(self, batch: Batch) -> np.ndarray:
        was = self.training
        self.training = False
        try:
            return self.forward(batch).values.copy()
        finally:
            self.training = was
