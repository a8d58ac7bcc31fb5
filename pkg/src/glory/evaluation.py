"""Ranking and diversity metrics, run evaluation and report files."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

RANK_METRICS = ("auc", "mrr", "ndcg5", "ndcg10")
DIVERSITY_METRICS = ("ilad5", "ilmd5", "ilad10", "ilmd10")
REPORT_VERSION = 1


def _ranking_order(scores, ids=None) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    ids = np.arange(len(scores)) if ids is None else np.asarray(ids)
    # descending score, ties by ascending id
    return np.lexsort((ids, -scores))


def ndcg_at(labels_in_rank_order, labels, n: int) -> float:
    gains = (2.0 ** np.asarray(labels_in_rank_order[:n], dtype=np.float64)) - 1.0
    disc = np.log2(np.arange(2, len(gains) + 2))
    dcg = float(np.sum(gains / disc))
    ideal = np.sort(np.asarray(labels, dtype=np.float64))[::-1][:n]
    idcg = float(np.sum((2.0 ** ideal - 1.0) / np.log2(np.arange(2, len(ideal) + 2))))
    return dcg / idcg if idcg > 0 else 0.0


def rank_metrics(scores, labels, ids=None) -> dict[str, float] | None:
    """AUC, MRR, nDCG@5 and nDCG@10 for one impression.

    Returns ``None`` when the impression has no positive (or no negative)
    candidate, since AUC is then undefined.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores)  # average ranks -> ties count 1/2
    auc = (ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    order = _ranking_order(scores, ids)
    ranked = labels[order]
    positions = np.nonzero(ranked)[0] + 1
    mrr = float(np.mean(1.0 / positions))
    return {"auc": float(auc), "mrr": mrr,
            "ndcg5": ndcg_at(ranked, labels, 5), "ndcg10": ndcg_at(ranked, labels, 10)}


def diversity_metrics(ranked_news_ids, N: int, semantic_vectors) -> dict[str, float] | None:
    """ILAD@N / ILMD@N with cosine distance over the top-``N`` items.

    Returns ``None`` (skip) for fewer than two items or a zero vector.
    """
    top = list(ranked_news_ids)[:N]
    if len(top) < 2:
        return None
    V = np.array([semantic_vectors[n] for n in top], dtype=np.float64)
    norms = np.linalg.norm(V, axis=1)
    if np.any(norms == 0):
        return None
    U = V / norms[:, None]
    iu = np.triu_indices(len(top), k=1)
    dist = 1.0 - (U @ U.T)[iu]
    return {f"ilad{N}": float(dist.mean()), f"ilmd{N}": float(dist.min())}


def semantic_vectors(bundle) -> dict[str, np.ndarray]:
    """Mean pretrained word vector of each title (zero when no word is known)."""
    table = bundle.word_table
    out = {}
    for nid, rec in bundle.catalog.entries.items():
        rows = [t for t in rec.title_tokens if table.pretrained[t]]
        out[nid] = table.rows[rows].mean(axis=0) if rows else np.zeros(table.dim)
    return out


@dataclass
class EvalReport:
    metrics: dict[str, float]
    counts: dict[str, int]
    config_hash: str
    meta: dict[str, str] = field(default_factory=dict)
    rankings: list[dict] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"# glory evaluation report v{REPORT_VERSION}",
                 f"config_hash\t{self.config_hash}"]
        for k in sorted(self.meta):
            lines.append(f"meta.{k}\t{self.meta[k]}")
        for k in ("impressions_total", "impressions_evaluated", "impressions_skipped",
                  "diversity_evaluated", "diversity_skipped"):
            lines.append(f"{k}\t{self.counts.get(k, 0)}")
        for k in RANK_METRICS + DIVERSITY_METRICS:
            v = self.metrics.get(k)
            lines.append(f"{k}\t{'nan' if v is None else f'{v:.4f}'}")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({"version": REPORT_VERSION, "config_hash": self.config_hash,
                           "metrics": self.metrics, "counts": self.counts, "meta": self.meta},
                          sort_keys=True, indent=2)

    def write(self, path_txt, path_json=None) -> None:
        with open(path_txt, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())
        if path_json is not None:
            with open(path_json, "w", encoding="utf-8") as fh:
                fh.write(self.to_json() + "\n")


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if line.startswith("#") or not line.strip():
            continue
        k, _, v = line.partition("\t")
        out[k] = v
    return out


def aggregate(per_impression: list[dict]) -> dict[str, float]:
    if not per_impression:
        return {}
    keys = per_impression[0].keys()
    return {k: float(np.mean([m[k] for m in per_impression])) for k in keys}


def score_impressions(model, featurizer, logs, batch_size: int = 64):
    """Yield (impression, scores) for every impression with candidates."""
    logs = [imp for imp in logs if imp.candidates]
    for i in range(0, len(logs), batch_size):
        chunk = logs[i:i + batch_size]
        rows = [(imp.impression_id, imp.history, [n for n, _ in imp.candidates],
                 [lab for _, lab in imp.candidates]) for imp in chunk]
        scores = model.predict(featurizer.batch(rows))
        for b, imp in enumerate(chunk):
            yield imp, scores[b, :len(imp.candidates)]


def evaluate_logs(model, featurizer, logs, sem_vectors=None, config_hash: str = "",
                  batch_size: int = 64, keep_rankings: bool = False, catalog=None) -> EvalReport:
    """Score every impression with raw inner products and compute all metrics."""
    per_rank, per_div5, per_div10 = [], [], []
    skipped = 0
    div_skipped = 0
    rankings = []
    scored = 0
    for imp, scores in score_impressions(model, featurizer, logs, batch_size):
        scored += 1
        ids = [n for n, _ in imp.candidates]
        labels = [lab for _, lab in imp.candidates]
        m = rank_metrics(scores, labels)
        if m is None:
            skipped += 1
        else:
            per_rank.append(m)
        order = _ranking_order(scores)
        ranked = [ids[j] for j in order]
        if sem_vectors is not None:
            d5 = diversity_metrics(ranked, 5, sem_vectors)
            d10 = diversity_metrics(ranked, 10, sem_vectors)
            if d5 is None or d10 is None:
                div_skipped += 1
            else:
                per_div5.append(d5)
                per_div10.append(d10)
        if keep_rankings:
            for rank, j in enumerate(order, 1):
                rec = catalog.entries[ids[j]] if catalog is not None else None
                rankings.append({"impression_id": imp.impression_id, "news_id": ids[j],
                                 "score": float(scores[j]), "rank": rank, "label": labels[j],
                                 "category": rec.category if rec else "",
                                 "subcategory": rec.subcategory if rec else ""})
    no_cands = len(logs) - scored
    metrics = aggregate(per_rank)
    metrics.update(aggregate(per_div5))
    metrics.update(aggregate(per_div10))
    counts = {"impressions_total": len(logs), "impressions_evaluated": len(per_rank),
              "impressions_skipped": skipped + no_cands,
              "diversity_evaluated": len(per_div5),
              "diversity_skipped": div_skipped + no_cands if sem_vectors is not None else len(logs)}
    meta = {"diversity_distance": "cosine", "averaging": "per-impression macro"}
    return EvalReport(metrics, counts, config_hash, meta, rankings)


def write_ranking_dump(rankings, path) -> None:
    cols = ("impression_id", "news_id", "score", "rank", "label", "category", "subcategory")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(cols) + "\n")
        for r in rankings:
            fh.write("\t".join(f"{r[c]:.6f}" if c == "score" else str(r[c]) for c in cols) + "\n")


class IncompatibleCheckpoint(ValueError):
    pass


def compatibility_diff(header: dict, expected: dict) -> list[str]:
    diffs = []
    for key in ("vocab", "bundle", "news_graph", "entity_graph"):
        if header.get(key) != expected.get(key):
            diffs.append(f"{key}: checkpoint={header.get(key)} provided={expected.get(key)}")
    return diffs


def load_model(checkpoint, bundle, news_graph=None, entity_graph=None):
    """Rebuild the model stored in ``checkpoint`` after checking its header
    against the supplied bundle and graphs."""
    from .config import HyperParams, RunConfig, build_config
    from .model import Featurizer, GloryModel
    from .numerics.checkpoint import load_checkpoint
    from .trainer import checkpoint_header

    header, arrays, _ = load_checkpoint(checkpoint)
    if header.get("format") != "glory":
        raise IncompatibleCheckpoint("checkpoint header lacks format=glory")
    hp, run = build_config(overrides=dict(header["hp"], **header["run"]))
    expected = checkpoint_header(hp, run, bundle, news_graph, entity_graph, header.get("epoch", 0))
    diffs = compatibility_diff(header, expected)
    if diffs:
        raise IncompatibleCheckpoint("; ".join(diffs))
    dtype = np.float32 if run.dtype == "float32" else np.float64
    model = GloryModel(hp, bundle.word_table.rows, bundle.entity_table.rows, seed=run.seed, dtype=dtype)
    model.load_arrays(arrays)
    featurizer = Featurizer(bundle.catalog, hp, news_graph, entity_graph)
    return model, featurizer, hp, run, header


def evaluate_run(checkpoint, bundle, news_graph=None, entity_graph=None, split: str = "eval",
                 keep_rankings: bool = False, batch_size: int = 64) -> EvalReport:
    from .config import config_hash

    model, featurizer, hp, run, _ = load_model(checkpoint, bundle, news_graph, entity_graph)
    logs = bundle.eval_logs if split == "eval" else bundle.train_logs
    return evaluate_logs(model, featurizer, logs, semantic_vectors(bundle), config_hash(hp, run),
                         batch_size=batch_size, keep_rankings=keep_rankings, catalog=bundle.catalog)
