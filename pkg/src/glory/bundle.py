"""The ``GLRY`` dataset bundle: catalog, embedding tables and impression logs."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .binio import BlockReader, BlockWriter, FormatError
from .ingest import EmbeddingTable, ImpressionLog, NewsCatalog, NewsRecord

MAGIC = b"GLRY"
VERSION = 1


@dataclass
class DatasetBundle:
    catalog: NewsCatalog
    word_table: EmbeddingTable
    entity_table: EmbeddingTable
    train_logs: list[ImpressionLog]
    eval_logs: list[ImpressionLog]
    meta: dict[str, str] = field(default_factory=dict)

    def news_ids(self) -> list[str]:
        return list(self.catalog.entries)

    def digest(self) -> str:
        return hashlib.sha256(to_bytes(self)).hexdigest()[:16]


def _write_table(w: BlockWriter, table: EmbeddingTable) -> None:
    w.u32(table.dim)
    w.array(np.asarray(table.rows, dtype=np.float64))
    w.array(table.pretrained.astype(np.uint8))


def _read_table(r: BlockReader, index: dict[str, int]) -> EmbeddingTable:
    dim = r.u32()
    rows = r.array()
    pretrained = r.array().astype(bool)
    return EmbeddingTable(dim=dim, rows=rows, index=dict(index), pretrained=pretrained)


def _write_logs(w: BlockWriter, logs) -> None:
    w.u32(len(logs))
    for imp in logs:
        w.string(imp.impression_id)
        w.string(imp.user_id)
        w.strings(imp.history)
        w.strings([nid for nid, _ in imp.candidates])
        w.array(np.array([lab for _, lab in imp.candidates], dtype=np.uint8))


def _read_logs(r: BlockReader) -> list[ImpressionLog]:
    logs = []
    for _ in range(r.u32()):
        imp_id = r.string()
        user = r.string()
        history = tuple(r.strings())
        cand_ids = r.strings()
        labels = r.array()
        logs.append(ImpressionLog(imp_id, user, history,
                                  tuple(zip(cand_ids, (int(x) for x in labels)))))
    return logs


def to_bytes(bundle: DatasetBundle) -> bytes:
    w = BlockWriter(MAGIC, VERSION)
    meta = sorted(bundle.meta.items())
    w.strings([k for k, _ in meta])
    w.strings([v for _, v in meta])
    cat = bundle.catalog
    # index dicts are insertion ordered by row, so symbol lists recover them
    w.strings(cat.word_index)
    w.strings(cat.entity_index)
    w.u32(cat.duplicates)
    w.u32(len(cat.entries))
    for nid, rec in cat.entries.items():
        w.string(nid)
        w.string(rec.category)
        w.string(rec.subcategory)
        w.array(np.array(rec.title_tokens, dtype=np.int32))
        w.array(np.array(rec.entity_ids, dtype=np.int32))
    _write_table(w, bundle.word_table)
    _write_table(w, bundle.entity_table)
    _write_logs(w, bundle.train_logs)
    _write_logs(w, bundle.eval_logs)
    return w.getvalue()


def from_bytes(data: bytes) -> DatasetBundle:
    r = BlockReader(data, MAGIC, (VERSION,))
    keys = r.strings()
    meta = dict(zip(keys, r.strings()))
    words = r.strings()
    ents = r.strings()
    cat = NewsCatalog(word_index={w: i + 1 for i, w in enumerate(words)},
                      entity_index={e: i + 1 for i, e in enumerate(ents)})
    cat.duplicates = r.u32()
    for _ in range(r.u32()):
        nid = r.string()
        category = r.string()
        subcategory = r.string()
        tokens = tuple(int(x) for x in r.array())
        ent_ids = tuple(int(x) for x in r.array())
        cat.entries[nid] = NewsRecord(tokens, ent_ids, category, subcategory)
    word_table = _read_table(r, cat.word_index)
    entity_table = _read_table(r, cat.entity_index)
    train_logs = _read_logs(r)
    eval_logs = _read_logs(r)
    if not r.at_end():
        raise FormatError("trailing bytes after GLRY payload")
    return DatasetBundle(cat, word_table, entity_table, train_logs, eval_logs, meta)


def save_bundle(bundle: DatasetBundle, path) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(bundle))


def load_bundle(path) -> DatasetBundle:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())


def build_bundle(news_paths, behaviors_path, word_emb=None, entity_emb=None, eval_behaviors=None,
                 L_title: int = 30, L_entity: int = 5, L_his: int = 50, word_dim: int = 300,
                 entity_dim: int = 100, seed: int = 0) -> DatasetBundle:
    """Parse raw MIND-style files into a :class:`DatasetBundle`.

    Without ``eval_behaviors`` the training behaviors are re-read in eval
    mode so that evaluation has something to score.
    """
    from .ingest import load_embeddings, parse_behaviors, parse_news

    catalog = parse_news(news_paths, L_title, L_entity)
    train_logs = parse_behaviors(behaviors_path, catalog, L_his, "train")
    eval_logs = parse_behaviors(eval_behaviors or behaviors_path, catalog, L_his, "eval")
    word_table = load_embeddings(word_emb, catalog.word_index, word_dim, seed)
    entity_table = load_embeddings(entity_emb, catalog.entity_index, entity_dim, seed + 1)
    meta = {"L_title": str(L_title), "L_entity": str(L_entity), "L_his": str(L_his),
            "entity_source": "title entities only", "seed": str(seed)}
    return DatasetBundle(catalog, word_table, entity_table, train_logs, eval_logs, meta)
