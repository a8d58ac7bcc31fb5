"""Parsing of MIND-format news/behavior files and pretrained embedding tables."""
from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

L_TITLE = 30
L_ENTITY = 5
L_HIS = 50

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class ParseError(ValueError):
    def __init__(self, path, lineno, message):
        self.path = str(path)
        self.lineno = lineno
        super().__init__(f"{path}:{lineno}: {message}")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace and punctuation."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class NewsRecord:
    title_tokens: tuple[int, ...]
    entity_ids: tuple[int, ...]
    category: str
    subcategory: str


@dataclass
class NewsCatalog:
    """News-id keyed records plus the symbol indices their integers refer to.

    Index 0 in both ``word_index`` and ``entity_index`` is reserved for
    padding/unknown, so real symbols start at 1.
    """

    entries: dict[str, NewsRecord] = field(default_factory=dict)
    word_index: dict[str, int] = field(default_factory=dict)
    entity_index: dict[str, int] = field(default_factory=dict)
    duplicates: int = 0

    def __contains__(self, news_id) -> bool:
        return news_id in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def entity_symbols(self, news_id: str) -> list[str]:
        inv = self.inverse_entity_index()
        return [inv[i] for i in self.entries[news_id].entity_ids]

    def inverse_entity_index(self) -> dict[int, str]:
        cache = getattr(self, "_inv_entity", None)
        if cache is None or len(cache) != len(self.entity_index):
            cache = {v: k for k, v in self.entity_index.items()}
            self._inv_entity = cache
        return cache


@dataclass(frozen=True)
class ImpressionLog:
    impression_id: str
    user_id: str
    history: tuple[str, ...]
    candidates: tuple[tuple[str, int], ...]

    @property
    def n_positive(self) -> int:
        return sum(label for _, label in self.candidates)


@dataclass
class EmbeddingTable:
    dim: int
    rows: np.ndarray
    index: dict[str, int]
    pretrained: np.ndarray  # bool per row: True when filled from the file

    def lookup(self, symbol: str) -> np.ndarray:
        return self.rows[self.index.get(symbol, 0)]

    @property
    def vocab_size(self) -> int:
        return self.rows.shape[0]


def _title_entities(raw: str) -> list[str]:
    raw = raw.strip()
    if not raw:
        return []
    items = json.loads(raw)
    return [item["WikidataId"] for item in items if "WikidataId" in item]


def parse_news(paths, L_title: int = L_TITLE, L_entity: int = L_ENTITY,
               catalog: NewsCatalog | None = None) -> NewsCatalog:
    """Build a :class:`NewsCatalog` from one or more MIND ``news.tsv`` files.

    Titles keep their first ``L_title`` tokens and entities the first
    ``L_entity`` WikiData ids of the title-entity field. A repeated news-id
    keeps its first record; repeats are counted in ``catalog.duplicates``.
    """
    if isinstance(paths, (str, os.PathLike)):
        paths = [paths]
    cat = catalog if catalog is not None else NewsCatalog()
    for path in paths:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n").rstrip("\r")
                if not line.strip():
                    continue
                parts = line.split("\t")
                if len(parts) < 7:
                    raise ParseError(path, lineno, f"expected >= 7 tab-separated fields, got {len(parts)}")
                news_id, category, subcategory, title = parts[0], parts[1], parts[2], parts[3]
                if not news_id:
                    raise ParseError(path, lineno, "empty news id")
                if news_id in cat.entries:
                    cat.duplicates += 1
                    continue
                try:
                    ents = _title_entities(parts[6])
                except (json.JSONDecodeError, TypeError, KeyError) as exc:
                    raise ParseError(path, lineno, f"bad title-entities field: {exc}") from None
                tokens = [cat.word_index.setdefault(w, len(cat.word_index) + 1)
                          for w in tokenize(title)[:L_title]]
                ent_ids = [cat.entity_index.setdefault(e, len(cat.entity_index) + 1)
                           for e in ents[:L_entity]]
                cat.entries[news_id] = NewsRecord(tuple(tokens), tuple(ent_ids), category, subcategory)
    if cat.duplicates:
        log.warning("%d duplicate news ids skipped (first occurrence kept)", cat.duplicates)
    return cat


def parse_behaviors(path, catalog: NewsCatalog, L_his: int = L_HIS,
                    mode: str = "train") -> list[ImpressionLog]:
    """Parse a MIND ``behaviors.tsv`` file.

    In ``train`` mode impressions without a clicked candidate are dropped;
    in ``eval`` mode they are kept so metric denominators match the file.
    Unlabeled candidate tokens are only accepted in ``eval`` mode (label 0).
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    logs = []
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 5:
                raise ParseError(path, lineno, f"expected 5 tab-separated fields, got {len(parts)}")
            imp_id, user, _time, hist_raw, cand_raw = parts[:5]
            history = hist_raw.split()
            for nid in history:
                if nid not in catalog:
                    raise ParseError(path, lineno, f"unknown news id {nid!r} in history")
            history = history[-L_his:] if L_his > 0 else []
            cands = []
            for tok in cand_raw.split():
                nid, sep, label = tok.rpartition("-")
                if not sep or label not in ("0", "1"):
                    if mode == "train":
                        raise ParseError(path, lineno, f"candidate {tok!r} lacks a -0/-1 label")
                    nid, label = tok, "0"
                if nid not in catalog:
                    raise ParseError(path, lineno, f"unknown news id {nid!r} in candidates")
                cands.append((nid, int(label)))
            imp = ImpressionLog(imp_id, user, tuple(history), tuple(cands))
            if mode == "train" and imp.n_positive == 0:
                dropped += 1
                continue
            logs.append(imp)
    if dropped:
        log.info("%s: dropped %d impressions without clicks", path, dropped)
    return logs


def load_embeddings(path, index: dict[str, int], dim: int, seed: int = 0) -> EmbeddingTable:
    """Fill an embedding table for ``index`` from a whitespace-separated text file.

    Symbols missing from the file get seeded uniform(-0.1, 0.1) rows; row 0
    is the all-zero pad row. ``path=None`` yields a fully random table.
    """
    rng = np.random.default_rng(seed)
    rows = rng.uniform(-0.1, 0.1, size=(len(index) + 1, dim))
    pretrained = np.zeros(len(index) + 1, dtype=bool)
    if path is not None:
        seen_valid = False
        with open(path, encoding="utf-8", errors="replace") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip().split()
                if not parts:
                    continue
                symbol = parts[0]
                if len(parts) - 1 != dim:
                    # some GloVe releases contain a few tokens with embedded spaces
                    if len(parts) - 1 > dim and seen_valid:
                        continue
                    raise ParseError(path, lineno, f"symbol {symbol!r} has {len(parts) - 1} values, expected {dim}")
                seen_valid = True
                row = index.get(symbol)
                if row is None or row == 0:
                    continue
                rows[row] = np.array(parts[1:], dtype=np.float64)
                pretrained[row] = True
    rows[0] = 0.0
    return EmbeddingTable(dim=dim, rows=rows, index=dict(index), pretrained=pretrained)
