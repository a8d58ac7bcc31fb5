"""Synthetic MIND-format corpora with planted topic preferences.

Every article belongs to one topic and draws its title words and entities
mostly from that topic's vocabulary. Each user prefers one topic: histories
are read from it and clicked candidates come from it, so a model that reads
content can separate clicks from non-clicks.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np


def write_corpus(out_dir, n_topics: int = 4, news_per_topic: int = 10, words_per_topic: int = 15,
                 entities_per_topic: int = 6, n_users: int = 20, n_impressions: int = 50,
                 hist_len: tuple[int, int] = (2, 8), n_pos: int = 1, n_neg: int = 4,
                 word_dim: int = 16, entity_dim: int = 8, random_labels: bool = False,
                 seed: int = 0) -> dict[str, Path]:
    """Write ``news.tsv``, ``behaviors.tsv``, ``glove.txt`` and ``entity.vec``.

    With ``random_labels`` the click labels ignore topics (half clicked,
    half not), giving a balanced set with no learnable signal.
    """
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    shared = [f"common{i}" for i in range(10)]
    topic_words = [[f"t{t}w{i}" for i in range(words_per_topic)] for t in range(n_topics)]
    topic_ents = [[f"Q{t}{i:03d}" for i in range(entities_per_topic)] for t in range(n_topics)]

    news = []  # (id, topic)
    with open(out / "news.tsv", "w", encoding="utf-8") as fh:
        for t in range(n_topics):
            for i in range(news_per_topic):
                nid = f"N{t}{i:03d}"
                n_words = int(rng.integers(4, 10))
                words = [topic_words[t][j] if rng.random() < 0.75 else shared[j % len(shared)]
                         for j in rng.integers(0, words_per_topic, size=n_words)]
                title = " ".join(w.capitalize() if k == 0 else w for k, w in enumerate(words)) + "."
                ents = rng.choice(topic_ents[t], size=int(rng.integers(0, 4)), replace=False)
                ent_json = json.dumps([{"Label": e, "Type": "O", "WikidataId": str(e), "Confidence": 1.0,
                                        "OccurrenceOffsets": [], "SurfaceForms": []} for e in ents])
                fh.write("\t".join([nid, f"topic{t}", f"sub{t}{i % 2}", title, "", "", ent_json, "[]"]) + "\n")
                news.append((nid, t))

    by_topic = [[nid for nid, t in news if t == k] for k in range(n_topics)]
    users = [(f"U{u}", int(rng.integers(n_topics))) for u in range(n_users)]
    histories = {}
    for uid, t in users:
        h = int(rng.integers(hist_len[0], hist_len[1] + 1))
        histories[uid] = [by_topic[t][j] for j in rng.integers(0, len(by_topic[t]), size=h)]
    with open(out / "behaviors.tsv", "w", encoding="utf-8") as fh:
        for i in range(n_impressions):
            uid, t = users[i % n_users]
            if random_labels:
                pool = rng.choice(len(news), size=n_pos + n_neg, replace=False)
                cands = [(news[j][0], 1 if k < n_pos else 0) for k, j in enumerate(pool)]
            else:
                pos = rng.choice(by_topic[t], size=n_pos, replace=False)
                others = [nid for nid, tt in news if tt != t]
                neg = rng.choice(others, size=n_neg, replace=False)
                cands = [(str(n), 1) for n in pos] + [(str(n), 0) for n in neg]
            cands = [cands[j] for j in rng.permutation(len(cands))]
            field = " ".join(f"{n}-{lab}" for n, lab in cands)
            fh.write(f"I{i}\t{uid}\t11/11/2019 9:00:00 AM\t{' '.join(histories[uid])}\t{field}\n")

    with open(out / "glove.txt", "w", encoding="utf-8") as fh:
        # topic words cluster around a per-topic direction; "common" words are left out
        centers = rng.normal(size=(n_topics, word_dim))
        for t, ws in enumerate(topic_words):
            for w in ws:
                vec = 0.3 * centers[t] / np.linalg.norm(centers[t]) + 0.05 * rng.normal(size=word_dim)
                fh.write(w + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")
    with open(out / "entity.vec", "w", encoding="utf-8") as fh:
        for ents in topic_ents:
            for e in ents:
                vec = 0.1 * rng.normal(size=entity_dim)
                fh.write(e + "\t" + "\t".join(f"{x:.6f}" for x in vec) + "\n")
    return {"news": out / "news.tsv", "behaviors": out / "behaviors.tsv",
            "word_emb": out / "glove.txt", "entity_emb": out / "entity.vec"}
