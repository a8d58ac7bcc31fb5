"""Small end-to-end experiments shared by ``scripts/`` and the acceptance tests."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bundle import build_bundle
from .config import HyperParams, RunConfig
from .evaluation import evaluate_logs
from .graphs import build_entity_graph, build_news_graph
from .model import Featurizer, GloryModel
from .synthetic import write_corpus
from .trainer import sample_negatives_quiet, train

log = logging.getLogger(__name__)


@dataclass
class RunOutcome:
    auc: float
    epoch_losses: list[float]
    num_parameters: int
    seconds: float


def synthetic_setup(workdir, hp: HyperParams | None = None, seed: int = 0, **corpus_kw):
    """Write a synthetic corpus sized for ``hp`` and return (bundle, (news_graph, entity_graph))."""
    hp = hp or HyperParams()
    paths = write_corpus(workdir, word_dim=hp.word_dim, entity_dim=hp.entity_dim, seed=seed, **corpus_kw)
    bundle = build_bundle(paths["news"], paths["behaviors"], paths["word_emb"], paths["entity_emb"],
                          L_title=hp.L_title, L_entity=hp.L_entity, L_his=hp.L_his,
                          word_dim=hp.word_dim, entity_dim=hp.entity_dim, seed=seed)
    graphs = (build_news_graph(bundle.train_logs, hp.news_variant),
              build_entity_graph(bundle.train_logs, bundle.catalog, hp.entity_variant))
    return bundle, graphs


def train_and_score(bundle, graphs, hp: HyperParams, run: RunConfig, logs=None) -> RunOutcome:
    """Train, then report the AUC on ``logs`` (default: the bundle's eval logs)."""
    start = time.perf_counter()
    result = train(bundle, *graphs, hp, run)
    feat = Featurizer(bundle.catalog, hp, *graphs)
    report = evaluate_logs(result.model, feat, bundle.eval_logs if logs is None else logs)
    return RunOutcome(report.metrics["auc"], result.epoch_losses, result.model.num_parameters(),
                      time.perf_counter() - start)


def untrained_auc(bundle, graphs, hp: HyperParams, seed: int = 0) -> float:
    model = GloryModel(hp, bundle.word_table.rows, bundle.entity_table.rows, seed=seed)
    return evaluate_logs(model, Featurizer(bundle.catalog, hp, *graphs), bundle.eval_logs).metrics["auc"]


def initial_losses(bundle, graphs, hp: HyperParams, batch_size: int, seed: int = 0) -> list[float]:
    """NCE loss of a freshly initialised model on every training batch."""
    rng = np.random.default_rng(seed)
    rows = [s.as_row() for imp in bundle.train_logs for s in sample_negatives_quiet(imp, hp.K_neg, rng)]
    model = GloryModel(hp, bundle.word_table.rows, bundle.entity_table.rows, seed=seed)
    feat = Featurizer(bundle.catalog, hp, *graphs)
    return [float(model.loss(feat.batch(rows[i:i + batch_size])).values)
            for i in range(0, len(rows), batch_size)]


# -- MIND-small ---------------------------------------------------------------------
def _subsample_behaviors(src: Path, dst: Path, users: set[str] | None, n_users: int, rng) -> set[str]:
    lines = src.read_text(encoding="utf-8").splitlines()
    if users is None:
        all_users = sorted({line.split("\t")[1] for line in lines if line.strip()})
        pick = rng.choice(len(all_users), size=min(n_users, len(all_users)), replace=False)
        users = {all_users[i] for i in pick}
    kept = [line for line in lines if line.strip() and line.split("\t")[1] in users]
    dst.write_text("\n".join(kept) + "\n", encoding="utf-8")
    return users


def mind_small_sanity(root, workdir, glove=None, n_users: int = 5000, epochs: int = 2,
                      hp: HyperParams | None = None, run: RunConfig | None = None, seed: int = 0) -> RunOutcome:
    """Train on ``n_users`` sampled MIND-small training users and score their dev impressions.

    ``root`` holds ``MINDsmall_train/`` and ``MINDsmall_dev/``. Without
    ``glove`` the word vectors are random.
    """
    root, work = Path(root), Path(workdir)
    work.mkdir(parents=True, exist_ok=True)
    train_dir, dev_dir = root / "MINDsmall_train", root / "MINDsmall_dev"
    rng = np.random.default_rng(seed)
    users = _subsample_behaviors(train_dir / "behaviors.tsv", work / "train_behaviors.tsv", None, n_users, rng)
    _subsample_behaviors(dev_dir / "behaviors.tsv", work / "dev_behaviors.tsv", users, n_users, rng)
    with open(work / "entity.vec", "w", encoding="utf-8") as out:
        for d in (train_dir, dev_dir):
            out.write((d / "entity_embedding.vec").read_text(encoding="utf-8"))
    hp = hp or HyperParams()
    run = run or RunConfig(epochs=epochs, seed=seed)
    bundle = build_bundle([train_dir / "news.tsv", dev_dir / "news.tsv"], work / "train_behaviors.tsv",
                          glove, work / "entity.vec", work / "dev_behaviors.tsv",
                          L_title=hp.L_title, L_entity=hp.L_entity, L_his=hp.L_his,
                          word_dim=hp.word_dim, entity_dim=hp.entity_dim, seed=seed)
    graphs = (build_news_graph(bundle.train_logs, hp.news_variant),
              build_entity_graph(bundle.train_logs, bundle.catalog, hp.entity_variant))
    log.info("MIND-small subsample: %d train / %d dev impressions", len(bundle.train_logs), len(bundle.eval_logs))
    return train_and_score(bundle, graphs, hp, run)


__all__ = ["RunOutcome", "synthetic_setup", "train_and_score", "untrained_auc", "initial_losses",
           "mind_small_sanity"]
