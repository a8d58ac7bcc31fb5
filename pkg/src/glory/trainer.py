"""Negative sampling, batching and the Adam training loop."""
from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import HyperParams, RunConfig
from .graphs import graph_to_bytes
from .model import Featurizer, GloryModel
from .numerics import OptimizerState, adam_step
from .numerics.checkpoint import save_checkpoint

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainSample:
    history: tuple[str, ...]
    positive: str
    negatives: tuple[str, ...]
    impression_id: str

    def as_row(self):
        cands = (self.positive,) + self.negatives
        return (self.impression_id, self.history, cands, (1,) + (0,) * len(self.negatives))


def sample_negatives(impression, K_neg: int, rng: np.random.Generator) -> list[TrainSample]:
    """One sample per clicked candidate, each with ``K_neg`` unclicked ones.

    Negatives are drawn without replacement when the impression has at
    least ``K_neg`` of them, otherwise with replacement. An impression with
    no unclicked candidates yields nothing.
    """
    if K_neg < 1:
        raise ValueError("K_neg must be >= 1")
    pos = [nid for nid, lab in impression.candidates if lab == 1]
    neg = [nid for nid, lab in impression.candidates if lab == 0]
    if not neg:
        log.warning("impression %s has no unclicked candidates; skipped", impression.impression_id)
        return []
    out = []
    for p in pos:
        picks = rng.choice(len(neg), size=K_neg, replace=len(neg) < K_neg)
        out.append(TrainSample(impression.history, p, tuple(neg[i] for i in picks), impression.impression_id))
    return out


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:16]


def checkpoint_header(hp: HyperParams, run: RunConfig, bundle, news_graph, entity_graph, epoch: int) -> dict:
    return {
        "format": "glory",
        "hp": dataclasses.asdict(hp),
        "run": dataclasses.asdict(run),
        "vocab": [int(bundle.word_table.vocab_size), int(bundle.entity_table.vocab_size)],
        "bundle": bundle.digest(),
        "news_graph": _graph_tag(news_graph) if hp.use_global_news else None,
        "entity_graph": _graph_tag(entity_graph) if hp.use_global_entity else None,
        "epoch": epoch,
    }


def _graph_tag(graph) -> str | None:
    if graph is None:
        return None
    return f"{graph.variant}:{_digest(graph_to_bytes(graph))}"


@dataclass
class TrainResult:
    model: GloryModel
    optimizer: OptimizerState
    epoch_losses: list[float] = field(default_factory=list)
    step_log: list[dict] = field(default_factory=list)
    checkpoints: list[Path] = field(default_factory=list)
    skipped_impressions: int = 0
    header: dict = field(default_factory=dict)
    best_auc: float | None = None


def _batches(featurizer, rows, batch_size, prefetch: int):
    chunks = [rows[i:i + batch_size] for i in range(0, len(rows), batch_size)]
    if prefetch <= 0:
        for c in chunks:
            yield featurizer.batch(c)
        return
    q: queue.Queue = queue.Queue(maxsize=prefetch)
    done = object()

    def work():
        try:
            for c in chunks:
                q.put(featurizer.batch(c))
        except BaseException as exc:  # surfaced in the consumer
            q.put(exc)
        q.put(done)

    t = threading.Thread(target=work, daemon=True)
    t.start()
    while True:
        item = q.get()
        if item is done:
            break
        if isinstance(item, BaseException):
            raise item
        yield item
    t.join()


def train(bundle, news_graph, entity_graph, hp: HyperParams, run: RunConfig,
          out_dir=None, eval_fn=None) -> TrainResult:
    """Train a model on ``bundle.train_logs``.

    ``eval_fn(model) -> auc`` enables best-on-validation selection when
    ``run.select_best`` is set. Single-threaded runs (``threads=1``) are
    bit-reproducible for a fixed seed.
    """
    hp.validate()
    run.validate()
    rng = np.random.default_rng(run.seed)
    dtype = np.float32 if run.dtype == "float32" else np.float64
    model = GloryModel(hp, bundle.word_table.rows, bundle.entity_table.rows, seed=run.seed, dtype=dtype)
    model.dropout = run.dropout
    featurizer = Featurizer(bundle.catalog, hp, news_graph, entity_graph)
    logs = bundle.train_logs
    skipped = sum(1 for imp in logs if not any(lab == 0 for _, lab in imp.candidates))
    n_samples = sum(imp.n_positive for imp in logs if any(lab == 0 for _, lab in imp.candidates))
    steps_per_epoch = math.ceil(n_samples / run.batch_size) if n_samples else 0
    state = OptimizerState(base_lr=run.lr, warmup_frac=run.warmup_frac,
                           total_steps=max(steps_per_epoch * run.epochs, 1))
    params = model.parameters()
    result = TrainResult(model, state, skipped_impressions=skipped)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    header = checkpoint_header(hp, run, bundle, news_graph, entity_graph, 0)
    result.header = header
    log.info("parameters: %d (%d samples/epoch, %d steps/epoch)", model.num_parameters(), n_samples,
             steps_per_epoch)
    prefetch = run.prefetch if run.threads > 1 else 0

    for epoch in range(1, run.epochs + 1):
        rows = []
        for imp in logs:
            rows.extend(s.as_row() for s in sample_negatives_quiet(imp, hp.K_neg, rng))
        order = rng.permutation(len(rows))
        rows = [rows[i] for i in order]
        model.training = True
        losses = []
        for b_i, batch in enumerate(_batches(featurizer, rows, run.batch_size, prefetch)):
            model.zero_grad()
            loss = model.loss(batch)
            value = float(loss.values)
            if not math.isfinite(value):
                raise FloatingPointError(f"non-finite loss {value} at epoch {epoch} batch {b_i} "
                                         f"(impressions {batch.impression_ids[:5]})")
            loss.backward()
            model.word_emb.grad[0] = 0
            model.entity_emb.grad[0] = 0
            if run.weight_decay:
                for p in params.values():
                    p.grad = p.grad + run.weight_decay * p.values
            lr = adam_step(state, params, clip_norm=run.clip_norm or None)
            losses.append(value)
            result.step_log.append({"epoch": epoch, "step": state.step, "lr": lr, "loss": value})
        model.training = False
        mean_loss = float(np.mean(losses)) if losses else float("nan")
        result.epoch_losses.append(mean_loss)
        log.info("epoch %d: loss %.4f", epoch, mean_loss)
        header = dict(header, epoch=epoch)
        result.header = header
        if out is not None and run.checkpoint_every and epoch % run.checkpoint_every == 0:
            path = out / f"epoch{epoch}.gckp"
            save_checkpoint(path, header, model.state_arrays(), state)
            result.checkpoints.append(path)
        if run.select_best and eval_fn is not None:
            auc = eval_fn(model)
            log.info("epoch %d: validation auc %.4f", epoch, auc)
            if result.best_auc is None or auc > result.best_auc:
                result.best_auc = auc
                if out is not None:
                    save_checkpoint(out / "best.gckp", header, model.state_arrays())

    if out is not None:
        save_checkpoint(out / "last.gckp", header, model.state_arrays(), state)
        result.checkpoints.append(out / "last.gckp")
        with open(out / "train_log.tsv", "w", encoding="utf-8") as fh:
            fh.write("epoch\tstep\tlr\tloss\n")
            for r in result.step_log:
                fh.write(f"{r['epoch']}\t{r['step']}\t{r['lr']!r}\t{r['loss']!r}\n")
        with open(out / "epochs.tsv", "w", encoding="utf-8") as fh:
            fh.write("epoch\tmean_loss\n")
            for i, v in enumerate(result.epoch_losses, 1):
                fh.write(f"{i}\t{v!r}\n")
    return result


def sample_negatives_quiet(impression, K_neg, rng):
    # the warning is emitted once per run via TrainResult.skipped_impressions
    if not any(lab == 0 for _, lab in impression.candidates):
        return []
    return sample_negatives(impression, K_neg, rng)
