"""``glory`` command-line entry point."""
from __future__ import annotations

import argparse
import contextlib
import dataclasses
import itertools
import json
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, HyperParams, RunConfig, build_config, config_hash, field_types, \
    read_config_file, CONFIG_ENV
from .graphs import ENTITY_VARIANTS, NEWS_VARIANTS

log = logging.getLogger("glory")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message.replace("\n", " "))


def _threads(n: int):
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # pragma: no cover
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def _add_config_flags(p: argparse.ArgumentParser, only=None) -> None:
    p.add_argument("--config", help=f"key=value config file (default: ${CONFIG_ENV})")
    g = p.add_argument_group("config overrides")
    for name, (cls, typ) in field_types().items():
        if only is not None and name not in only:
            continue
        flags = [f"--{name}"]
        if "_" in name:
            flags.append(f"--{name.replace('_', '-')}")
        g.add_argument(*flags, dest=f"cfg_{name}", metavar=str(typ).upper(), default=None)


def _resolve_config(args, validate: bool = True) -> tuple[HyperParams, RunConfig]:
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV)
    if path and not Path(path).exists():
        raise FileNotFoundError(f"config file not found: {path}")
    file_values = read_config_file(path) if path else {}
    overrides = {k[4:]: v for k, v in vars(args).items() if k.startswith("cfg_") and v is not None}
    if getattr(args, "no_global_news", False):
        overrides["use_global_news"] = "false"
    if getattr(args, "no_global_entity", False):
        overrides["use_global_entity"] = "false"
    return build_config(file_values, overrides, validate=validate)


def _need(path, what="file"):
    if path is None or not Path(path).exists():
        raise FileNotFoundError(f"{what} not found: {path}")
    return Path(path)


def _load_graphs(graphs_dir, hp: HyperParams):
    from .graphs import load_graph
    ng = eg = None
    if hp.use_global_news:
        ng = load_graph(_need(Path(graphs_dir) / "news.ggph", "news graph"))
    if hp.use_global_entity:
        eg = load_graph(_need(Path(graphs_dir) / "entity.ggph", "entity graph"))
    return ng, eg


# -- commands -----------------------------------------------------------------
def cmd_prepare(args) -> int:
    from .bundle import build_bundle, save_bundle
    # only the length and width fields matter here; model constraints are checked at train time
    hp, run = _resolve_config(args, validate=False)
    for name in ("L_title", "L_entity", "L_his", "word_dim", "entity_dim"):
        if getattr(hp, name) < 1:
            raise ConfigError(f"{name} must be positive, got {getattr(hp, name)}")
    news = [_need(p) for p in args.news]
    behaviors = _need(args.behaviors)
    for p in (args.eval_behaviors, args.word_emb, args.entity_emb):
        if p is not None:
            _need(p)
    bundle = build_bundle(news, behaviors, args.word_emb, args.entity_emb, args.eval_behaviors,
                          L_title=hp.L_title, L_entity=hp.L_entity, L_his=hp.L_his,
                          word_dim=hp.word_dim, entity_dim=hp.entity_dim, seed=run.seed)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_bundle(bundle, args.out)
    print(json.dumps({"bundle": str(args.out), "news": len(bundle.catalog),
                      "train_impressions": len(bundle.train_logs), "eval_impressions": len(bundle.eval_logs),
                      "duplicate_news": bundle.catalog.duplicates}))
    return 0


def cmd_build_graphs(args) -> int:
    from .bundle import load_bundle
    from .graphs import build_entity_graph, build_news_graph, save_graph
    bundle = load_bundle(_need(args.bundle, "bundle"))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ng = build_news_graph(bundle.train_logs, args.news_variant)
    eg = build_entity_graph(bundle.train_logs, bundle.catalog, args.entity_variant)
    save_graph(ng, out / "news.ggph")
    save_graph(eg, out / "entity.ggph")
    print(json.dumps({"news_variant": ng.variant, "news_edges": ng.num_edges,
                      "entity_variant": eg.variant, "entity_edges": eg.num_edges}))
    return 0


def _check_graph_variants(hp, ng, eg):
    if ng is not None and ng.variant != hp.news_variant:
        log.info("news graph variant %s overrides config value %s", ng.variant, hp.news_variant)
        hp.news_variant = ng.variant
    if eg is not None and eg.variant != hp.entity_variant:
        log.info("entity graph variant %s overrides config value %s", eg.variant, hp.entity_variant)
        hp.entity_variant = eg.variant


def _eval_callback(bundle, hp, ng, eg):
    from .evaluation import evaluate_logs
    from .model import Featurizer
    feat = Featurizer(bundle.catalog, hp, ng, eg)
    return lambda model: evaluate_logs(model, feat, bundle.eval_logs).metrics.get("auc", 0.0)


def cmd_train(args) -> int:
    from .bundle import load_bundle
    from .trainer import train
    hp, run = _resolve_config(args)
    bundle = load_bundle(_need(args.bundle, "bundle"))
    ng, eg = _load_graphs(args.graphs, hp)
    _check_graph_variants(hp, ng, eg)
    with _threads(run.threads):
        result = train(bundle, ng, eg, hp, run, args.out,
                       eval_fn=_eval_callback(bundle, hp, ng, eg) if run.select_best else None)
    summary = {"num_parameters": result.model.num_parameters(), "epoch_losses": result.epoch_losses,
               "skipped_impressions": result.skipped_impressions, "config_hash": config_hash(hp, run),
               "checkpoint": str(Path(args.out) / "last.gckp")}
    with open(Path(args.out) / "train_summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(json.dumps(summary))
    return 0


def _evaluate(args, keep_rankings: bool):
    from .bundle import load_bundle
    from .evaluation import evaluate_run
    from .numerics.checkpoint import load_checkpoint
    ckpt = _need(args.checkpoint, "checkpoint")
    header, _, _ = load_checkpoint(ckpt)
    hp, _ = build_config(overrides=header["hp"])
    bundle = load_bundle(_need(args.bundle, "bundle"))
    ng, eg = _load_graphs(args.graphs, hp)
    with _threads(args.threads):
        return evaluate_run(ckpt, bundle, ng, eg, split=args.split, keep_rankings=keep_rankings), bundle


def cmd_evaluate(args) -> int:
    from .evaluation import write_ranking_dump
    report, _ = _evaluate(args, keep_rankings=args.dump_ranking)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "report.txt", out / "report.json")
    if args.dump_ranking:
        write_ranking_dump(report.rankings, out / "ranking.tsv")
    print(json.dumps({"report": str(out / "report.txt"), **report.metrics}))
    return 0


def cmd_dump_ranking(args) -> int:
    from .evaluation import write_ranking_dump
    report, _ = _evaluate(args, keep_rankings=True)
    rows = report.rankings
    if args.limit is not None:
        keep = []
        seen = []
        for r in rows:
            if r["impression_id"] not in seen:
                if len(seen) == args.limit:
                    break
                seen.append(r["impression_id"])
            keep.append(r)
        rows = keep
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_ranking_dump(rows, args.out)
    print(json.dumps({"ranking": str(args.out), "rows": len(rows)}))
    return 0


def _parse_grid(specs) -> list[tuple[str, list[str]]]:
    types = field_types()
    axes = []
    for spec in specs or []:
        key, sep, values = spec.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not values:
            raise CliError(f"bad --grid spec {spec!r}; expected key=v1,v2")
        if key not in types:
            raise CliError(f"unknown grid key {key!r}")
        axes.append((key, [v.strip() for v in values.split(",")]))
    return axes


def cmd_sweep(args) -> int:
    from .bundle import load_bundle
    from .evaluation import evaluate_logs, semantic_vectors
    from .graphs import build_entity_graph, build_news_graph
    from .model import Featurizer
    from .trainer import train
    axes = _parse_grid(args.grid)
    if not axes:
        raise CliError("sweep needs at least one --grid key=v1,v2")
    bundle = load_bundle(_need(args.bundle, "bundle"))
    sem = semantic_vectors(bundle)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base_hp, base_run = _resolve_config(args)
    graph_cache = {}
    rows = []
    keys = [k for k, _ in axes]
    for i, combo in enumerate(itertools.product(*[v for _, v in axes])):
        cell = dict(zip(keys, combo))
        hp, run = build_config(overrides=cell, hp=base_hp, run=base_run)
        gk = ("n", hp.news_variant)
        if gk not in graph_cache:
            graph_cache[gk] = build_news_graph(bundle.train_logs, hp.news_variant)
        ek = ("e", hp.entity_variant)
        if ek not in graph_cache:
            graph_cache[ek] = build_entity_graph(bundle.train_logs, bundle.catalog, hp.entity_variant)
        ng, eg = graph_cache[gk], graph_cache[ek]
        cell_dir = out / f"cell{i:03d}"
        with _threads(run.threads):
            result = train(bundle, ng, eg, hp, run, cell_dir)
            feat = Featurizer(bundle.catalog, hp, ng, eg)
            report = evaluate_logs(result.model, feat, bundle.eval_logs, sem, config_hash(hp, run))
        report.meta.update({f"grid.{k}": v for k, v in cell.items()})
        report.write(cell_dir / "report.txt", cell_dir / "report.json")
        rows.append((f"cell{i:03d}", cell, report.metrics, result.model.num_parameters()))
        log.info("sweep cell %d %s: auc %.4f", i, cell, report.metrics.get("auc", float("nan")))
    metric_names = ["auc", "mrr", "ndcg5", "ndcg10", "ilad5", "ilmd5", "ilad10", "ilmd10"]
    with open(out / "summary.tsv", "w", encoding="utf-8") as fh:
        fh.write("\t".join(["cell"] + keys + metric_names + ["num_parameters"]) + "\n")
        for name, cell, metrics, n_params in rows:
            vals = [f"{metrics[m]:.4f}" if m in metrics else "nan" for m in metric_names]
            fh.write("\t".join([name] + [cell[k] for k in keys] + vals + [str(n_params)]) + "\n")
    print(json.dumps({"summary": str(out / "summary.tsv"), "cells": len(rows)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="glory", description="Global-graph news recommendation pipeline")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("prepare", help="parse MIND-format files into a GLRY bundle")
    s.add_argument("--news", action="append", required=True, help="news.tsv (repeatable)")
    s.add_argument("--behaviors", required=True, help="training behaviors.tsv")
    s.add_argument("--eval-behaviors", help="evaluation behaviors.tsv (default: training file)")
    s.add_argument("--word-emb", help="GloVe-style text embedding file")
    s.add_argument("--entity-emb", help="TransE entity_embedding.vec")
    s.add_argument("--out", required=True)
    _add_config_flags(s, {"L_title", "L_entity", "L_his", "word_dim", "entity_dim", "seed"})
    s.set_defaults(func=cmd_prepare)

    s = sub.add_parser("build-graphs", help="build GGPH news and entity graphs from a bundle")
    s.add_argument("--bundle", required=True)
    s.add_argument("--news-variant", default="dir-seq", choices=NEWS_VARIANTS)
    s.add_argument("--entity-variant", default="inter-undir", choices=ENTITY_VARIANTS)
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_build_graphs)

    s = sub.add_parser("train", help="train a model")
    s.add_argument("--bundle", required=True)
    s.add_argument("--graphs", required=True, help="directory from build-graphs")
    s.add_argument("--out", required=True)
    s.add_argument("--no-global-news", action="store_true")
    s.add_argument("--no-global-entity", action="store_true")
    _add_config_flags(s)
    s.set_defaults(func=cmd_train)

    for name, func, helptext in (("evaluate", cmd_evaluate, "score a checkpoint and write a report"),
                                 ("dump-ranking", cmd_dump_ranking, "write per-impression rankings")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--checkpoint", required=True)
        s.add_argument("--bundle", required=True)
        s.add_argument("--graphs", required=True)
        s.add_argument("--out", required=True)
        s.add_argument("--split", choices=("eval", "train"), default="eval")
        s.add_argument("--threads", type=int, default=1)
        if name == "evaluate":
            s.add_argument("--dump-ranking", action="store_true")
        else:
            s.add_argument("--limit", type=int, help="number of impressions to dump")
        s.set_defaults(func=func)

    s = sub.add_parser("sweep", help="train+evaluate over a cartesian hyperparameter grid")
    s.add_argument("--bundle", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--grid", action="append", help="key=v1,v2 (repeatable)")
    s.add_argument("--no-global-news", action="store_true")
    s.add_argument("--no-global-entity", action="store_true")
    _add_config_flags(s)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return args.func(args)
    except CliError as exc:
        print(f"glory: error: usage: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError, OSError, KeyError, FloatingPointError) as exc:
        kind = type(exc).__name__
        msg = str(exc).replace("\n", " ")
        print(f"glory: error: {kind}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
