"""``netcontent`` command line.

Sub-commands::

    synth      write a synthetic dataset directory
    convert    edge list -> tweet graph (coordinate file + ids)
    laplacian  tweet graph -> smoothness Laplacian
    train      fit a model on the labeled tweet records
    predict    score tweet records with a model
    evaluate   compare predictions with reference labels
    ablate     combined / content-only / network-only table

Every command writes a JSON run manifest next to its main output, or into
``--manifest-dir`` when given.  Exit status: 2 for I/O problems, 3 for
invalid input, 4 for numerical failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, formats
from .errors import NetContentError, ValidationError
from .evaluation import (
    MODES,
    AblationConfig,
    AblationRow,
    ConfusionCounts,
    Dataset,
    format_table,
    metrics,
    run_ablation,
    stratified_split,
    table_json,
)
from .features import FeatureConfig, assign_groups, build_matrix
from .graph import DEFAULT_DAMPING, graph_laplacian, line_graph
from .solver import Hyperparams, fit, label_matrix, predict_labels, scores
from .synth import SynthConfig, generate

log = logging.getLogger("netcontent")


def _manifest(args, name: str, out, inputs=()):
    config = {k: v for k, v in vars(args).items() if k not in ("func", "quiet", "manifest_dir")}
    target = Path(args.manifest_dir) / f"{name}.manifest.json" if args.manifest_dir else Path(f"{out}.manifest.json")
    formats.write_manifest(target, name, config, inputs)


def _hyperparams(args) -> Hyperparams:
    return Hyperparams(args.lambda1, args.lambda2, args.lambda_s, args.epsilon, args.tol, args.max_iter)


def _feature_config(args) -> FeatureConfig:
    extras = not args.words_only
    return FeatureConfig(order=args.order, pos_colored=args.pos_colored, min_count=args.min_count,
                         binary=args.binary, tags=extras, morphology=extras, ner=extras, length=extras)


# -- commands --------------------------------------------------------------

def cmd_synth(args):
    cfg = SynthConfig(n_users=args.n_users, n_tweets=args.n_tweets, n_communities=args.n_communities,
                      p_intra=args.p_intra, p_inter=args.p_inter, positive_rate=args.positive_rate,
                      homophily=args.homophily, content_signal=args.content_signal,
                      vocab_size=args.vocab_size, seed=args.seed)
    data = generate(cfg)
    out = Path(args.out)
    ids = sorted(data.labels)
    y = np.array([data.labels[t] for t in ids])
    train, _ = stratified_split(y, args.train_fraction, args.seed)
    known = {ids[i] for i in train}
    formats.write_edge_list(out / "edges.tsv", data.user_graph)
    by_id = {r.tweet_id: r for r in data.records}
    formats.write_records(out / "tweets.tsv", [by_id[t] for t in ids],
                          {t: (data.labels[t] if t in known else None) for t in ids})
    formats.write_labels(out / "labels.tsv", data.labels)
    stats = {k: data.stats[k] for k in sorted(data.stats)}
    formats._write_text(out / "stats.json", json.dumps(stats, indent=2, sort_keys=True) + "\n")
    target = Path(args.manifest_dir) / "synth.manifest.json" if args.manifest_dir else out / "manifest.json"
    config = {**cfg.as_dict(), "train_fraction": args.train_fraction}
    formats.write_manifest(target, "synth", config)
    log.info("wrote %d tweets (label rate %.3f, %.1f links per tweet) to %s", len(ids),
             data.stats["label_rate"], data.stats["mean_interactions_per_tweet"], out)


def cmd_convert(args):
    g = line_graph(formats.read_edge_list(args.edges))
    formats.write_tweet_graph(args.out, g)
    _manifest(args, "convert", args.out, [args.edges])
    log.info("%d tweets, %d links", g.n, g.n_links)


def _labeled_ids(records):
    return [r.tweet_id for r in records if r.label is not None]


def cmd_laplacian(args):
    g = formats.read_tweet_graph(args.graph)
    if args.restrict_to:
        keep = set(_labeled_ids(formats.read_records(args.restrict_to)))
        missing = keep.difference(g.nodes)
        if missing:
            raise ValidationError(f"labeled tweet {sorted(missing)[0]!r} is not in the tweet graph")
        g = g.subgraph([t for t in g.nodes if t in keep])
    lap = graph_laplacian(g, args.damping)
    formats.write_coo(args.out, lap.L, g.nodes)
    _manifest(args, "laplacian", args.out, [args.graph, args.restrict_to])
    log.info("Laplacian over %d tweets", g.n)


def cmd_train(args):
    records = formats.read_records(args.records, args.annotations)
    by_id = {r.tweet_id: r for r in records}
    h = _hyperparams(args)
    config = _feature_config(args)
    labeled = set(_labeled_ids(records))
    if not labeled:
        raise ValidationError(f"{args.records}: no labeled tweets to train on")

    L, graph_ids = None, None
    if args.laplacian:
        Lm, graph_ids = formats.read_coo(args.laplacian)
        if graph_ids is None:
            raise ValidationError(f"{formats.ids_path(args.laplacian)}: tweet id file missing")
        L = Lm.toarray()
    elif args.graph:
        g = formats.read_tweet_graph(args.graph)
        if not args.transductive:
            missing = labeled.difference(g.nodes)
            if missing:
                raise ValidationError(f"labeled tweet {sorted(missing)[0]!r} is not in the tweet graph")
            g = g.subgraph([t for t in g.nodes if t in labeled])
        L, graph_ids = graph_laplacian(g, args.damping).L, g.nodes
    elif h.lambda_s > 0:
        raise ValidationError("lambda_s > 0 needs --graph or --laplacian")

    if graph_ids is not None and not args.transductive:
        if set(graph_ids) != labeled:
            raise ValidationError("Laplacian tweets differ from the labeled tweets; "
                                  "build it with --restrict-to or use --transductive")
        train_ids = list(graph_ids)
    else:
        train_ids = sorted(labeled)
    train_recs = [by_id[t] for t in train_ids]
    X, vocab = build_matrix(train_recs, None, args.norm, config)
    y = np.array([r.label for r in train_recs])
    groups = assign_groups(vocab, config.pos_colored)
    x_graph = None
    if L is None:
        L = np.zeros((len(train_ids), len(train_ids)))
    elif args.transductive:
        unknown = [t for t in graph_ids if t not in by_id]
        if unknown:
            raise ValidationError(f"graph tweet {unknown[0]!r} has no record")
        x_graph = build_matrix([by_id[t] for t in graph_ids], vocab, args.norm, config)[0]
    w, report = fit(X, label_matrix(y), L, h, groups, x_graph=x_graph)
    formats.write_model(args.out, w, vocab, h, config, len(train_ids), args.norm)
    rep = {"converged": report.converged, "iterations": report.iterations,
           "final_objective": report.final_objective, "final_sparsity": report.final_sparsity,
           "objective_trace": report.objective_trace, "smooth_trace": report.smooth_trace,
           "l1_trace": report.l1_trace, "prox_steps": report.prox_steps}
    formats._write_text(f"{args.out}.report.json", json.dumps(rep, indent=2, sort_keys=True) + "\n")
    _manifest(args, "train", args.out, [args.records, args.annotations, args.graph, args.laplacian])
    if not report.converged:
        log.warning("no convergence after %d iterations", report.iterations)
    log.info("m=%d features, n=%d tweets, %d iterations, objective %.6g", w.shape[0], len(train_ids),
             report.iterations, report.final_objective)


def cmd_predict(args):
    model = formats.read_model(args.model)
    records = formats.read_records(args.records, args.annotations)
    if not args.all:
        records = [r for r in records if r.label is None]
    if not records:
        raise ValidationError(f"{args.records}: nothing to predict (use --all to score labeled tweets)")
    X, _ = build_matrix(records, model["vocabulary"], model["norm"], model["features"])
    w = model["weights"]
    formats.write_predictions(args.out, X.tweet_ids, predict_labels(X, w), scores(X, w))
    _manifest(args, "predict", args.out, [args.model, args.records, args.annotations])
    log.info("scored %d tweets", len(records))


def cmd_evaluate(args):
    pred = formats.read_predictions(args.predictions)
    truth = formats.read_labels(args.labels)
    missing = [t for t in pred if t not in truth]
    if missing:
        raise ValidationError(f"no reference label for predicted tweet {missing[0]!r}")
    ids = sorted(pred)
    counts = ConfusionCounts.from_labels([truth[t] for t in ids], [pred[t] for t in ids])
    p, r, f = metrics(counts)
    rows = [AblationRow(args.mode, f, p, r, counts)]
    _emit_table(args, rows)
    _manifest(args, "evaluate", args.out or "evaluate", [args.predictions, args.labels])


def cmd_ablate(args):
    graph = line_graph(formats.read_edge_list(args.edges))
    records = formats.read_records(args.records, args.annotations)
    labels = formats.read_labels(args.labels)
    data = Dataset.build(graph, records, labels)
    cfg = AblationConfig("combined", _hyperparams(args), args.train_fraction, args.seed, args.damping,
                         _feature_config(args), args.norm, args.transductive)
    rows = run_ablation(cfg, data, args.modes, args.folds)
    _emit_table(args, rows)
    _manifest(args, "ablate", args.out or "ablate", [args.edges, args.records, args.labels, args.annotations])


def _emit_table(args, rows):
    text = table_json(rows) if args.json else format_table(rows)
    if args.out:
        formats._write_text(args.out, text)
    if not args.quiet or not args.out:
        sys.stdout.write(text)


# -- parser ----------------------------------------------------------------

def _add_solver_flags(p):
    d = Hyperparams()
    p.add_argument("--lambda1", type=float, default=d.lambda1, help="l1 weight (default %(default)s)")
    p.add_argument("--lambda2", type=float, default=d.lambda2, help="group-norm weight (default %(default)s)")
    p.add_argument("--lambda-s", type=float, default=d.lambda_s, help="graph smoothness weight (default %(default)s)")
    p.add_argument("--tol", type=float, default=d.tol)
    p.add_argument("--max-iter", type=int, default=d.max_iter)
    p.add_argument("--epsilon", type=float, default=d.epsilon, help="floor for group norms in the reweighting")
    p.add_argument("--transductive", action="store_true",
                   help="let the graph penalty span unlabeled tweets too")
    p.add_argument("--damping", type=float, default=DEFAULT_DAMPING)


def _add_feature_flags(p):
    d = FeatureConfig()
    p.add_argument("--order", type=int, default=d.order, help="longest word n-gram")
    p.add_argument("--min-count", type=int, default=d.min_count)
    p.add_argument("--pos-colored", action="store_true", help="append POS tags to word n-grams")
    p.add_argument("--binary", action="store_true", help="0/1 features instead of counts")
    p.add_argument("--words-only", action="store_true", help="drop tag, morphology, entity and length features")
    p.add_argument("--norm", choices=("unit-l2", "none"), default="unit-l2")
    p.add_argument("--annotations", help="token annotation sidecar file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netcontent", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--quiet", action="store_true")
    ap.add_argument("--manifest-dir")
    # global flags are also accepted after the sub-command
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("--manifest-dir", default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)
    _sub = sub.add_parser
    sub.add_parser = lambda *a, **k: _sub(*a, parents=[common], **k)

    p = sub.add_parser("synth", help="write a synthetic dataset directory")
    d = SynthConfig()
    p.add_argument("-o", "--out", required=True)
    for name in ("n_users", "n_tweets", "n_communities", "vocab_size"):
        p.add_argument("--" + name.replace("_", "-"), type=int, default=getattr(d, name))
    for name in ("p_intra", "p_inter", "positive_rate", "homophily", "content_signal"):
        p.add_argument("--" + name.replace("_", "-"), type=float, default=getattr(d, name))
    p.add_argument("--train-fraction", type=float, default=0.8,
                   help="share of tweets whose label is kept in tweets.tsv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("convert", help="edge list to tweet graph")
    p.add_argument("edges")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("laplacian", help="tweet graph to Laplacian")
    p.add_argument("graph")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--damping", type=float, default=DEFAULT_DAMPING)
    p.add_argument("--restrict-to", metavar="RECORDS", help="keep only the labeled tweets of this file")
    p.set_defaults(func=cmd_laplacian)

    p = sub.add_parser("train", help="fit a model")
    p.add_argument("--records", required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--graph", help="tweet graph file; the Laplacian is built internally")
    g.add_argument("--laplacian", help="precomputed Laplacian file")
    p.add_argument("-o", "--out", required=True)
    _add_solver_flags(p)
    _add_feature_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score tweets")
    p.add_argument("--model", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--annotations")
    p.add_argument("--all", action="store_true", help="score labeled tweets too")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="precision, recall and F1 of predictions")
    p.add_argument("--predictions", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--mode", default="model", help="row name in the table")
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="three-mode comparison")
    p.add_argument("--edges", required=True)
    p.add_argument("--records", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--modes", nargs="+", choices=MODES, default=list(MODES))
    p.add_argument("--folds", type=int)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--json", action="store_true")
    p.add_argument("-o", "--out")
    _add_solver_flags(p)
    _add_feature_flags(p)
    p.set_defaults(func=cmd_ablate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s")
    try:
        args.func(args)
    except NetContentError as exc:
        print(f"netcontent {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
