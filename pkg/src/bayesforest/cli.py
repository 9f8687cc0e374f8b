"""Command-line entry point.

Subcommands:
  train         fit a chain (or several) and write the trace, rankings,
                column report, and a reproducibility manifest
  predict       score a test file against a saved trace
  cv            k-fold cross-validation on a single file
  graph         average-graph DOT/JSON export from a saved trace
  oracle-check  long-chain vs exact-enumeration self test (tiny data only)

Exit codes: 0 success, 1 failed check, 2 configuration error, 3 parse/data
error, 4 inference error.  Log verbosity comes from the BAYESFOREST_LOG
environment variable (DEBUG, INFO, ...).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time

from . import __version__
from .dataio import (
    RawTable,
    apply_cutpoints,
    columns_report,
    drop_missing,
    encode_feature_rows,
    fit_discretization,
    load_table,
    make_folds,
)
from .errors import (
    ConfigurationError,
    DataError,
    InferenceError,
    ParseError,
)
from .inference import (
    average_graph_json,
    build_average_graph,
    export_dot,
    predict_dataset,
    rank_features,
)
from .sampler import (
    RNG_NAME,
    SamplerConfig,
    SampleTrace,
    chain_class_distribution,
    enumerate_exact_posterior,
    run_chain,
    total_variation,
)
from .score import FamilyScoreCache, Hyperparams
from .datasets import tiny_dataset
from .traceio import read_trace, write_trace

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_INFERENCE = 4

HIGH_DIM_AUTO_THRESHOLD = 100

log = logging.getLogger("bayesforest")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayesforest",
        description="Selective Bayesian forest classifier: sampling, "
                    "prediction, and feature/interaction ranking.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_train = sub.add_parser("train", help="sample graphs and write a trace")
    _add_data_flags(p_train, required=True)
    _add_sampler_flags(p_train)
    p_train.add_argument("--trace-out", default="trace.jsonl")
    p_train.add_argument("--json-out", default="rankings.json",
                         help="feature-ranking JSON path")
    p_train.set_defaults(func=cmd_train)

    p_pred = sub.add_parser("predict", help="score a test file against a trace")
    _add_data_flags(p_pred, required=True)
    p_pred.add_argument("--test", required=True, help="test data path")
    p_pred.add_argument("--trace", required=True, help="trace file from train")
    p_pred.add_argument("--alpha", type=float, default=None,
                        help="pseudo-count total (default: value used in training)")
    p_pred.add_argument("--pred-out", default="predictions.csv")
    p_pred.add_argument("--metrics-out", default=None,
                        help="accuracy JSON path (requires labeled test data)")
    p_pred.set_defaults(func=cmd_predict)

    p_cv = sub.add_parser("cv", help="k-fold cross-validation on one file")
    _add_data_flags(p_cv, required=True)
    _add_sampler_flags(p_cv)
    p_cv.add_argument("--cv", type=int, default=5, help="fold count")
    p_cv.add_argument("--metrics-out", default=None)
    p_cv.set_defaults(func=cmd_cv)

    p_graph = sub.add_parser("graph", help="average-graph export from a trace")
    p_graph.add_argument("--trace", required=True)
    p_graph.add_argument("--dot-out", default="average_graph.dot")
    p_graph.add_argument("--json-out", default="average_graph.json")
    p_graph.add_argument("--high-dim", choices=("auto", "on", "off"), default="auto")
    p_graph.set_defaults(func=cmd_graph)

    p_oracle = sub.add_parser(
        "oracle-check",
        help="compare a long chain against exact enumeration (d <= 5)")
    _add_data_flags(p_oracle, required=False)
    p_oracle.add_argument("--iters", type=int, default=1_000_000)
    p_oracle.add_argument("--seed", type=int, default=0)
    p_oracle.add_argument("--alpha", type=float, default=5.0)
    p_oracle.set_defaults(func=cmd_oracle_check)
    return parser


def _add_data_flags(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--data", required=required, help="delimited data file")
    p.add_argument("--class-col", default="-1",
                   help="class column index or header name (default: last)")
    p.add_argument("--delim", default=",")
    p.add_argument("--no-header", action="store_true",
                   help="treat the first line as data, not column names")
    p.add_argument("--discretize", choices=("auto", "mdlp", "binary"),
                   default="auto")


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=int, default=None,
                   help="iterations (default: max(10000, 10d))")
    p.add_argument("--thin", type=int, default=50)
    p.add_argument("--burnin", type=float, default=0.2,
                   help="burn-in fraction in [0, 1)")
    p.add_argument("--switch-k", type=int, default=10)
    p.add_argument("--alpha", type=float, default=5.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chains", type=int, default=1)


def _parse_class_col(value: str):
    try:
        return int(value)
    except ValueError:
        return value


def _load_clean_table(args) -> RawTable:
    table = load_table(args.data, delimiter=args.delim,
                       has_header=not args.no_header,
                       class_column=_parse_class_col(args.class_col))
    return drop_missing(table)


def _prepare_dataset(args):
    table = _load_clean_table(args)
    plan = fit_discretization(table, mode=args.discretize)
    return table, plan, apply_cutpoints(table, plan)


def _table_checksum(table: RawTable) -> str:
    h = hashlib.sha256()
    if table.header is not None:
        h.update("\x1f".join(table.header).encode() + b"\n")
    for row in table.rows:
        h.update("\x1f".join(row).encode() + b"\n")
    return h.hexdigest()


def _run_chains(data, hp, args) -> SampleTrace:
    """Run --chains chains with consecutive seeds and pool their snapshots."""
    if args.chains < 1:
        raise ConfigurationError("need at least one chain")
    cache = FamilyScoreCache(data, hp)
    merged: SampleTrace | None = None
    for c in range(args.chains):
        config = SamplerConfig(iterations=args.iters, thin=args.thin,
                               burnin_fraction=args.burnin,
                               switch_k=args.switch_k, seed=args.seed + c)
        t0 = time.perf_counter()
        trace = run_chain(data, hp, config, cache=cache)
        log.info("chain %d: %d snapshots in %.2fs", c, len(trace),
                 time.perf_counter() - t0)
        if merged is None:
            merged = trace
            merged.config["chains"] = args.chains
            merged.config["feature_names"] = list(data.feature_names)
        else:
            merged.extend(trace)
    return merged


def _write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_train(args) -> int:
    table, plan, data = _prepare_dataset(args)
    hp = Hyperparams(class_arity=data.class_arity, alpha=args.alpha)
    trace = _run_chains(data, hp, args)
    write_trace(trace, args.trace_out)

    ranked = rank_features(trace)
    _write_json(args.json_out, {
        "ranking": [{"feature": data.feature_names[j], "relevance": rel}
                    for j, rel in ranked]})
    _write_json(args.trace_out + ".columns.json", columns_report(plan, data))
    manifest = {
        "command": "train",
        "version": __version__,
        "rng": RNG_NAME,
        "options": _manifest_options(args),
        "data": {"path": args.data, "checksum": _table_checksum(table),
                 "n": data.n, "d": data.d, "class_arity": data.class_arity},
        "outputs": {"trace": args.trace_out, "rankings": args.json_out,
                    "columns": args.trace_out + ".columns.json"},
    }
    _write_json(args.trace_out + ".manifest.json", manifest)
    print(f"trained on {data.n} rows x {data.d} features: "
          f"{len(trace)} snapshots -> {args.trace_out}")
    return EXIT_OK


def _manifest_options(args) -> dict:
    skip = {"func", "subcommand"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_predict(args) -> int:
    table, plan, data = _prepare_dataset(args)
    trace = read_trace(args.trace)
    if not trace.samples:
        raise InferenceError(f"trace {args.trace} holds no samples")
    if len(trace.samples[0].groups) != data.d:
        raise ConfigurationError(
            f"trace was sampled for {len(trace.samples[0].groups)} features, "
            f"training data has {data.d}")
    alpha = args.alpha if args.alpha is not None else trace.config.get("alpha", 5.0)
    hp = Hyperparams(class_arity=data.class_arity, alpha=alpha)

    # class column position is only meaningful when the widths match, so the
    # test file is loaded with a placeholder and reinterpreted below
    test_table = load_table(args.test, delimiter=args.delim,
                            has_header=not args.no_header, class_column=0)
    labels = None
    if test_table.n_cols == table.n_cols:
        test_table = RawTable(test_table.rows, test_table.header,
                              table.class_column)
        test_ds = apply_cutpoints(drop_missing(test_table), plan)
        features = test_ds.features
        labels = test_ds.klass
    elif test_table.n_cols == table.n_cols - 1:
        if args.metrics_out:
            raise ConfigurationError(
                "accuracy requested but the test file has no class column")
        rows = drop_missing(test_table).rows
        features, _ = encode_feature_rows(plan, rows)
    else:
        raise ConfigurationError(
            f"test file has {test_table.n_cols} columns, "
            f"expected {table.n_cols} or {table.n_cols - 1}")

    probs, pred = predict_dataset(trace, data, hp, features)
    _write_predictions_csv(args.pred_out, probs, pred, data.class_labels)
    print(f"wrote {probs.shape[0]} predictions -> {args.pred_out}")
    if labels is not None:
        accuracy = float((pred == labels).mean())
        print(f"accuracy: {accuracy:.4f} ({int((pred == labels).sum())}"
              f"/{labels.shape[0]})")
        if args.metrics_out:
            _write_json(args.metrics_out,
                        {"accuracy": accuracy, "n_test": int(labels.shape[0])})
    return EXIT_OK


def _write_predictions_csv(path, probs, labels, class_labels) -> None:
    names = list(class_labels) or [str(i) for i in range(probs.shape[1])]
    with open(path, "w") as fh:
        fh.write("row," + ",".join(f"p_{c}" for c in names) + ",label\n")
        for i in range(probs.shape[0]):
            cells = [str(i)] + [f"{p:.6g}" for p in probs[i]]
            cells.append(names[labels[i]] if labels[i] < len(names) else str(labels[i]))
            fh.write(",".join(cells) + "\n")


def cmd_cv(args) -> int:
    table = _load_clean_table(args)
    folds = make_folds(table.n_rows, args.cv, args.seed)
    accuracies = []
    fold_stats = []
    for f in range(folds.k):
        train_table = table.subset(folds.train_indices(f))
        test_table = table.subset(folds.test_indices(f))
        plan = fit_discretization(train_table, mode=args.discretize)
        train_ds = apply_cutpoints(train_table, plan)
        test_ds = apply_cutpoints(test_table, plan)
        hp = Hyperparams(class_arity=train_ds.class_arity, alpha=args.alpha)
        fold_args = argparse.Namespace(**vars(args))
        fold_args.seed = args.seed + f * max(args.chains, 1)
        trace = _run_chains(train_ds, hp, fold_args)
        _, pred = predict_dataset(trace, train_ds, hp, test_ds.features)
        acc = float((pred == test_ds.klass).mean())
        accuracies.append(acc)
        fold_stats.append({"fold": f, "accuracy": acc, "n_test": test_ds.n})
        print(f"fold {f}: accuracy {acc:.4f} on {test_ds.n} rows")
    mean_acc = sum(accuracies) / len(accuracies)
    print(f"mean accuracy over {folds.k} folds: {mean_acc:.4f}")
    if args.metrics_out:
        _write_json(args.metrics_out, {
            "folds": fold_stats, "mean_accuracy": mean_acc,
            "k": folds.k, "seed": args.seed})
    return EXIT_OK


def cmd_graph(args) -> int:
    trace = read_trace(args.trace)
    if not trace.samples:
        raise InferenceError(f"trace {args.trace} holds no samples")
    d = len(trace.samples[0].groups)
    if args.high_dim == "auto":
        high_dim = d > HIGH_DIM_AUTO_THRESHOLD
    else:
        high_dim = args.high_dim == "on"
    names = trace.config.get("feature_names") or [f"X{j + 1}" for j in range(d)]
    avg = build_average_graph(trace, high_dim=high_dim)
    with open(args.dot_out, "w") as fh:
        fh.write(export_dot(avg, names))
    _write_json(args.json_out, average_graph_json(avg, names))
    print(f"average graph: {len(avg.included)} nodes, "
          f"{len(avg.edge_relevance)} edges -> {args.dot_out}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    if args.data:
        _, _, data = _prepare_dataset(args)
    else:
        data = tiny_dataset(2)
    hp = Hyperparams(class_arity=data.class_arity, alpha=args.alpha)
    exact = enumerate_exact_posterior(data, hp, d_max=5)
    config = SamplerConfig(iterations=args.iters, thin=1, burnin_fraction=0.0,
                           seed=args.seed)
    t0 = time.perf_counter()
    empirical = chain_class_distribution(data, hp, config)
    tv = total_variation(empirical, exact)
    elapsed = time.perf_counter() - t0
    passed = tv < 0.05
    print(f"exact classes: {len(exact)}; sampled classes: {len(empirical)}")
    print(f"TV distance after {args.iters} iterations: {tv:.5f} "
          f"({elapsed:.1f}s) -> {'PASS' if passed else 'FAIL'} (gate 0.05)")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def main(argv=None) -> int:
    level = os.environ.get("BAYESFOREST_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, DataError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except InferenceError as e:
        print(f"inference error: {e}", file=sys.stderr)
        return EXIT_INFERENCE
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
