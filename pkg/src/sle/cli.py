"""Command-line harness: generate, sweep, train, evaluate.

Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical
failure. Set SLE_LOG=debug|info|warning to control verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import io as sleio
from .encoding import DEFAULT_EPSILON, build_sle
from .experiments import (
    METHODS,
    SCENARIOS,
    ExperimentSpec,
    emit_plots,
    run_sweep,
)
from .metrics import MetricReport, jsd, micro_f1, nes, predict_label
from .model import (
    LOSSES,
    NumericalError,
    TrainConfig,
    load_model,
    predict_opinions,
    save_model,
    train,
)
from .opinions import ConstraintError, project_probability
from .synth import SyntheticConfig, generate

log = logging.getLogger("sle.cli")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

_METHOD_ALIASES = {
    "mv": "majority_vote", "majority_vote": "majority_vote",
    "soft": "soft_vote", "soft_vote": "soft_vote",
    "sle": "sle_fusion", "sle_fusion": "sle_fusion",
}


def _load_json_config(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConstraintError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def _require(config: dict, fields, path: str) -> None:
    missing = [f for f in fields if f not in config]
    if missing:
        raise ConstraintError(f"{path}: missing required field(s) {missing}")


def cmd_generate(args) -> int:
    config = _load_json_config(args.config)
    _require(config, ("k", "m", "grid_resolution", "confidence_beta",
                      "reliability_beta"), args.config)
    synth_config = SyntheticConfig(
        k=int(config["k"]),
        m=int(config["m"]),
        grid_resolution=int(config["grid_resolution"]),
        confidence_beta=tuple(config["confidence_beta"]),
        reliability_beta=tuple(config["reliability_beta"]),
        seed=int(config.get("seed", args.seed)),
        runs=int(config.get("runs", 1)),
        permute_literal=bool(config.get("permute_literal", False)),
    )
    dataset = generate(synth_config)
    sleio.write_dataset(dataset, args.out)
    print(f"wrote {args.out}: N={dataset.true_labels.shape[0]} items, "
          f"M={synth_config.m} annotators, K={synth_config.k} classes")
    for m, (c, r) in enumerate(dataset.annotator_profiles):
        print(f"  annotator {m}: confidence={c:.4f} reliability={r:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    methods = tuple(_METHOD_ALIASES.get(name.strip().lower())
                    for name in args.methods.split(","))
    if None in methods:
        raise ConstraintError(
            f"unknown method in --methods {args.methods!r}; "
            f"expected names among {sorted(_METHOD_ALIASES)}"
        )
    scenarios = tuple(SCENARIOS) if args.scenario == "all" else (args.scenario,)
    spec = ExperimentSpec(
        scenarios=scenarios,
        methods=methods,
        filter_threshold=args.filter_threshold,
        epsilon=args.epsilon,
        runs=args.runs,
        master_seed=args.seed,
        k=args.k,
        m=args.m,
        grid_resolution=args.grid_resolution,
        output_dir=args.out,
        jobs=args.jobs,
    )
    result = run_sweep(spec)
    print(f"wrote {len(result.rows)} rows to {args.out}/rows.csv")
    if args.plots:
        for path in emit_plots(result, args.out):
            print(f"wrote {path}")
    return EXIT_OK


def _encode_items(records, manifest, epsilon):
    k = int(manifest["k"])
    by_item = {}
    for rec in records:
        by_item.setdefault(rec.item_id, []).append(rec)
    item_ids = sorted(by_item)
    targets = [build_sle(by_item[i], k, epsilon=epsilon).opinion
               for i in item_ids]
    return item_ids, targets


def cmd_train(args) -> int:
    config = _load_json_config(args.config)
    train_config = TrainConfig(
        loss=config.get("loss", args.loss),
        learning_rate=float(config.get("learning_rate", 0.05)),
        epochs=int(config.get("epochs", 200)),
        batch_size=int(config.get("batch_size", 32)),
        epsilon_smooth=float(config.get("epsilon_smooth", args.epsilon)),
        seed=int(config.get("seed", args.seed)),
        hidden=tuple(config.get("hidden", ())),
    )
    records, manifest = sleio.read_dataset(args.dataset)
    true_labels = np.asarray(manifest["true_labels"], dtype=np.float64)
    item_ids, targets = _encode_items(records, manifest, train_config.epsilon_smooth)
    features = true_labels[item_ids]

    rng = np.random.default_rng(np.random.SeedSequence((train_config.seed, 0x5B11)))
    order = rng.permutation(len(item_ids))
    n_train = max(1, int(0.8 * len(order)))
    train_idx, test_idx = order[:n_train], order[n_train:]
    if test_idx.size == 0:
        test_idx = train_idx

    result = train(features[train_idx], [targets[i] for i in train_idx],
                   train_config)
    os.makedirs(args.out, exist_ok=True)
    save_model(result.params, os.path.join(args.out, "model.json"))
    sleio.write_loss_trace(result.loss_trace, os.path.join(args.out, "loss_trace.csv"))

    report = _evaluate_params(result.params, features[test_idx],
                              true_labels[test_idx],
                              method=f"model:{train_config.loss}")
    sleio.write_reports([report], os.path.join(args.out, "report.csv"))
    final = result.loss_trace[-1] if result.loss_trace else float("nan")
    print(f"trained {train_config.loss} model: final loss {final:.6g}, "
          f"held-out f1 {report.f1:.4f} (report in {args.out}/report.csv)")
    return EXIT_OK


def _evaluate_params(params, features, true_labels, method: str) -> MetricReport:
    if features.shape[0] == 0:
        raise ConstraintError("cannot evaluate on an empty dataset")
    opinions = predict_opinions(features, params)
    truths = np.argmax(true_labels, axis=1)
    preds = [predict_label(op) for op in opinions]
    dists = [project_probability(op) for op in opinions]
    return MetricReport(
        method=method,
        f1=micro_f1(preds, truths),
        jsd=float(np.mean([jsd(d, t) for d, t in zip(dists, true_labels)])),
        nes=float(np.mean([nes(d, t) for d, t in zip(dists, true_labels)])),
        n_items=features.shape[0],
        sweep_point="dataset",
    )


def cmd_evaluate(args) -> int:
    params = load_model(args.model)
    records, manifest = sleio.read_dataset(args.dataset)
    true_labels = np.asarray(manifest["true_labels"], dtype=np.float64)
    if true_labels.shape[1] != params.n_classes:
        raise ConstraintError(
            f"model predicts K={params.n_classes} classes but dataset has "
            f"K={true_labels.shape[1]}"
        )
    report = _evaluate_params(params, true_labels, true_labels, method="model")
    sleio.write_reports([report], args.out)
    print(f"f1={report.f1:.4f} jsd={report.jsd:.4f} nes={report.nes:.4f} "
          f"-> {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sle",
        description="Subjective-logic label encoding experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic dataset")
    p_gen.add_argument("--config", required=True, help="generator config JSON")
    p_gen.add_argument("--out", required=True, help="output dataset directory")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.set_defaults(func=cmd_generate)

    p_sweep = sub.add_parser("sweep", help="run aggregation comparison sweeps")
    p_sweep.add_argument("--out", required=True, help="output directory")
    p_sweep.add_argument("--scenario", default="all",
                         choices=("all", *SCENARIOS))
    p_sweep.add_argument("--methods", default="mv,soft,sle")
    p_sweep.add_argument("--runs", type=int, default=10)
    p_sweep.add_argument("--seed", type=int, default=2024)
    p_sweep.add_argument("--filter-threshold", type=float, default=0.3)
    p_sweep.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--k", type=int, default=5)
    p_sweep.add_argument("--m", type=int, default=10)
    p_sweep.add_argument("--grid-resolution", type=int, default=6)
    p_sweep.add_argument("--plots", action="store_true",
                         help="also emit SVG line plots")
    p_sweep.set_defaults(func=cmd_sweep)

    p_train = sub.add_parser("train", help="train an opinion classifier")
    p_train.add_argument("--dataset", required=True, help="dataset directory")
    p_train.add_argument("--config", required=True, help="training config JSON")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--loss", default="reverse_kl", choices=LOSSES)
    p_train.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="evaluate a trained model")
    p_eval.add_argument("--model", required=True, help="model JSON file")
    p_eval.add_argument("--dataset", required=True, help="dataset directory")
    p_eval.add_argument("--out", required=True, help="output report CSV")
    p_eval.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("SLE_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConstraintError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
