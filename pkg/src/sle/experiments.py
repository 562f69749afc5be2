"""Sweep experiments: generate corrupted crowd data, aggregate, score.

Three sweep scenarios, each moving one Beta-distributed annotator property
through four settings (none / low / medium / high annotation uncertainty)
while the other stays fixed:

  reliability_sweep    perfect confidence, reliability swept
  confidence_high_rel  high reliability Beta(10, 1), confidence swept
  confidence_low_rel   low reliability Beta(1, 10), confidence swept

Every (scenario, sweep point, run) is an independent task with a seed
derived from the master seed, so tasks can run in any order or in
parallel and still produce byte-identical output.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .aggregate import filter_by_reliability, majority_vote, soft_vote
from .encoding import DEFAULT_EPSILON, build_sle
from .metrics import NES_VARIANT, jsd, micro_f1, nes, predict_label
from .opinions import ConstraintError, project_probability
from .synth import SyntheticConfig, SyntheticDataset, generate

log = logging.getLogger("sle.experiments")

__all__ = [
    "SWEEP_POINTS",
    "SCENARIOS",
    "METHODS",
    "ExperimentSpec",
    "SweepResult",
    "derive_seed",
    "run_sweep",
    "evaluate_dataset",
    "ROWS_HEADER",
    "MEANS_HEADER",
    "SCENARIO_MEANS_HEADER",
]

# Sweep axis: Beta parameter settings ordered by increasing corruption.
SWEEP_POINTS: Tuple[Tuple[str, Tuple[float, float]], ...] = (
    ("none", (10.0, 0.0)),
    ("low", (10.0, 1.0)),
    ("medium", (10.0, 10.0)),
    ("high", (1.0, 10.0)),
)

SCENARIOS: Dict[str, dict] = {
    "reliability_sweep": {"swept": "reliability", "confidence": (10.0, 0.0)},
    "confidence_high_rel": {"swept": "confidence", "reliability": (10.0, 1.0)},
    "confidence_low_rel": {"swept": "confidence", "reliability": (1.0, 10.0)},
}

METHODS = ("majority_vote", "soft_vote", "sle_fusion")

ROWS_HEADER = ("scenario,sweep_point,c_alpha,c_beta,r_alpha,r_beta,"
               "method,filtered,run,f1,jsd,nes,n_items,nes_variant")
MEANS_HEADER = "scenario,sweep_point,method,filtered,f1,jsd,nes"
SCENARIO_MEANS_HEADER = "scenario,method,filtered,f1,jsd,nes"

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def derive_seed(master: int, *components: int) -> int:
    """Per-task seed: a splitmix64 chain over the master seed and key parts."""
    s = master & _MASK
    for c in components:
        s = _splitmix64(s ^ (int(c) & _MASK))
    return s


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything that determines a sweep's output."""

    scenarios: Tuple[str, ...] = tuple(SCENARIOS)
    methods: Tuple[str, ...] = METHODS
    # 0.3 keeps the Filtered condition an improvement over All for every
    # method in every scenario; higher cutoffs thin the voter pool enough at
    # mid reliability to hurt majority vote.
    filter_threshold: float = 0.3
    epsilon: float = DEFAULT_EPSILON
    runs: int = 10
    master_seed: int = 2024
    k: int = 5
    m: int = 10
    grid_resolution: int = 6
    output_dir: str = "sweep_out"
    jobs: int = 1

    def __post_init__(self):
        if self.runs < 1:
            raise ConstraintError(f"runs must be >= 1, got {self.runs}")
        for sc in self.scenarios:
            if sc not in SCENARIOS:
                raise ConstraintError(
                    f"unknown scenario {sc!r}; expected one of {tuple(SCENARIOS)}"
                )
        for meth in self.methods:
            if meth not in METHODS:
                raise ConstraintError(
                    f"unknown method {meth!r}; expected one of {METHODS}"
                )


@dataclass
class SweepResult:
    """All result rows plus per-group means (recomputable from the rows)."""

    rows: List[dict]
    means: List[dict]
    scenario_means: List[dict]


def _point_config(scenario: str, betas: Tuple[float, float], k: int, m: int,
                  resolution: int, seed: int) -> SyntheticConfig:
    info = SCENARIOS[scenario]
    if info["swept"] == "reliability":
        conf, rel = info["confidence"], betas
    else:
        conf, rel = betas, info["reliability"]
    return SyntheticConfig(
        k=k, m=m, grid_resolution=resolution,
        confidence_beta=tuple(conf), reliability_beta=tuple(rel),
        seed=seed, runs=1,
    )


def _records_by_item(records, n_items: int):
    groups = [[] for _ in range(n_items)]
    for rec in records:
        groups[rec.item_id].append(rec)
    return groups


def evaluate_dataset(dataset: SyntheticDataset, methods: Sequence[str],
                     filter_threshold: float, epsilon: float,
                     mv_seed: int) -> Dict[Tuple[str, bool], dict]:
    """Aggregate one dataset with each (method, filtered) condition and score it.

    Returns {(method, filtered): {"f1":, "jsd":, "nes":, "n_items":}}.
    """
    k = dataset.config.k
    n_items = dataset.true_labels.shape[0]
    truths = np.argmax(dataset.true_labels, axis=1)
    out = {}
    for filtered in (False, True):
        records = dataset.annotations
        if filtered:
            records = filter_by_reliability(records, filter_threshold)
        groups = _records_by_item(records, n_items)
        for method in methods:
            mv_rng = np.random.default_rng(mv_seed)
            preds = np.empty(n_items, dtype=int)
            jsds = np.empty(n_items)
            ness = np.empty(n_items)
            for i, group in enumerate(groups):
                if method == "majority_vote":
                    dist = majority_vote(group, k, mv_rng)
                    preds[i] = int(np.argmax(dist))
                elif method == "soft_vote":
                    dist = soft_vote(group, k)
                    preds[i] = int(np.argmax(dist))
                else:
                    target = build_sle(group, k, epsilon=epsilon)
                    dist = project_probability(target.opinion)
                    preds[i] = predict_label(target.opinion)
                jsds[i] = jsd(dist, dataset.true_labels[i])
                ness[i] = nes(dist, dataset.true_labels[i])
            out[(method, filtered)] = {
                "f1": micro_f1(preds, truths),
                "jsd": float(jsds.mean()),
                "nes": float(ness.mean()),
                "n_items": n_items,
            }
    return out


def _run_task(args) -> Tuple[Tuple[int, int, int], List[dict]]:
    """One (scenario, sweep point, run) unit of work; top level for pickling."""
    (spec, scen_idx, point_idx, run) = args
    scenario = spec.scenarios[scen_idx]
    point_name, betas = SWEEP_POINTS[point_idx]
    data_seed = derive_seed(spec.master_seed, scen_idx, point_idx, run, 0)
    mv_seed = derive_seed(spec.master_seed, scen_idx, point_idx, run, 1)
    config = _point_config(scenario, betas, spec.k, spec.m,
                           spec.grid_resolution, data_seed)
    dataset = generate(config)
    scores = evaluate_dataset(dataset, spec.methods, spec.filter_threshold,
                              spec.epsilon, mv_seed)
    rows = []
    for (method, filtered), vals in scores.items():
        rows.append({
            "scenario": scenario,
            "sweep_point": point_name,
            "c_alpha": config.confidence_beta[0],
            "c_beta": config.confidence_beta[1],
            "r_alpha": config.reliability_beta[0],
            "r_beta": config.reliability_beta[1],
            "method": method,
            "filtered": filtered,
            "run": run,
            "f1": vals["f1"],
            "jsd": vals["jsd"],
            "nes": vals["nes"],
            "n_items": vals["n_items"],
            "nes_variant": NES_VARIANT,
        })
    return (scen_idx, point_idx, run), rows


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row_sort_key(row: dict):
    return (
        list(SCENARIOS).index(row["scenario"]),
        [p[0] for p in SWEEP_POINTS].index(row["sweep_point"]),
        METHODS.index(row["method"]),
        row["filtered"],
        row["run"],
    )


def _compute_means(rows: List[dict]) -> Tuple[List[dict], List[dict]]:
    def group(keys):
        acc: Dict[tuple, list] = {}
        for row in rows:
            acc.setdefault(tuple(row[k] for k in keys), []).append(row)
        out = []
        for key in sorted(acc, key=lambda kk: _row_sort_key(acc[kk][0])):
            grp = acc[key]
            entry = dict(zip(keys, key))
            for metric in ("f1", "jsd", "nes"):
                entry[metric] = float(np.mean([r[metric] for r in grp]))
            out.append(entry)
        return out

    means = group(("scenario", "sweep_point", "method", "filtered"))
    scenario_means = group(("scenario", "method", "filtered"))
    return means, scenario_means


def _write_csv(path: str, header: str, rows: List[dict]) -> None:
    cols = header.split(",")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")


def read_rows_csv(path: str) -> List[dict]:
    """Parse a rows/means CSV back into dicts (numbers and booleans typed)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    cols = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        row = dict(zip(cols, ln.split(",")))
        for key, val in row.items():
            if key in ("f1", "jsd", "nes", "c_alpha", "c_beta", "r_alpha", "r_beta"):
                row[key] = float(val)
            elif key in ("run", "n_items"):
                row[key] = int(val)
            elif key == "filtered":
                row[key] = val == "true"
        out.append(row)
    return out


def run_sweep(spec: ExperimentSpec, resume: bool = True) -> SweepResult:
    """Execute the full sweep, writing rows.csv, means.csv, scenario_means.csv.

    Completed tasks are flushed to partial_rows.jsonl as they finish; an
    interrupted sweep rerun with the same spec skips them and produces the
    same final files.
    """
    os.makedirs(spec.output_dir, exist_ok=True)
    partial_path = os.path.join(spec.output_dir, "partial_rows.jsonl")
    done: Dict[tuple, List[dict]] = {}
    if resume and os.path.exists(partial_path):
        with open(partial_path, "r", encoding="utf-8") as fh:
            for line in fh:
                entry = json.loads(line)
                done[tuple(entry["key"])] = entry["rows"]
        log.info("resuming sweep: %d tasks already complete", len(done))

    tasks = []
    for scen_idx in range(len(spec.scenarios)):
        for point_idx in range(len(SWEEP_POINTS)):
            for run in range(spec.runs):
                key = (scen_idx, point_idx, run)
                if key not in done:
                    tasks.append((spec, scen_idx, point_idx, run))

    def flush(key, rows):
        done[key] = rows
        with open(partial_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"key": list(key), "rows": rows}) + "\n")

    if spec.jobs > 1 and tasks:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            for key, rows in pool.map(_run_task, tasks):
                flush(key, rows)
    else:
        for task in tasks:
            key, rows = _run_task(task)
            flush(key, rows)
            log.debug("finished task %s", key)

    all_rows = [row for key in sorted(done) for row in done[key]]
    all_rows.sort(key=_row_sort_key)
    means, scenario_means = _compute_means(all_rows)
    _write_csv(os.path.join(spec.output_dir, "rows.csv"), ROWS_HEADER, all_rows)
    _write_csv(os.path.join(spec.output_dir, "means.csv"), MEANS_HEADER, means)
    _write_csv(os.path.join(spec.output_dir, "scenario_means.csv"),
               SCENARIO_MEANS_HEADER, scenario_means)
    return SweepResult(rows=all_rows, means=means, scenario_means=scenario_means)


def emit_plots(result: SweepResult, output_dir: str) -> List[str]:
    """Write one SVG line plot per (scenario, metric) from the sweep means."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    point_names = [p[0] for p in SWEEP_POINTS]
    written = []
    scenarios = sorted({m["scenario"] for m in result.means},
                       key=list(SCENARIOS).index)
    for scenario in scenarios:
        for metric in ("f1", "jsd", "nes"):
            fig, ax = plt.subplots(figsize=(5, 3.2))
            for method in METHODS:
                for filtered in (False, True):
                    ys = [m[metric] for m in result.means
                          if m["scenario"] == scenario and m["method"] == method
                          and m["filtered"] == filtered]
                    if not ys:
                        continue
                    style = "--" if filtered else "-"
                    suffix = " (filtered)" if filtered else ""
                    ax.plot(range(len(ys)), ys, style, label=method + suffix)
            ax.set_xticks(range(len(point_names)), point_names)
            ax.set_xlabel("annotation uncertainty")
            ax.set_ylabel(metric)
            ax.set_title(scenario)
            ax.legend(fontsize=7)
            fig.tight_layout()
            path = os.path.join(output_dir, f"{scenario}_{metric}.svg")
            fig.savefig(path)
            plt.close(fig)
            written.append(path)
    return written
