"""Dataset and report file formats.

A dataset lives in a directory as two files:

  dataset.jsonl   one annotation per line:
                  {"item": id, "annotator": id, "label": int | [float],
                   "confidence": float?, "reliability": float?}
  manifest.json   {"k":, "m":, "n":, "true_labels": [[...]],
                   "config": generator settings or null}

Metric reports serialize to a small fixed-column CSV.
"""

from __future__ import annotations

import json
import os
from typing import List, Optional, Tuple

import numpy as np

from .encoding import AnnotationRecord
from .metrics import MetricReport
from .opinions import ConstraintError
from .synth import SyntheticDataset

__all__ = [
    "write_dataset",
    "read_dataset",
    "REPORT_HEADER",
    "write_reports",
    "read_reports",
    "write_loss_trace",
]

REPORT_HEADER = "method,f1,jsd,nes,n_items,sweep_point,nes_variant"


class DatasetFormatError(ConstraintError):
    """A dataset file failed to parse or validate."""


def _record_to_json(rec: AnnotationRecord) -> dict:
    label = rec.label
    if isinstance(label, np.ndarray):
        label = label.tolist()
    doc = {"item": rec.item_id, "annotator": rec.annotator_id, "label": label}
    if rec.confidence is not None:
        doc["confidence"] = rec.confidence
    if rec.reliability is not None:
        doc["reliability"] = rec.reliability
    return doc


def write_dataset(dataset: SyntheticDataset, out_dir: str) -> None:
    """Write dataset.jsonl and manifest.json into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "dataset.jsonl"), "w", encoding="utf-8",
              newline="\n") as fh:
        for rec in dataset.annotations:
            fh.write(json.dumps(_record_to_json(rec)) + "\n")
    cfg = dataset.config
    manifest = {
        "k": cfg.k,
        "m": cfg.m,
        "n": int(dataset.true_labels.shape[0]),
        "true_labels": dataset.true_labels.tolist(),
        "annotator_profiles": [list(p) for p in dataset.annotator_profiles],
        "config": {
            "k": cfg.k, "m": cfg.m, "grid_resolution": cfg.grid_resolution,
            "confidence_beta": list(cfg.confidence_beta),
            "reliability_beta": list(cfg.reliability_beta),
            "seed": cfg.seed, "runs": cfg.runs,
            "permute_literal": cfg.permute_literal,
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8",
              newline="\n") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def read_dataset(path: str) -> Tuple[List[AnnotationRecord], dict]:
    """Read a dataset directory; returns (records, manifest)."""
    data_path = os.path.join(path, "dataset.jsonl")
    manifest_path = os.path.join(path, "manifest.json")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    for key in ("k", "n", "true_labels"):
        if key not in manifest:
            raise DatasetFormatError(f"manifest is missing required field {key!r}")
    records = []
    with open(data_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                records.append(AnnotationRecord(
                    item_id=doc["item"],
                    annotator_id=doc["annotator"],
                    label=doc["label"],
                    confidence=doc.get("confidence"),
                    reliability=doc.get("reliability"),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetFormatError(
                    f"{data_path}: bad record at line {lineno}: {exc}"
                ) from exc
    if not records:
        raise DatasetFormatError(f"{data_path} contains no records")
    return records, manifest


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def write_reports(reports: List[MetricReport], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(REPORT_HEADER + "\n")
        for r in reports:
            fh.write(",".join(_fmt(v) for v in (
                r.method, r.f1, r.jsd, r.nes, r.n_items, r.sweep_point,
                r.nes_variant)) + "\n")


def read_reports(path: str) -> List[MetricReport]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != REPORT_HEADER:
        raise DatasetFormatError(f"{path}: unexpected report header")
    out = []
    for ln in lines[1:]:
        method, f1, jsd_v, nes_v, n_items, sweep_point, variant = ln.split(",")
        out.append(MetricReport(
            method=method, f1=float(f1), jsd=float(jsd_v), nes=float(nes_v),
            n_items=int(n_items), sweep_point=sweep_point, nes_variant=variant,
        ))
    return out


def write_loss_trace(trace, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,loss\n")
        for epoch, value in enumerate(trace):
            fh.write(f"{epoch},{value!r}\n")
