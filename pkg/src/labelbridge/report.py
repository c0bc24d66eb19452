"""Run-directory reports: final-epoch summary, validation curves, label histograms."""

from __future__ import annotations

import csv
import json
import os

from labelbridge.baseline_map import OPTIMISM_NOTE, label_distribution
from labelbridge.corpus.formats import read_pairs
from labelbridge.trainer import DATASETS, read_metrics

CURVE_SERIES = ("ours", "supervisor_only", "no_label")
EVAL_VARIANTS = ("ours", "supervisor_only", "no_label", "direct_map")


class IncompleteRunError(ValueError):
    pass


def _val_table(records):
    table = {}
    for r in records:
        if r.phase == "val":
            table.setdefault(r.epoch, {})[(r.dataset, r.variant)] = r.accuracy
    return table


def emit_report(run_dir):
    """Write summary.json, curves.csv and histogram_<side>.csv; returns the summary dict."""
    path = os.path.join(run_dir, "metrics.csv")
    if not os.path.exists(path):
        raise IncompleteRunError(f"{path}: no metrics file")
    table = _val_table(read_metrics(path))
    if not table:
        raise IncompleteRunError(f"{path}: no validation records")
    epochs = sorted(table)
    if epochs != list(range(1, len(epochs) + 1)):
        raise IncompleteRunError(f"{path}: epochs {epochs} are not contiguous from 1")
    for e in epochs:
        missing = [(d, v) for d in DATASETS.values() for v in EVAL_VARIANTS if (d, v) not in table[e]]
        if missing:
            raise IncompleteRunError(f"{path}: epoch {e} lacks {missing}")

    final = table[epochs[-1]]
    summary = {d: {v: final[(d, v)] for v in EVAL_VARIANTS} for d in DATASETS.values()}
    for side, d in DATASETS.items():
        sup_path = os.path.join(run_dir, f"metrics_supervised_{side}.csv")
        if os.path.exists(sup_path):
            sup = [r for r in read_metrics(sup_path) if r.phase == "val"]
            if sup:
                summary[d]["supervised"] = max(sup, key=lambda r: r.epoch).accuracy
    with open(os.path.join(run_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(run_dir, "summary_notes.txt"), "w", encoding="utf-8") as fh:
        fh.write(OPTIMISM_NOTE + "\n")

    with open(os.path.join(run_dir, "curves.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "series", "acc_Y", "acc_Z"])
        for e in epochs:
            for s in CURVE_SERIES:
                w.writerow([e, s, repr(table[e][("Y", s)]), repr(table[e][("Z", s)])])

    pairs_path = os.path.join(run_dir, "val_pairs.tsv")
    if os.path.exists(pairs_path):
        pairs = read_pairs(pairs_path)
        for side, d in DATASETS.items():
            label_distribution(pairs, side).write_csv(os.path.join(run_dir, f"histogram_{d}.csv"))
    return summary
