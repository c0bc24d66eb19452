"""Direct tag-to-tag mapping baseline and label statistics.

The best map is fit on parallel (doubly labelled) sentences.  Fitting it
on the same pairs it is scored on gives an optimistic upper bound for any
hand-designed map, which the reports state alongside the number.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass

import numpy as np

from labelbridge.corpus.records import Tagset

OPTIMISM_NOTE = ("direct map fit on the evaluation pairs themselves; "
                 "its accuracy is an optimistic upper bound for a designed mapping")

DIRECTIONS = {"z2y": ("z", "y"), "y2z": ("y", "z")}


@dataclass
class CooccurrenceMatrix:
    counts: np.ndarray  # (|source|, |target|)
    source: Tagset
    target: Tagset
    direction: str

    @property
    def total(self):
        return int(self.counts.sum())


@dataclass
class DirectMap:
    mapping: dict  # source tag -> target tag
    direction: str

    def __call__(self, tags):
        return apply_map(self, tags)


def _sides(direction):
    try:
        return DIRECTIONS[direction]
    except KeyError:
        raise ValueError(f"direction must be one of {sorted(DIRECTIONS)}, got {direction!r}") from None


def cooccurrence(pairs, direction="z2y", source: Tagset | None = None, target: Tagset | None = None):
    src_side, tgt_side = _sides(direction)
    pairs = list(pairs)
    if not pairs:
        raise ValueError("cooccurrence needs at least one parallel pair")
    source = source or Tagset.from_sentences(src_side.upper(), pairs, src_side)
    target = target or Tagset.from_sentences(tgt_side.upper(), pairs, tgt_side)
    counts = np.zeros((len(source), len(target)), dtype=np.int64)
    for p in pairs:
        for s, t in zip(p.tags(src_side), p.tags(tgt_side)):
            counts[source.id(s), target.id(t)] += 1
    return CooccurrenceMatrix(counts, source, target, direction)


def best_direct_map(matrix: CooccurrenceMatrix):
    """Row-wise argmax (ties to the lowest target index) and its accuracy.

    Token accuracy is a sum of independent per-source-tag terms, so the
    row-wise choice is globally optimal.
    """
    counts = matrix.counts
    total = counts.sum()
    if total == 0:
        raise ValueError("all-zero cooccurrence matrix")
    choice = counts.argmax(axis=1)  # argmax returns the first maximum
    mapping = {matrix.source.tags[i]: matrix.target.tags[j] for i, j in enumerate(choice)}
    acc = counts[np.arange(len(choice)), choice].sum() / total
    return DirectMap(mapping, matrix.direction), float(acc)


def map_accuracy(matrix: CooccurrenceMatrix, mapping: dict):
    """Token accuracy of an arbitrary map on a cooccurrence matrix."""
    hits = sum(matrix.counts[matrix.source.id(s), matrix.target.id(t)] for s, t in mapping.items())
    return hits / matrix.counts.sum()


def apply_map(dmap: DirectMap, tags):
    out = []
    for t in tags:
        try:
            out.append(dmap.mapping[t])
        except KeyError:
            raise KeyError(f"tag {t!r} has no image under the {dmap.direction} map") from None
    return out


def save_map(dmap: DirectMap, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s, t in dmap.mapping.items():
            fh.write(f"{s}\t{t}\n")


def load_map(path, direction):
    mapping = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected source<TAB>target")
            mapping[fields[0]] = fields[1]
    return DirectMap(mapping, direction)


@dataclass
class Histogram:
    rows: list  # (tag, count, fraction)

    def fractions(self):
        return {tag: frac for tag, _, frac in self.rows}

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["tag", "count", "fraction"])
            for tag, count, frac in self.rows:
                w.writerow([tag, count, repr(frac)])


def label_distribution(items, side):
    """Tag histogram over sentences or pairs, ordered by descending count then tag."""
    counts = Counter()
    for it in items:
        tags = it.tags(side)
        if tags:
            counts.update(tags)
    total = sum(counts.values())
    if total == 0:
        raise ValueError(f"no {side} tags present")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Histogram([(tag, c, c / total) for tag, c in ordered])
