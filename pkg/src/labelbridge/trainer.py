"""Epoch loop, mixed-origin batching, checkpoints and the evaluation harness."""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from labelbridge import baseline_map as bm
from labelbridge.bridge import (
    Batch,
    BridgeConfig,
    BridgeModel,
    cheat_forward,
    eval_no_label,
    eval_supervisor_only,
    eval_translate,
    load_model_arrays,
    model_arrays,
    supervised_forward,
    train_forward,
)
from labelbridge.corpus.formats import format_pairs, read_corpus, read_pairs, write_text
from labelbridge.corpus.records import ParallelPair, Sentence, Tagset
from labelbridge.corpus.synth import PRESETS, SynthTruth, gen_synthetic
from labelbridge.corpus.vocab import PAD_ID, Vocab, build_vocab
from labelbridge.substrate.layers import Encoder, EncoderConfig, Linear, Module
from labelbridge.substrate.optim import Adam, AdamHyper
from labelbridge.substrate.rng import Rng
from labelbridge.substrate.serialize import load_arrays, save_arrays
from labelbridge.substrate.tensor import NonFiniteError

log = logging.getLogger(__name__)

DATASETS = {"y": "Y", "z": "Z"}
VARIANTS = ("supervised", "ours", "supervisor_only", "no_label", "direct_map")
METRICS_HEADER = ["epoch", "phase", "dataset", "variant", "loss", "accuracy"]
EVAL_BATCH = 64


# ----------------------------------------------------------------------
# configuration


@dataclass
class ModelSection:
    dim: int = 32
    heads: int = 2
    layers: int = 1
    hidden: int = 32
    label_dim: int = 16
    dropout: float = 0.85
    max_len: int = 64
    ffn_mult: int = 2


@dataclass
class OptimSection:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class TrainSection:
    epochs: int = 25
    batch_size: int = 16
    seed: int = 0
    min_freq: int = 1
    checkpoint_every: int = 0  # 0 = only at the end


@dataclass
class DataSection:
    y_train: str = ""
    z_train: str = ""
    val: str = ""
    y_tagset: str = ""
    z_tagset: str = ""
    synth_preset: str = ""
    synth_seed: int = 0


@dataclass
class RunConfig:
    model: ModelSection = field(default_factory=ModelSection)
    optim: OptimSection = field(default_factory=OptimSection)
    train: TrainSection = field(default_factory=TrainSection)
    data: DataSection = field(default_factory=DataSection)

    def __post_init__(self):
        if self.train.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.train.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(ModelSection(**d["model"]), OptimSection(**d["optim"]),
                   TrainSection(**d["train"]), DataSection(**d["data"]))

    def bridge_config(self, vocab_size, n_y, n_z):
        return BridgeConfig(vocab_size=vocab_size, n_y=n_y, n_z=n_z, **asdict(self.model))

    def adam(self):
        return AdamHyper(**asdict(self.optim))


# ----------------------------------------------------------------------
# data


@dataclass
class TaskData:
    d_y: list[Sentence]
    d_z: list[Sentence]
    val: list[ParallelPair]
    vocab: Vocab
    y_tags: Tagset
    z_tags: Tagset
    truth: Optional[SynthTruth] = None


def prepare_data(d_y, d_z, val, min_freq=1, y_tags=None, z_tags=None, truth=None):
    if not d_y or not d_z:
        raise ValueError("both training corpora must be non-empty")
    vocab = build_vocab(list(d_y) + list(d_z), min_freq)
    y_tags = y_tags or Tagset("Y")
    z_tags = z_tags or Tagset("Z")
    for s in d_y:
        for t in s.y_tags:
            y_tags.add(t)
    for s in d_z:
        for t in s.z_tags:
            z_tags.add(t)
    for p in val:
        for t in p.y_tags:
            y_tags.add(t)
        for t in p.z_tags:
            z_tags.add(t)
    return TaskData(list(d_y), list(d_z), list(val), vocab, y_tags, z_tags, truth)


def load_task_data(cfg: RunConfig) -> TaskData:
    d = cfg.data
    if d.synth_preset:
        if d.synth_preset not in PRESETS:
            raise ValueError(f"unknown synthetic preset {d.synth_preset!r}")
        synth_cfg = PRESETS[d.synth_preset]()
        corpus = gen_synthetic(synth_cfg, d.synth_seed)
        return prepare_data(corpus.d_y, corpus.d_z, corpus.val, cfg.train.min_freq,
                            synth_cfg.y_tagset(), synth_cfg.z_tagset(), corpus.truth)
    for key in ("y_train", "z_train", "val"):
        if not getattr(d, key):
            raise ValueError(f"[data] {key} is required unless synth_preset is set")
    y_tags = Tagset.from_file(d.y_tagset, "Y") if d.y_tagset else None
    z_tags = Tagset.from_file(d.z_tagset, "Z") if d.z_tagset else None
    d_y = read_corpus(d.y_train, "y", y_tags)
    d_z = read_corpus(d.z_train, "z", z_tags)
    val = read_pairs(d.val)
    return prepare_data(d_y, d_z, val, cfg.train.min_freq, y_tags, z_tags)


@dataclass
class Encoded:
    ids: list          # per-sentence int arrays
    tags: dict         # side -> per-sentence int arrays
    truncated: int = 0


def encode_items(items, sides, vocab: Vocab, tagsets: dict, max_len):
    ids, tags, truncated = [], {s: [] for s in sides}, 0
    for it in items:
        toks = it.tokens
        if len(toks) > max_len:
            truncated += 1
        toks = toks[:max_len]
        ids.append(np.asarray(vocab.encode(toks), dtype=np.intp))
        for s in sides:
            tags[s].append(np.asarray(tagsets[s].encode(it.tags(s)[:max_len]), dtype=np.intp))
    if truncated:
        log.warning("truncated %d sentences to %d tokens", truncated, max_len)
    return Encoded(ids, tags, truncated)


def pad(seqs, value):
    t = max(len(s) for s in seqs)
    out = np.full((len(seqs), t), value, dtype=np.intp)
    mask = np.zeros((len(seqs), t), dtype=bool)
    for i, s in enumerate(seqs):
        out[i, :len(s)] = s
        mask[i, :len(s)] = True
    return out, mask


def make_batch(enc: Encoded, idx, side):
    ids, mask = pad([enc.ids[i] for i in idx], PAD_ID)
    gold, _ = pad([enc.tags[side][i] for i in idx], 0)
    return Batch(ids, mask, side, gold, np.asarray(idx))


def make_batches(enc_y: Encoded, enc_z: Encoded, batch_size, rng: Rng):
    """One epoch of single-origin batches, interleaved in proportion to corpus size.

    Each corpus is shuffled, cut into batches, and the two batch streams are
    merged by always taking from the side that has emitted the smaller share
    of its batches so far (ties go to Y).
    """
    if not enc_y.ids or not enc_z.ids:
        raise ValueError("both corpora must be non-empty")
    streams = {}
    for side, enc in (("y", enc_y), ("z", enc_z)):
        order = rng.permutation(len(enc.ids))
        streams[side] = [make_batch(enc, order[i:i + batch_size], side)
                         for i in range(0, len(order), batch_size)]
    out = []
    done = {"y": 0, "z": 0}
    total = {s: len(v) for s, v in streams.items()}
    while done["y"] < total["y"] or done["z"] < total["z"]:
        fy = done["y"] / total["y"] if done["y"] < total["y"] else np.inf
        fz = done["z"] / total["z"] if done["z"] < total["z"] else np.inf
        side = "y" if fy <= fz else "z"
        out.append(streams[side][done[side]])
        done[side] += 1
    return out


# ----------------------------------------------------------------------
# metrics


@dataclass
class MetricsRecord:
    epoch: int
    phase: str
    dataset: str
    variant: str
    loss: Optional[float]
    accuracy: float

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    def row(self):
        return [self.epoch, self.phase, self.dataset, self.variant,
                "" if self.loss is None else repr(float(self.loss)), repr(float(self.accuracy))]


def write_metrics(path, records, append=False):
    new = not append or not os.path.exists(path)
    with open(path, "a" if append else "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(METRICS_HEADER)
        for r in records:
            w.writerow(r.row())


def read_metrics(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != METRICS_HEADER:
        raise ValueError(f"{path}: missing or wrong metrics header")
    out = []
    for lineno, r in enumerate(rows[1:], start=2):
        if len(r) != len(METRICS_HEADER):
            raise ValueError(f"{path}:{lineno}: incomplete metrics row")
        out.append(MetricsRecord(int(r[0]), r[1], r[2], r[3],
                                 float(r[4]) if r[4] else None, float(r[5])))
    return out


def token_accuracy(pred, gold):
    pred, gold = list(pred), list(gold)
    if len(pred) != len(gold):
        raise ValueError(f"length mismatch: {len(pred)} predictions for {len(gold)} gold tags")
    if not gold:
        raise ValueError("token accuracy of an empty sequence")
    return sum(p == g for p, g in zip(pred, gold)) / len(gold)


# ----------------------------------------------------------------------
# evaluation


def fit_direct_maps(pairs, y_tags, z_tags):
    return {
        "y": bm.best_direct_map(bm.cooccurrence(pairs, "z2y", z_tags, y_tags))[0],
        "z": bm.best_direct_map(bm.cooccurrence(pairs, "y2z", y_tags, z_tags))[0],
    }


def _batched_predictions(enc: Encoded, fn):
    """Run ``fn(ids, mask, idx)`` over evaluation batches; collect per-sentence predictions."""
    preds = []
    for start in range(0, len(enc.ids), EVAL_BATCH):
        idx = list(range(start, min(start + EVAL_BATCH, len(enc.ids))))
        ids, mask = pad([enc.ids[i] for i in idx], PAD_ID)
        out = fn(ids, mask, idx)
        preds.extend(out[k, :len(enc.ids[i])] for k, i in enumerate(idx))
    return preds


def _accuracy(preds, golds):
    hits = sum(int((p == g).sum()) for p, g in zip(preds, golds))
    return hits / sum(len(g) for g in golds)


def evaluate(model, pairs, data: TaskData, epoch=0, direct_maps=None, rng=None, enc=None):
    """Validation records for every (dataset, variant) cell."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("evaluation needs at least one pair")
    tagsets = {"y": data.y_tags, "z": data.z_tags}
    enc = enc or encode_items(pairs, ("y", "z"), data.vocab, tagsets, model.cfg.max_len)
    rng = rng or Rng(0)
    records = []
    for side in ("y", "z"):
        oth = "z" if side == "y" else "y"
        gold = enc.tags[side]
        side_rng = rng.spawn(0 if side == "y" else 1)
        preds = {
            "ours": _batched_predictions(enc, lambda ids, mask, idx: eval_translate(
                model, ids, pad([enc.tags[oth][i] for i in idx], 0)[0], side, mask)),
            "supervisor_only": _batched_predictions(enc, lambda ids, mask, idx: eval_supervisor_only(
                model, ids, side, mask)),
            "no_label": _batched_predictions(enc, lambda ids, mask, idx: eval_no_label(
                model, ids, side, side_rng, mask)),
        }
        for variant, p in preds.items():
            records.append(MetricsRecord(epoch, "val", DATASETS[side], variant, None, _accuracy(p, gold)))
        if direct_maps is not None:
            mapped, golds = [], []
            for p in pairs:
                mapped.extend(bm.apply_map(direct_maps[side], p.tags(oth)))
                golds.extend(p.tags(side))
            records.append(MetricsRecord(epoch, "val", DATASETS[side], "direct_map", None,
                                         token_accuracy(mapped, golds)))
    return records


def evaluate_supervised(model, pairs, data: TaskData, side, epoch=0, enc=None):
    tagsets = {"y": data.y_tags, "z": data.z_tags}
    enc = enc or encode_items(pairs, (side,), data.vocab, tagsets, model.cfg.max_len)
    preds = _batched_predictions(enc, lambda ids, mask, idx: eval_supervisor_only(model, ids, side, mask))
    return MetricsRecord(epoch, "val", DATASETS[side], "supervised", None, _accuracy(preds, enc.tags[side]))


# ----------------------------------------------------------------------
# checkpoints


def data_meta(data: TaskData):
    return {"vocab": data.vocab.itos, "y_tags": data.y_tags.tags, "z_tags": data.z_tags.tags}


def save_checkpoint(path, model, opt: Adam, rng: Rng, epoch, cfg: RunConfig, history, kind, extra=None):
    arrays = model_arrays(model)
    for k in opt.params:
        if k in opt.state.m:
            arrays["adam_m/" + k] = opt.state.m[k]
            arrays["adam_v/" + k] = opt.state.v[k]
    meta = {
        "kind": kind,
        "epoch": epoch,
        "adam_step": opt.state.step,
        "rng": rng.get_state(),
        "run_config": cfg.to_dict(),
        "model_config": model.cfg.to_dict(),
        "history": [asdict(r) for r in history],
    }
    meta.update(extra or {})
    tmp = str(path) + ".tmp"
    save_arrays(tmp, arrays, meta)
    os.replace(tmp, path)


def load_checkpoint(path):
    """Returns (model, arrays, meta); the model is rebuilt from the stored config."""
    arrays, meta = load_arrays(path)
    mcfg = BridgeConfig(**meta["model_config"])
    model = SupervisedTagger(mcfg, meta.get("side", "y")) if meta.get("kind") == "supervised" \
        else BridgeModel(mcfg)
    load_model_arrays(model, arrays)
    return model, arrays, meta


def _restore_optimizer(opt: Adam, arrays, meta):
    opt.state.step = meta["adam_step"]
    for k in opt.params:
        if "adam_m/" + k in arrays:
            opt.state.m[k] = arrays["adam_m/" + k].copy()
            opt.state.v[k] = arrays["adam_v/" + k].copy()


# ----------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    model: Module
    history: list
    out_dir: Optional[str] = None


def _mean(xs):
    return float(np.mean(xs)) if xs else 0.0


def _step(forward, opt, where):
    """forward() -> (loss, diag); one optimizer step.  Non-finite values abort with ``where``."""
    try:
        loss, diag = forward()
        if not np.isfinite(loss.data):
            raise NonFiniteError("non-finite loss")
        opt.zero_grad()
        loss.backward()
        opt.step()
    except NonFiniteError as e:
        raise NonFiniteError(f"{where}: {e}") from e
    return float(loss.data), diag


def train(cfg: RunConfig, data: TaskData, out_dir=None, cheat=False, resume=None, stop_after=None):
    """Train the bridge model; returns a :class:`TrainResult`.

    ``resume`` is a checkpoint path; ``stop_after`` ends the run after that
    many completed epochs (a checkpoint is written so it can be resumed).
    """
    tagsets = {"y": data.y_tags, "z": data.z_tags}
    max_len = cfg.model.max_len
    enc_y = encode_items(data.d_y, ("y",), data.vocab, tagsets, max_len)
    enc_z = encode_items(data.d_z, ("z",), data.vocab, tagsets, max_len)
    enc_val = encode_items(data.val, ("y", "z"), data.vocab, tagsets, max_len) if data.val else None
    maps = fit_direct_maps(data.val, data.y_tags, data.z_tags) if data.val else None

    model = BridgeModel(cfg.bridge_config(len(data.vocab), len(data.y_tags), len(data.z_tags)),
                        seed=cfg.train.seed)
    opt = Adam(model.named_parameters(), cfg.adam())
    rng = Rng(cfg.train.seed).spawn(1)
    history, start = [], 0
    if resume is not None:
        _, arrays, meta = load_checkpoint(resume)
        load_model_arrays(model, arrays)
        _restore_optimizer(opt, arrays, meta)
        rng = Rng.from_state(meta["rng"])
        start = meta["epoch"]
        history = [MetricsRecord(**r) for r in meta["history"]]

    metrics_path = ckpt_path = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        metrics_path = os.path.join(out_dir, "metrics.csv")
        ckpt_path = os.path.join(out_dir, "checkpoint.bin")
        write_metrics(metrics_path, history)
        if data.val:
            write_text(os.path.join(out_dir, "val_pairs.tsv"), format_pairs(data.val))
        with open(os.path.join(out_dir, "run_config.json"), "w", encoding="utf-8") as fh:
            json.dump({"run_config": cfg.to_dict(), "cheat": cheat, **data_meta(data)}, fh, indent=1)

    forward = cheat_forward if cheat else train_forward
    kind = "cheat" if cheat else "bridge"
    last = cfg.train.epochs if stop_after is None else min(cfg.train.epochs, stop_after)
    for epoch in range(start + 1, last + 1):
        stats = {"y": ([], 0, 0), "z": ([], 0, 0)}
        for b_i, batch in enumerate(make_batches(enc_y, enc_z, cfg.train.batch_size, rng)):
            loss, diag = _step(lambda: forward(model, batch, rng), opt, f"epoch {epoch} batch {b_i}")
            losses, correct, tokens = stats[batch.side]
            losses.append(loss)
            stats[batch.side] = (losses, correct + diag["correct"], tokens + diag["tokens"])
        records = [MetricsRecord(epoch, "train", DATASETS[s], "ours", _mean(v[0]), v[1] / max(v[2], 1))
                   for s, v in stats.items()]
        if data.val:
            records += evaluate(model, data.val, data, epoch, maps,
                                Rng(cfg.train.seed).spawn(2, epoch), enc_val)
        history += records
        if metrics_path:
            write_metrics(metrics_path, records, append=True)
        log.info("epoch %d %s", epoch, " ".join(f"{r.dataset}/{r.variant}/{r.phase}={r.accuracy:.4f}"
                                                 for r in records))
        every = cfg.train.checkpoint_every
        if ckpt_path and ((every and epoch % every == 0) or epoch == last):
            save_checkpoint(ckpt_path, model, opt, rng, epoch, cfg, history, kind, data_meta(data))
    if out_dir is not None and last == cfg.train.epochs and data.val:
        from labelbridge.report import emit_report
        emit_report(out_dir)
    return TrainResult(model, history, out_dir)


# ----------------------------------------------------------------------
# supervised baseline


class SupervisedTagger(Module):
    """Encoder plus one per-token linear head; the ordinary supervised tagger."""

    def __init__(self, cfg: BridgeConfig, side, seed=0):
        self.cfg = cfg
        self.side = side
        rng = Rng(seed).spawn(0)
        self.encoder = Encoder(rng, EncoderConfig(cfg.vocab_size, cfg.dim, cfg.heads, cfg.layers,
                                                  cfg.max_len, cfg.ffn_mult))
        self.head = Linear(rng, cfg.dim, cfg.n_tags(side))

    def encode(self, token_ids, mask=None):
        return self.encoder(token_ids, mask)

    def supervise(self, E, side):
        if side != self.side:
            raise ValueError(f"this tagger predicts {self.side!r}, not {side!r}")
        return self.head(E)


def supervised_baseline_train(cfg: RunConfig, data: TaskData, side, out_dir=None):
    tagsets = {"y": data.y_tags, "z": data.z_tags}
    max_len = cfg.model.max_len
    corpus = data.d_y if side == "y" else data.d_z
    enc = encode_items(corpus, (side,), data.vocab, tagsets, max_len)
    enc_val = encode_items(data.val, (side,), data.vocab, tagsets, max_len) if data.val else None
    model = SupervisedTagger(cfg.bridge_config(len(data.vocab), len(data.y_tags), len(data.z_tags)),
                             side, seed=cfg.train.seed)
    opt = Adam(model.named_parameters(), cfg.adam())
    rng = Rng(cfg.train.seed).spawn(1)
    history = []
    for epoch in range(1, cfg.train.epochs + 1):
        order = rng.permutation(len(enc.ids))
        losses, correct, tokens = [], 0, 0
        for b_i, i in enumerate(range(0, len(order), cfg.train.batch_size)):
            batch = make_batch(enc, order[i:i + cfg.train.batch_size], side)
            loss, diag = _step(lambda: supervised_forward(model, batch), opt, f"epoch {epoch} batch {b_i}")
            losses.append(loss)
            correct += diag["correct"]
            tokens += diag["tokens"]
        records = [MetricsRecord(epoch, "train", DATASETS[side], "supervised", _mean(losses), correct / tokens)]
        if data.val:
            records.append(evaluate_supervised(model, data.val, data, side, epoch, enc_val))
        history += records
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        write_metrics(os.path.join(out_dir, f"metrics_supervised_{side}.csv"), history)
        path = os.path.join(out_dir, f"checkpoint_supervised_{side}.bin")
        save_arrays(path, model_arrays(model), {
            "kind": "supervised", "side": side, "epoch": cfg.train.epochs,
            "model_config": model.cfg.to_dict(), "run_config": cfg.to_dict(), **data_meta(data)})
    return TrainResult(model, history, out_dir)
