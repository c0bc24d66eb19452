"""Shared-encoder tagger that translates between two disjoint tag schemes.

One encoder feeds four heads:

* supervisor heads ``sup_y`` / ``sup_z``: per-token linear classifiers;
* decoders ``dec_y`` / ``dec_z``: left-to-right GRUs whose input at each
  position is the (dropped-out) encoder row concatenated with an embedding
  of the *other* scheme's tag.

Training on a Y-labelled batch samples surrogate Z tags from ``sup_z``,
decodes Y from them, and adds the supervisor loss on ``sup_y``.  At
evaluation the decoder is fed gold tags of the other scheme instead.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from labelbridge.substrate.layers import (
    Encoder,
    EncoderConfig,
    GruParams,
    Linear,
    Module,
    dropout,
    gru_sequence,
    init_weight,
)
from labelbridge.substrate.rng import Rng, sample_categorical
from labelbridge.substrate.tensor import (
    NonFiniteError,
    _softmax_np,
    concat,
    embedding,
    masked_cross_entropy,
    no_grad,
)

SIDES = ("y", "z")


def other(side):
    if side not in SIDES:
        raise ValueError(f"side must be 'y' or 'z', got {side!r}")
    return "z" if side == "y" else "y"


class ForwardMode(enum.Enum):
    TRAIN_SAMPLED = "train_sampled"
    EVAL_TRANSLATE = "eval_translate"
    EVAL_SUPERVISOR_ONLY = "eval_supervisor_only"
    EVAL_NO_LABEL = "eval_no_label"
    TRAIN_CHEAT = "train_cheat"

    @property
    def training(self):
        return self in (ForwardMode.TRAIN_SAMPLED, ForwardMode.TRAIN_CHEAT)


@dataclass
class BridgeConfig:
    vocab_size: int
    n_y: int
    n_z: int
    dim: int = 32
    heads: int = 2
    layers: int = 1
    hidden: int = 32
    label_dim: int = 16
    dropout: float = 0.85
    max_len: int = 64
    ffn_mult: int = 2

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError(f"model dim {self.dim} not divisible by {self.heads} heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")

    def n_tags(self, side):
        return self.n_y if side == "y" else self.n_z

    def to_dict(self):
        return asdict(self)


class Decoder(Module):
    def __init__(self, rng, n_in, hidden, n_out):
        self.gru = GruParams(rng, n_in, hidden)
        self.out = Linear(rng, hidden, n_out)


class BridgeModel(Module):
    def __init__(self, cfg: BridgeConfig, seed=0):
        self.cfg = cfg
        rng = Rng(seed).spawn(0)
        self.encoder = Encoder(rng, EncoderConfig(cfg.vocab_size, cfg.dim, cfg.heads, cfg.layers,
                                                  cfg.max_len, cfg.ffn_mult))
        self.sup_y = Linear(rng, cfg.dim, cfg.n_y)
        self.sup_z = Linear(rng, cfg.dim, cfg.n_z)
        # label embeddings: emb_z conditions dec_y, emb_y conditions dec_z
        self.emb_y = init_weight(rng, cfg.n_y, cfg.label_dim)
        self.emb_z = init_weight(rng, cfg.n_z, cfg.label_dim)
        self.dec_y = Decoder(rng, cfg.dim + cfg.label_dim, cfg.hidden, cfg.n_y)
        self.dec_z = Decoder(rng, cfg.dim + cfg.label_dim, cfg.hidden, cfg.n_z)

    # components ---------------------------------------------------------
    def encode(self, token_ids, mask=None):
        return self.encoder(token_ids, mask)

    def supervise(self, E, side):
        head = self.sup_y if side == "y" else self.sup_z if side == "z" else None
        if head is None:
            raise ValueError(f"side must be 'y' or 'z', got {side!r}")
        return head(E)

    def decode(self, E, other_labels, side, dropout_active=False, rng=None):
        """Logits for ``side`` given encoder rows and the other scheme's tags."""
        labels = np.asarray(other_labels, dtype=np.intp)
        squeeze = E.ndim == 2
        if squeeze:
            E = E.reshape(1, *E.shape)
            labels = labels[None, :]
        if labels.shape != E.shape[:2]:
            raise ValueError(f"labels shape {labels.shape} does not match encoder rows {E.shape[:2]}")
        table = self.emb_z if side == "y" else self.emb_y
        n_other = table.shape[0]
        if labels.size and (labels.min() < 0 or labels.max() >= n_other):
            raise IndexError(f"label id out of range for {n_other} tags")
        if dropout_active:
            if rng is None:
                raise ValueError("dropout needs an rng")
            E = dropout(E, self.cfg.dropout, rng, training=True)
        dec = self.dec_y if side == "y" else self.dec_z
        hs = gru_sequence(dec.gru, concat([E, embedding(table, labels)], axis=-1))
        logits = dec.out(hs)
        return logits.reshape(*logits.shape[1:]) if squeeze else logits


# ----------------------------------------------------------------------
# batched forward passes


@dataclass
class Batch:
    ids: np.ndarray      # (B, T) token ids, padded
    mask: np.ndarray     # (B, T) bool
    side: str            # scheme of ``gold``
    gold: np.ndarray     # (B, T) tag ids, 0 at padding
    index: np.ndarray = None  # source sentence indices

    @property
    def n_tokens(self):
        return int(self.mask.sum())


def _sample_labels(logits, rng, mask):
    """Detached per-token draw from softmax(logits); padding gets id 0."""
    draws = sample_categorical(_softmax_np(logits.data), rng)
    return np.where(mask, draws, 0)


def _finish(side, E, dec_logits, sup_logits, batch):
    dec_loss = masked_cross_entropy(dec_logits, batch.gold, batch.mask)
    sup_loss = masked_cross_entropy(sup_logits, batch.gold, batch.mask)
    loss = dec_loss + sup_loss
    if not np.isfinite(loss.data):
        raise NonFiniteError("non-finite training loss")
    pred = dec_logits.data.argmax(axis=-1)
    correct = int(((pred == batch.gold) & batch.mask).sum())
    diag = {
        "decoder_loss": dec_loss,
        "supervisor_loss": sup_loss,
        "correct": correct,
        "tokens": batch.n_tokens,
        "encoded": E,
    }
    return loss, diag


def train_forward(model: BridgeModel, batch: Batch, rng: Rng):
    """Sampled-surrogate training graph for a batch labelled on ``batch.side``.

    loss = CE(gold, dec_side(dropout(E), sampled other tags)) + CE(gold, sup_side(E))
    """
    side, oth = batch.side, other(batch.side)
    E = model.encode(batch.ids, batch.mask)
    sup_logits = model.supervise(E, side)
    with no_grad():
        surrogate = _sample_labels(model.supervise(E.detach(), oth), rng, batch.mask)
    dec_logits = model.decode(E, surrogate, side, dropout_active=True, rng=rng)
    loss, diag = _finish(side, E, dec_logits, sup_logits, batch)
    diag["surrogate"] = surrogate
    return loss, diag


def cheat_forward(model: BridgeModel, batch: Batch, rng: Rng):
    """The label-leaking variant: surrogate = argmax of the *other decoder* fed gold tags.

    Kept to reproduce its collapse; do not use for real training.
    """
    side, oth = batch.side, other(batch.side)
    E = model.encode(batch.ids, batch.mask)
    sup_logits = model.supervise(E, side)
    with no_grad():
        leaked = model.decode(E.detach(), batch.gold, oth, dropout_active=False).data.argmax(axis=-1)
    surrogate = np.where(batch.mask, leaked, 0)
    dec_logits = model.decode(E, surrogate, side, dropout_active=True, rng=rng)
    loss, diag = _finish(side, E, dec_logits, sup_logits, batch)
    diag["surrogate"] = surrogate
    return loss, diag


def supervised_forward(model: BridgeModel, batch: Batch):
    """Plain tagger loss on the encoder + one supervisor head."""
    E = model.encode(batch.ids, batch.mask)
    logits = model.supervise(E, batch.side)
    loss = masked_cross_entropy(logits, batch.gold, batch.mask)
    if not np.isfinite(loss.data):
        raise NonFiniteError("non-finite training loss")
    pred = logits.data.argmax(axis=-1)
    correct = int(((pred == batch.gold) & batch.mask).sum())
    return loss, {"correct": correct, "tokens": batch.n_tokens}


# evaluation (no tape, no dropout) -------------------------------------


def eval_translate(model, ids, other_labels, target_side, mask=None):
    """argmax of dec_target(E, gold tags of the other scheme)."""
    with no_grad():
        E = model.encode(ids, mask)
        return model.decode(E, other_labels, target_side).data.argmax(axis=-1)


def eval_supervisor_only(model, ids, side, mask=None):
    with no_grad():
        return model.supervise(model.encode(ids, mask), side).data.argmax(axis=-1)


def eval_no_label(model, ids, target_side, rng, mask=None):
    """Decode from other-scheme tags sampled off the model's own supervisor."""
    with no_grad():
        E = model.encode(ids, mask)
        probs = _softmax_np(model.supervise(E, other(target_side)).data)
        sampled = sample_categorical(probs, rng)
        if mask is not None:
            sampled = np.where(mask, sampled, 0)
        return model.decode(E, sampled, target_side).data.argmax(axis=-1)


EVALUATORS = {
    ForwardMode.EVAL_TRANSLATE: eval_translate,
    ForwardMode.EVAL_SUPERVISOR_ONLY: eval_supervisor_only,
    ForwardMode.EVAL_NO_LABEL: eval_no_label,
}


# persistence ---------------------------------------------------------


def model_arrays(model: Module, prefix="model/"):
    return {prefix + k: p.data for k, p in model.named_parameters()}


def load_model_arrays(model: Module, arrays, prefix="model/"):
    params = model.parameters()
    expected = {prefix + k for k in params}
    present = {k for k in arrays if k.startswith(prefix)}
    if expected != present:
        missing = sorted(expected - present)[:3]
        extra = sorted(present - expected)[:3]
        raise ValueError(f"parameter set mismatch (missing {missing}, unexpected {extra})")
    for k, p in params.items():
        src = arrays[prefix + k]
        if src.shape != p.data.shape:
            raise ValueError(f"shape mismatch for {k}: {src.shape} vs {p.data.shape}")
        p.data[...] = src
