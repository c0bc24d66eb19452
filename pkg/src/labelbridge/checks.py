"""Finite-difference checks over every differentiable op and the full training graph."""

from __future__ import annotations

import numpy as np

from labelbridge.bridge import Batch, BridgeConfig, BridgeModel, train_forward
from labelbridge.substrate import tensor as T
from labelbridge.substrate.gradcheck import check_module, grad_check
from labelbridge.substrate.layers import (
    Encoder,
    EncoderConfig,
    GruParams,
    gru_sequence,
    gru_step,
)
from labelbridge.substrate.rng import Rng

TOLERANCE = 1e-4


def _leaf(g, *shape, name=None, scale=1.0):
    return T.Tensor(g.normal(size=shape) * scale, requires_grad=True, name=name)


def op_cases(seed):
    """(name, fn, inputs) triples; each fn maps to a scalar through a fixed random projection."""
    g = np.random.default_rng(seed)
    a, b = _leaf(g, 3, 4, name="a"), _leaf(g, 3, 4, name="b")
    bb = _leaf(g, 4, name="bb")
    m = _leaf(g, 4, 5, name="m")
    batched = _leaf(g, 2, 3, 4, name="batched")
    table = _leaf(g, 6, 3, name="table")
    gain, bias = _leaf(g, 4, name="gain"), _leaf(g, 4, name="bias")
    logits = _leaf(g, 2, 3, 5, name="logits")
    targets = g.integers(0, 5, size=(2, 3))
    mask = np.array([[True, True, False], [True, False, False]])
    keep = (g.random((3, 4)) > 0.5) / 0.5
    ids = np.array([[0, 5, 2], [2, 2, 1]])

    def proj(out):
        w = np.random.default_rng(seed + 1000).normal(size=out.shape)
        return T.tsum(T.mul(out, T.Tensor(w)))

    return [
        ("add", lambda: proj(T.add(a, bb)), [a, bb]),
        ("sub", lambda: proj(T.sub(a, b)), [a, b]),
        ("mul", lambda: proj(T.mul(a, bb)), [a, bb]),
        ("tanh", lambda: proj(T.tanh(a)), [a]),
        ("sigmoid", lambda: proj(T.sigmoid(a)), [a]),
        ("exp", lambda: proj(T.exp(T.mul(a, T.Tensor(0.5)))), [a]),
        ("gelu", lambda: proj(T.gelu(a)), [a]),
        ("matmul", lambda: proj(T.matmul(a, m)), [a, m]),
        ("matmul_batched", lambda: proj(T.matmul(batched, m)), [batched, m]),
        ("sum", lambda: proj(T.tsum(batched, axis=1)), [batched]),
        ("mean", lambda: proj(T.mean(batched, axis=-1, keepdims=True)), [batched]),
        ("reshape", lambda: proj(T.reshape(a, (2, 6))), [a]),
        ("transpose", lambda: proj(T.transpose(batched, (2, 0, 1))), [batched]),
        ("concat", lambda: proj(T.concat([a, b], axis=0)), [a, b]),
        ("getitem", lambda: proj(T.getitem(a, (slice(None), [0, 2, 2]))), [a]),
        ("embedding", lambda: proj(T.embedding(table, ids)), [table]),
        ("softmax", lambda: proj(T.softmax(batched, axis=-1)), [batched]),
        ("layer_norm", lambda: proj(T.layer_norm(batched, gain, bias)), [batched, gain, bias]),
        ("masked_cross_entropy", lambda: T.masked_cross_entropy(logits, targets, mask), [logits]),
        ("dropout", lambda: proj(T.dropout_mask(a, keep)), [a]),
    ]


def module_cases(seed):
    rng = Rng(seed)
    g = np.random.default_rng(seed)
    gru = GruParams(rng, 3, 4)
    xs = g.normal(size=(2, 5, 3))
    x1, h1 = g.normal(size=(2, 3)), g.normal(size=(2, 4))
    enc = Encoder(rng, EncoderConfig(7, dim=4, heads=2, layers=1, max_len=6, ffn_mult=2))
    ids = np.array([[1, 4, 6, 2], [3, 0, 5, 5]])
    emask = np.array([[True] * 4, [True, True, True, False]])
    w_seq = g.normal(size=(2, 5, 4))
    w_enc = g.normal(size=(2, 4, 4))
    return [
        ("gru_step", gru, lambda: T.tsum(T.mul(gru_step(gru, T.Tensor(x1), T.Tensor(h1)), T.Tensor(w_seq[:, 0])))),
        ("gru_sequence", gru, lambda: T.tsum(T.mul(gru_sequence(gru, T.Tensor(xs)), T.Tensor(w_seq)))),
        ("encoder", enc, lambda: T.tsum(T.mul(enc(ids, emask), T.Tensor(w_enc)))),
    ]


def tiny_bridge(seed):
    cfg = BridgeConfig(vocab_size=9, n_y=3, n_z=4, dim=6, heads=2, layers=1, hidden=5,
                       label_dim=3, dropout=0.5, max_len=8, ffn_mult=2)
    model = BridgeModel(cfg, seed=seed)
    g = np.random.default_rng(seed)
    lengths = [5, 3, 2]
    ids = np.full((3, 5), 1)
    mask = np.zeros((3, 5), dtype=bool)
    for i, n in enumerate(lengths):
        ids[i, :n] = g.integers(2, 9, size=n)
        mask[i, :n] = True
    return model, ids, mask, g


def train_graph_error(seed, side="y"):
    """Worst relative error over all parameters of train_forward on a 3-sentence batch."""
    model, ids, mask, g = tiny_bridge(seed)
    gold = np.where(mask, g.integers(0, model.cfg.n_tags(side), size=mask.shape), 0)
    batch = Batch(ids, mask, side, gold)
    # a fresh copy of the same stream per call keeps dropout and sampling fixed
    fn = lambda: train_forward(model, batch, Rng(seed).spawn(99))[0]
    return check_module(fn, model)


def run_all(seed):
    """Dict of check name -> worst relative error."""
    out = {}
    for name, fn, inputs in op_cases(seed):
        out["op/" + name] = grad_check(fn, inputs)
    for name, module, fn in module_cases(seed):
        out["module/" + name] = check_module(fn, module)
    for side in ("y", "z"):
        out["train_forward/" + side] = train_graph_error(seed, side)
    return out
