"""Layer primitives: linear maps, GRU cells, self-attention encoder, dropout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from labelbridge.substrate import kernels
from labelbridge.substrate.tensor import (
    DTYPE,
    Tensor,
    _result,
    concat,
    dropout_mask,
    embedding,
    gelu,
    layer_norm,
    matmul,
    sigmoid,
    softmax,
    tanh,
)

INIT_SCALE = 0.08


def init_weight(rng, *shape, name=None):
    return Tensor(rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape), requires_grad=True, name=name)


def init_zeros(*shape, name=None):
    return Tensor(np.zeros(shape), requires_grad=True, name=name)


def init_ones(*shape, name=None):
    return Tensor(np.ones(shape), requires_grad=True, name=name)


class Module:
    """Anything holding named parameters, possibly through child modules."""

    def named_parameters(self, prefix=""):
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + key, value
            elif isinstance(value, Module):
                yield from value.named_parameters(prefix + key + ".")
            elif isinstance(value, list) and value and isinstance(value[0], Module):
                for i, child in enumerate(value):
                    yield from child.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self):
        return dict(self.named_parameters())

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad = None


class Linear(Module):
    def __init__(self, rng, n_in, n_out):
        self.W = init_weight(rng, n_in, n_out)
        self.b = init_zeros(n_out)

    def __call__(self, x):
        return matmul(x, self.W) + self.b


class LayerNorm(Module):
    def __init__(self, dim):
        self.g = init_ones(dim)
        self.b = init_zeros(dim)

    def __call__(self, x):
        return layer_norm(x, self.g, self.b)


# ----------------------------------------------------------------------
# dropout


def dropout(t, rate, rng, training):
    """Inverted dropout: survivors scaled by 1/(1-rate); identity when not training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return t
    keep = rng.random(t.shape) >= rate
    return dropout_mask(t, keep / (1.0 - rate))


# ----------------------------------------------------------------------
# GRU


class GruParams(Module):
    """Gate weights for r, u and the candidate c.

    Row-vector convention: ``r = sigmoid(x @ W_r + h @ U_r + b_r)`` etc.,
    ``c = tanh(x @ W_c + (r * h) @ U_c + b_c)``, ``h' = u*h + (1-u)*c``.
    """

    def __init__(self, rng, n_in, n_hidden):
        self.n_in = n_in
        self.n_hidden = n_hidden
        self.W_r = init_weight(rng, n_in, n_hidden)
        self.U_r = init_weight(rng, n_hidden, n_hidden)
        self.b_r = init_zeros(n_hidden)
        self.W_u = init_weight(rng, n_in, n_hidden)
        self.U_u = init_weight(rng, n_hidden, n_hidden)
        self.b_u = init_zeros(n_hidden)
        self.W_c = init_weight(rng, n_in, n_hidden)
        self.U_c = init_weight(rng, n_hidden, n_hidden)
        self.b_c = init_zeros(n_hidden)


def gru_step(p: GruParams, x, h):
    """One GRU transition composed from primitive tape ops."""
    if x.shape[-1] != p.n_in or h.shape[-1] != p.n_hidden:
        raise ValueError(
            f"gru_step expects input dim {p.n_in} and hidden dim {p.n_hidden}, "
            f"got {x.shape[-1]} and {h.shape[-1]}")
    r = sigmoid(x @ p.W_r + h @ p.U_r + p.b_r)
    u = sigmoid(x @ p.W_u + h @ p.U_u + p.b_u)
    c = tanh(x @ p.W_c + (r * h) @ p.U_c + p.b_c)
    return u * h + (1.0 - u) * c


def gru_sequence(p: GruParams, xs):
    """Run the cell left to right from a zero state over (B, T, n_in).

    Returns all hidden states (B, T, H).  The input projection is an
    ordinary tape matmul; the recurrence is a single fused node whose
    forward and backward run in the compiled kernel when available.
    """
    if xs.shape[-1] != p.n_in:
        raise ValueError(f"gru input dim {xs.shape[-1]} != {p.n_in}")
    w = concat([p.W_r, p.W_u, p.W_c], axis=1)
    bias = concat([p.b_r, p.b_u, p.b_c], axis=0)
    xp = matmul(xs, w) + bias
    b = xs.shape[0]
    h0 = np.zeros((b, p.n_hidden))
    ur, uu, uc = p.U_r.data, p.U_u.data, p.U_c.data
    hs, cache = kernels.gru_forward(xp.data, ur, uu, uc, h0)

    def back(g):
        dxp, dur, duu, duc, _ = kernels.gru_backward(g, cache, ur, uu, uc)
        return dxp, dur, duu, duc

    return _result(hs, (xp, p.U_r, p.U_u, p.U_c), back)


# ----------------------------------------------------------------------
# encoder


@dataclass
class EncoderConfig:
    vocab_size: int
    dim: int = 32
    heads: int = 2
    layers: int = 1
    max_len: int = 64
    ffn_mult: int = 2

    def __post_init__(self):
        if self.dim % self.heads:
            raise ValueError(f"model dim {self.dim} not divisible by {self.heads} heads")


class Block(Module):
    def __init__(self, rng, dim, heads, ffn_mult):
        self.heads = heads
        self.ln1 = LayerNorm(dim)
        self.qkv = Linear(rng, dim, 3 * dim)
        self.proj = Linear(rng, dim, dim)
        self.ln2 = LayerNorm(dim)
        self.ff1 = Linear(rng, dim, ffn_mult * dim)
        self.ff2 = Linear(rng, ffn_mult * dim, dim)

    def __call__(self, x, key_bias):
        b, t, d = x.shape
        hd = d // self.heads
        qkv = self.qkv(self.ln1(x)).reshape(b, t, 3, self.heads, hd).transpose(2, 0, 3, 1, 4)
        q, k, v = qkv[0], qkv[1], qkv[2]
        scores = matmul(q, k.transpose(0, 1, 3, 2)) * (1.0 / np.sqrt(hd))
        if key_bias is not None:
            scores = scores + key_bias
        att = matmul(softmax(scores), v).transpose(0, 2, 1, 3).reshape(b, t, d)
        x = x + self.proj(att)
        return x + self.ff2(gelu(self.ff1(self.ln2(x))))


class Encoder(Module):
    """Token + learned position embeddings followed by pre-norm attention blocks."""

    def __init__(self, rng, cfg: EncoderConfig):
        self.cfg = cfg
        self.tok_emb = init_weight(rng, cfg.vocab_size, cfg.dim)
        self.pos_emb = init_weight(rng, cfg.max_len, cfg.dim)
        self.blocks = [Block(rng, cfg.dim, cfg.heads, cfg.ffn_mult) for _ in range(cfg.layers)]
        self.ln_f = LayerNorm(cfg.dim)

    def __call__(self, ids, mask=None):
        ids = np.asarray(ids)
        squeeze = ids.ndim == 1
        if squeeze:
            ids = ids[None, :]
            mask = None if mask is None else np.asarray(mask)[None, :]
        b, t = ids.shape
        if t > self.cfg.max_len:
            raise ValueError(f"sequence length {t} exceeds max length {self.cfg.max_len}")
        if ids.size and (ids.min() < 0 or ids.max() >= self.cfg.vocab_size):
            raise IndexError(f"token id out of range for vocab size {self.cfg.vocab_size}")
        x = embedding(self.tok_emb, ids) + self.pos_emb[:t]
        key_bias = None
        if mask is not None:
            key_bias = np.where(np.asarray(mask, dtype=bool), 0.0, -1e9)[:, None, None, :]
        for blk in self.blocks:
            x = blk(x, key_bias)
        out = self.ln_f(x)
        return out[0] if squeeze else out


def encoder_forward(token_ids, encoder, mask=None):
    """Per-token embeddings for one sentence (T,) or a padded batch (B, T)."""
    return encoder(token_ids, mask)


def as_param(values, name=None):
    return Tensor(np.asarray(values, dtype=DTYPE), requires_grad=True, name=name)
