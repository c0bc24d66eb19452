"""Bayes-optimal tagging accuracy for synthetic configurations.

The optimal predictor of Y at position t labels it with
``argmax_y P(y_t | observations)``, where the observations are the words
alone (``x_only``) or the words plus the Z tags (``x_and_z``).  Its
expected token accuracy is

    sum_n P(n) * sum_obs P(obs | n) * sum_t max_y P(y_t | obs)
    ---------------------------------------------------------
                     sum_n P(n) * n

Posteriors come from forward-backward over the latent chain.  The outer
sum is exact (enumerating every observation sequence) for small
configurations, or a Monte Carlo ratio estimate over generated sentences.
"""

from __future__ import annotations

import itertools

import numpy as np

from labelbridge.corpus.synth import SynthConfig, sample_sequences
from labelbridge.substrate import kernels
from labelbridge.substrate.rng import Rng

MODES = ("x_only", "x_and_z")
# exact enumeration budget: sum over lengths of (#sequences * length * latent)
MAX_EXACT_WORK = 3e7
_CHUNK = 1 << 15


class OracleTooLarge(ValueError):
    pass


def _symbol_likelihood(config: SynthConfig, mode):
    """(L, K) likelihood of each observation symbol under each latent tag."""
    if mode == "x_only":
        return config.emission
    if mode == "x_and_z":
        # symbol index = word * |Z| + z
        return (config.emission[:, :, None] * config.z_channel[:, None, :]).reshape(config.n_latent, -1)
    raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def encode_observations(config, words, z=None):
    words = np.asarray(words, dtype=np.intp)
    if z is None:
        return words
    return words * config.n_z_tags + np.asarray(z, dtype=np.intp)


def posteriors(config: SynthConfig, obs, mode="x_only"):
    """Latent posteriors (N, T, L) and log-likelihoods (N,) for equal-length symbol rows."""
    obs = np.atleast_2d(np.asarray(obs, dtype=np.intp))
    b = _symbol_likelihood(config, mode)
    lik = np.transpose(b[:, obs], (1, 2, 0))
    return kernels.hmm_posteriors(lik, config.start, config.transition)


def y_posteriors(config, obs, mode="x_only"):
    post, ll = posteriors(config, obs, mode)
    return post @ config.y_channel, ll


def exact_work(config, mode):
    k = _symbol_likelihood(config, mode).shape[1]
    return sum(float(k) ** n * n * config.n_latent
               for n in range(1, config.max_len + 1) if config.length_probs[n] > 0)


def _exact(config, mode):
    k = _symbol_likelihood(config, mode).shape[1]
    correct = 0.0
    for n in range(1, config.max_len + 1):
        pn = config.length_probs[n]
        if pn == 0:
            continue
        total_mass = 0.0
        part = 0.0
        seqs = itertools.product(range(k), repeat=n)
        while True:
            chunk = np.fromiter(itertools.chain.from_iterable(itertools.islice(seqs, _CHUNK)),
                                dtype=np.intp)
            if chunk.size == 0:
                break
            obs = chunk.reshape(-1, n)
            py, ll = y_posteriors(config, obs, mode)
            p_obs = np.exp(ll)
            # impossible sequences have undefined posteriors and no weight
            seen = p_obs > 0
            total_mass += p_obs.sum()
            part += (p_obs[seen] * py[seen].max(axis=2).sum(axis=1)).sum()
        if abs(total_mass - 1.0) > 1e-9:
            raise ArithmeticError(f"observation probabilities for length {n} sum to {total_mass}")
        correct += pn * part
    mean_len = float(np.arange(config.max_len + 1) @ config.length_probs)
    return correct / mean_len


def _sampled(config, mode, samples, seed):
    draw = sample_sequences(config, samples, Rng(seed))
    correct = 0.0
    tokens = 0
    by_len = {}
    for w, z in zip(draw.words, draw.z):
        by_len.setdefault(len(w), []).append(
            encode_observations(config, w, z if mode == "x_and_z" else None))
    for n in sorted(by_len):
        obs = np.stack(by_len[n])
        py, _ = y_posteriors(config, obs, mode)
        correct += py.max(axis=2).sum()
        tokens += obs.size
    return correct / tokens


def bayes_oracle(config: SynthConfig, mode="x_only", method="auto", samples=20000, seed=0):
    """Expected token accuracy of the Bayes-optimal Y predictor.

    ``method`` is "exact" (raises :class:`OracleTooLarge` past the
    enumeration budget), "sampled", or "auto" (exact when affordable).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    work = exact_work(config, mode)
    if method == "auto":
        method = "exact" if work <= MAX_EXACT_WORK else "sampled"
    if method == "exact":
        if work > MAX_EXACT_WORK:
            raise OracleTooLarge(
                f"exact enumeration needs ~{work:.3g} state updates (limit {MAX_EXACT_WORK:.3g}); "
                "use method='sampled'")
        return _exact(config, mode)
    if method == "sampled":
        return _sampled(config, mode, samples, seed)
    raise ValueError(f"unknown method {method!r}")


def bayes_on_pairs(config: SynthConfig, pairs, mode="x_only", side="y"):
    """Bayes predictor on concrete sentences: (expected accuracy, realised accuracy).

    ``side`` names the tag scheme being predicted; with ``x_and_z`` the
    other scheme's gold tags are observed.
    """
    target_set, other_set = config.y_tagset(), config.z_tagset()
    other_side = "z"
    if side == "z":
        target_set, other_set, other_side = other_set, target_set, "y"
        config = config.swapped()
    expected = realised = 0.0
    tokens = 0
    for p in pairs:
        w = config.word_ids(p.tokens)
        other = other_set.encode(p.tags(other_side)) if mode == "x_and_z" else None
        py, _ = y_posteriors(config, encode_observations(config, w, other)[None, :], mode)
        py = py[0]
        expected += py.max(axis=1).sum()
        realised += (py.argmax(axis=1) == np.asarray(target_set.encode(p.tags(side)))).sum()
        tokens += len(w)
    return expected / tokens, realised / tokens
