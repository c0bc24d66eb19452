"""Synthetic parallel corpora with a known joint label structure.

A latent tag sequence follows a Markov chain.  Each latent tag emits a
word and, independently, one Y tag and one Z tag through fixed stochastic
channels, so Y and Z are correlated only through the shared latent tag.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from labelbridge.corpus.records import ParallelPair, Sentence, Tagset
from labelbridge.substrate.rng import Rng, sample_categorical

ROW_TOL = 1e-9

MATRIX_FIELDS = ("start", "transition", "emission", "y_channel", "z_channel", "length_probs")


@dataclass
class SynthConfig:
    start: np.ndarray
    transition: np.ndarray
    emission: np.ndarray
    y_channel: np.ndarray
    z_channel: np.ndarray
    length_probs: np.ndarray  # index = sentence length; entry 0 must be 0
    n_y: int = 400
    n_z: int = 400
    n_val: int = 200
    disjoint: bool = True

    def __post_init__(self):
        for name in MATRIX_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        self.validate()

    # sizes --------------------------------------------------------------
    @property
    def n_latent(self):
        return self.start.shape[0]

    @property
    def n_words(self):
        return self.emission.shape[1]

    @property
    def n_y_tags(self):
        return self.y_channel.shape[1]

    @property
    def n_z_tags(self):
        return self.z_channel.shape[1]

    @property
    def max_len(self):
        return self.length_probs.shape[0] - 1

    # names --------------------------------------------------------------
    def words(self):
        return [f"w{i}" for i in range(self.n_words)]

    def y_tagset(self):
        return Tagset("Y", [f"Y{i}" for i in range(self.n_y_tags)], closed=True)

    def z_tagset(self):
        return Tagset("Z", [f"Z{i}" for i in range(self.n_z_tags)], closed=True)

    def word_ids(self, tokens):
        return [int(t[1:]) for t in tokens]

    def validate(self):
        L = self.n_latent
        shapes = {
            "start": (L,),
            "transition": (L, L),
            "emission": (L, None),
            "y_channel": (L, None),
            "z_channel": (L, None),
        }
        for name, shape in shapes.items():
            m = getattr(self, name)
            if m.ndim != len(shape) or any(s is not None and s != d for s, d in zip(shape, m.shape)):
                raise ValueError(f"{name} has shape {m.shape}, expected {shape}")
        for name in MATRIX_FIELDS:
            m = getattr(self, name)
            if np.any(m < 0) or not np.all(np.isfinite(m)):
                raise ValueError(f"{name} must be finite and nonnegative")
            rows = np.atleast_2d(m).sum(axis=-1)
            if np.any(np.abs(rows - 1.0) > ROW_TOL):
                raise ValueError(f"{name} rows must sum to 1 within {ROW_TOL}")
        if self.length_probs.ndim != 1 or self.length_probs[0] != 0:
            raise ValueError("length_probs must be a vector with zero mass on length 0")

    # serialisation ------------------------------------------------------
    def to_dict(self):
        d = {name: getattr(self, name).tolist() for name in MATRIX_FIELDS}
        d.update(n_y=self.n_y, n_z=self.n_z, n_val=self.n_val, disjoint=self.disjoint)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)

    def swapped(self):
        """The same process with the roles of Y and Z exchanged."""
        d = self.to_dict()
        d["y_channel"], d["z_channel"] = d["z_channel"], d["y_channel"]
        d["n_y"], d["n_z"] = d["n_z"], d["n_y"]
        return SynthConfig.from_dict(d)

    # marginals ----------------------------------------------------------
    def latent_token_marginal(self):
        """Expected share of tokens carrying each latent tag."""
        dist = self.start.copy()
        acc = np.zeros(self.n_latent)
        # P(length > t) weights position t
        survive = 1.0 - np.cumsum(self.length_probs)
        for t in range(self.max_len):
            acc += survive[t] * dist
            dist = dist @ self.transition
        return acc / acc.sum()


@dataclass
class LatentDraw:
    latents: list[np.ndarray]
    words: list[np.ndarray]
    y: list[np.ndarray]
    z: list[np.ndarray]


def sample_sequences(config: SynthConfig, n, rng: Rng) -> LatentDraw:
    """Draw ``n`` sentences (latent tags, words, Y and Z tags) as id arrays."""
    lengths = sample_categorical(np.broadcast_to(config.length_probs, (n, config.max_len + 1)), rng)
    lengths = np.atleast_1d(lengths)
    t_max = int(lengths.max()) if n else 0
    lat = np.zeros((n, t_max), dtype=np.intp)
    if t_max:
        lat[:, 0] = np.atleast_1d(sample_categorical(np.broadcast_to(config.start, (n, config.n_latent)), rng))
        for t in range(1, t_max):
            lat[:, t] = np.atleast_1d(sample_categorical(config.transition[lat[:, t - 1]], rng))
    words = np.atleast_2d(sample_categorical(config.emission[lat], rng)).reshape(n, t_max)
    ys = np.atleast_2d(sample_categorical(config.y_channel[lat], rng)).reshape(n, t_max)
    zs = np.atleast_2d(sample_categorical(config.z_channel[lat], rng)).reshape(n, t_max)
    cut = lambda a: [a[i, :lengths[i]].copy() for i in range(n)]
    return LatentDraw(cut(lat), cut(words), cut(ys), cut(zs))


@dataclass
class SynthTruth:
    """Handle on the generating process for one synthetic corpus."""

    config: SynthConfig
    seed: int
    val_latents: list = field(default_factory=list)

    def manifest(self) -> str:
        lines = ["[synth]", f"seed = {self.seed}"]
        for key, value in self.config.to_dict().items():
            lines.append(f"{key} = {json.dumps(value)}")
        return "\n".join(lines) + "\n"


@dataclass
class SynthCorpus:
    d_y: list[Sentence]
    d_z: list[Sentence]
    val: list[ParallelPair]
    truth: SynthTruth


def _draw_unique(config, n, rng, taken, max_rounds=50):
    """Draw ``n`` sentences whose text is not in ``taken`` (updated in place)."""
    out = []
    for _ in range(max_rounds):
        need = n - len(out)
        if need <= 0:
            break
        draw = sample_sequences(config, max(2 * need, 8), rng)
        for lat, w, y, z in zip(draw.latents, draw.words, draw.y, draw.z):
            key = tuple(w.tolist())
            if config.disjoint and key in taken:
                continue
            out.append((lat, w, y, z))
            if len(out) == n:
                break
    if len(out) < n:
        raise ValueError("could not draw disjoint corpora; sentence space too small for the requested sizes")
    for _, w, _, _ in out:
        taken.add(tuple(w.tolist()))
    return out


def gen_synthetic(config: SynthConfig, seed: int) -> SynthCorpus:
    """Y-labelled and Z-labelled training corpora plus a parallel validation set.

    With ``config.disjoint`` the three splits share no sentence text (each
    split may still repeat a text internally).
    """
    config.validate()
    rng = Rng(seed)
    words = config.words()
    ynames = config.y_tagset().tags
    znames = config.z_tagset().tags
    taken: set = set()
    rows_y = _draw_unique(config, config.n_y, rng.spawn(1), taken)
    rows_z = _draw_unique(config, config.n_z, rng.spawn(2), taken)
    rows_v = _draw_unique(config, config.n_val, rng.spawn(3), taken)
    toks = lambda w: [words[i] for i in w]
    d_y = [Sentence(toks(w), y_tags=[ynames[i] for i in y], source="synth-y") for _, w, y, _ in rows_y]
    d_z = [Sentence(toks(w), z_tags=[znames[i] for i in z], source="synth-z") for _, w, _, z in rows_z]
    val = [ParallelPair(toks(w), [ynames[i] for i in y], [znames[i] for i in z]) for _, w, y, z in rows_v]
    truth = SynthTruth(config, seed, [lat for lat, _, _, _ in rows_v])
    return SynthCorpus(d_y, d_z, val, truth)


# ----------------------------------------------------------------------
# presets


def _normalise(m):
    m = np.asarray(m, dtype=np.float64)
    return m / m.sum(axis=-1, keepdims=True)


def _lengths(lo, hi):
    p = np.zeros(hi + 1)
    p[lo:hi + 1] = 1.0
    return p / p.sum()


def fixture_config():
    """3 latent tags, 4 words, |Y| = 2, |Z| = 2, sentences of length 1..6."""
    return SynthConfig(
        start=[0.5, 0.3, 0.2],
        transition=[[0.6, 0.3, 0.1], [0.2, 0.5, 0.3], [0.3, 0.3, 0.4]],
        emission=[[0.7, 0.1, 0.1, 0.1], [0.1, 0.6, 0.2, 0.1], [0.1, 0.2, 0.3, 0.4]],
        y_channel=[[0.9, 0.1], [0.2, 0.8], [0.5, 0.5]],
        z_channel=[[1.0, 0.0], [0.7, 0.3], [0.0, 1.0]],
        length_probs=[0.0, 0.1, 0.2, 0.2, 0.2, 0.2, 0.1],
        n_y=20, n_z=20, n_val=10, disjoint=False,
    )


def _ambiguous_emission(n_latent, words_per_group, shared, rng):
    """Each latent tag owns a few private words and shares ``shared`` words with a partner.

    Latent tags (2k, 2k+1) are partners.  A shared word is emitted equally by
    both partners, so it reveals the pair but not which member.
    """
    n_pairs = n_latent // 2
    n_words = n_latent * words_per_group + n_pairs * shared
    em = np.zeros((n_latent, n_words))
    for lat in range(n_latent):
        own = slice(lat * words_per_group, (lat + 1) * words_per_group)
        em[lat, own] = rng.uniform(0.5, 1.5, size=words_per_group)
        base = n_latent * words_per_group + (lat // 2) * shared
        em[lat, base:base + shared] = 1.0
    return em


def info_gap_config(n_y=300, n_z=300, n_val=200, private_mass=0.3):
    """Z identifies the latent tag; Y merges partners; words are mostly ambiguous.

    Latent tags come in partner pairs (2k, 2k+1).  Y = the latent tag's
    pair index crossed with a parity bit that is *not* visible in shared
    words, so knowing Z fixes Y while the words alone leave it uncertain.
    """
    rng = np.random.default_rng(11)
    n_latent = 6
    private, shared = 2, 4
    em = _ambiguous_emission(n_latent, private, shared, rng)
    # scale private words to the requested share of emission mass
    for lat in range(n_latent):
        own = slice(lat * private, (lat + 1) * private)
        rest = np.ones(em.shape[1], dtype=bool)
        rest[own] = False
        em[lat, own] *= private_mass / em[lat, own].sum()
        em[lat, rest] *= (1 - private_mass) / em[lat, rest].sum()
    trans = np.full((n_latent, n_latent), 1.0)
    for lat in range(n_latent):
        trans[lat, (lat + 2) % n_latent] += 3.0
        trans[lat, (lat + 3) % n_latent] += 2.0
    y_channel = np.zeros((n_latent, 2))
    y_channel[np.arange(n_latent), np.arange(n_latent) % 2] = 1.0
    return SynthConfig(
        start=np.full(n_latent, 1.0 / n_latent),
        transition=_normalise(trans),
        emission=_normalise(em),
        y_channel=y_channel,
        z_channel=np.eye(n_latent),
        length_probs=_lengths(6, 12),
        n_y=n_y, n_z=n_z, n_val=n_val,
    )


def cheat_config(n_y=300, n_z=300, n_val=200, private_mass=0.45):
    """Y and Z are both bijective images of the latent tag; words are partly ambiguous."""
    rng = np.random.default_rng(12)
    n_latent = 4
    private, shared = 2, 3
    em = _ambiguous_emission(n_latent, private, shared, rng)
    for lat in range(n_latent):
        own = slice(lat * private, (lat + 1) * private)
        rest = np.ones(em.shape[1], dtype=bool)
        rest[own] = False
        em[lat, own] *= private_mass / em[lat, own].sum()
        em[lat, rest] *= (1 - private_mass) / em[lat, rest].sum()
    trans = np.ones((n_latent, n_latent)) + 2.0 * np.roll(np.eye(n_latent), 1, axis=1)
    perm = np.array([2, 0, 3, 1])
    return SynthConfig(
        start=np.full(n_latent, 1.0 / n_latent),
        transition=_normalise(trans),
        emission=_normalise(em),
        y_channel=np.eye(n_latent),
        z_channel=np.eye(n_latent)[perm],
        length_probs=_lengths(5, 10),
        n_y=n_y, n_z=n_z, n_val=n_val,
    )


def random_config(seed, n_latent=3, n_words=3, n_y=2, n_z=2, max_len=4, concentration=1.0):
    """Dirichlet-random small configuration (for property tests)."""
    g = np.random.default_rng(seed)
    dir_ = lambda *shape: g.dirichlet(np.full(shape[-1], concentration), size=shape[:-1])
    lp = np.zeros(max_len + 1)
    lp[1:] = g.dirichlet(np.ones(max_len))
    return SynthConfig(
        start=g.dirichlet(np.full(n_latent, concentration)),
        transition=dir_(n_latent, n_latent),
        emission=dir_(n_latent, n_words),
        y_channel=dir_(n_latent, n_y),
        z_channel=dir_(n_latent, n_z),
        length_probs=lp,
        n_y=10, n_z=10, n_val=5, disjoint=False,
    )


PRESETS = {
    "fixture": fixture_config,
    "info-gap": info_gap_config,
    "cheat": cheat_config,
}
