from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

UNK, PAD = "<unk>", "<pad>"
UNK_ID, PAD_ID = 0, 1


@dataclass
class Vocab:
    itos: list[str]
    min_freq: int = 1
    stoi: dict = field(init=False)

    def __post_init__(self):
        if self.itos[:2] != [UNK, PAD]:
            raise ValueError("vocab must start with the reserved <unk>, <pad> entries")
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate vocab entries")

    unk_id = UNK_ID
    pad_id = PAD_ID

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id(self, token):
        return self.stoi.get(token, UNK_ID)

    def encode(self, tokens):
        return [self.stoi.get(t, UNK_ID) for t in tokens]


def build_vocab(sentences, min_freq=1):
    """Frequency-ordered vocabulary (desc count, then lexicographic)."""
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts = Counter(tok for s in sentences for tok in s.tokens)
    kept = sorted((t for t, c in counts.items() if c >= min_freq), key=lambda t: (-counts[t], t))
    kept = [t for t in kept if t not in (UNK, PAD)]
    return Vocab([UNK, PAD] + kept, min_freq=min_freq)
