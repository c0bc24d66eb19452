from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class Sentence:
    """A pre-tokenised sentence labelled in one (or both) tag schemes.

    Tags are kept as strings; :class:`Tagset` maps them to ids.
    """

    tokens: list[str]
    y_tags: Optional[list[str]] = None
    z_tags: Optional[list[str]] = None
    source: str = ""

    def __post_init__(self):
        for side in ("y_tags", "z_tags"):
            tags = getattr(self, side)
            if tags is not None and len(tags) != len(self.tokens):
                raise ValueError(f"{side} has {len(tags)} entries for {len(self.tokens)} tokens")

    def tags(self, side: str) -> Optional[list[str]]:
        return self.y_tags if side == "y" else self.z_tags

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __len__(self):
        return len(self.tokens)


@dataclass
class ParallelPair:
    tokens: list[str]
    y_tags: list[str]
    z_tags: list[str]

    def __post_init__(self):
        if not len(self.tokens) == len(self.y_tags) == len(self.z_tags):
            raise ValueError("parallel pair sequences differ in length")

    def tags(self, side: str) -> list[str]:
        return self.y_tags if side == "y" else self.z_tags

    def __len__(self):
        return len(self.tokens)


@dataclass
class Tagset:
    """Ordered tag inventory.  Open tagsets grow as unseen tags arrive."""

    name: str
    tags: list[str] = field(default_factory=list)
    closed: bool = False

    def __post_init__(self):
        if len(set(self.tags)) != len(self.tags):
            raise ValueError(f"duplicate tags in tagset {self.name}")
        self._index = {t: i for i, t in enumerate(self.tags)}

    def __len__(self):
        return len(self.tags)

    def __contains__(self, tag):
        return tag in self._index

    def add(self, tag: str) -> int:
        if tag in self._index:
            return self._index[tag]
        if self.closed:
            raise KeyError(f"tag {tag!r} not in closed tagset {self.name}")
        self._index[tag] = len(self.tags)
        self.tags.append(tag)
        return self._index[tag]

    def id(self, tag: str) -> int:
        try:
            return self._index[tag]
        except KeyError:
            raise KeyError(f"tag {tag!r} not in tagset {self.name}") from None

    def encode(self, tags):
        return [self.id(t) for t in tags]

    def decode(self, ids):
        return [self.tags[i] for i in ids]

    @classmethod
    def from_file(cls, path, name=None):
        """One tag per line; blank lines and ``#`` comments ignored."""
        with open(path, encoding="utf-8") as fh:
            tags = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
        return cls(name or str(path), tags, closed=True)

    @classmethod
    def from_sentences(cls, name, sentences, side):
        ts = cls(name)
        for s in sentences:
            for t in s.tags(side) or ():
                ts.add(t)
        return ts
