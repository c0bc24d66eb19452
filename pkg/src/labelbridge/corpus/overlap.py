from __future__ import annotations

from dataclasses import dataclass, field

from labelbridge.corpus.records import ParallelPair


@dataclass
class OverlapResult:
    pairs: list[ParallelPair] = field(default_factory=list)
    mismatched: int = 0
    duplicate_texts: int = 0

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def audit(self) -> str:
        return (f"pairs={len(self.pairs)} mismatched_tokenisation={self.mismatched} "
                f"repeated_texts_ignored={self.duplicate_texts}")


def _own_tags(s):
    return s.y_tags if s.y_tags is not None else s.z_tags


def detect_overlap(corpus_a, corpus_b, casefold=False):
    """Sentences whose space-joined token text occurs in both corpora.

    The pair's ``y_tags`` come from ``corpus_a`` and ``z_tags`` from
    ``corpus_b``.  Only the first occurrence of a repeated text in either
    corpus is used.  Matches whose token counts differ (possible when tokens
    contain spaces) are dropped and counted in ``mismatched``.
    """
    key = (lambda s: s.text.casefold()) if casefold else (lambda s: s.text)
    result = OverlapResult()
    index_b = {}
    for s in corpus_b:
        k = key(s)
        if k in index_b:
            result.duplicate_texts += 1
        else:
            index_b[k] = s
    seen = set()
    for s in corpus_a:
        k = key(s)
        if k in seen:
            result.duplicate_texts += 1
            continue
        seen.add(k)
        other = index_b.get(k)
        if other is None:
            continue
        if len(other.tokens) != len(s.tokens):
            result.mismatched += 1
            continue
        result.pairs.append(ParallelPair(list(s.tokens), list(_own_tags(s)), list(_own_tags(other))))
    return result
