"""Readers and writers for the corpus file formats.

* two-column TSV (ARK style): ``token<TAB>tag`` per line, blank line ends a sentence
* CoNLL-U (UD style): 10 tab-separated columns, FORM in column 2, UPOS in column 4
* parallel TSV: ``token<TAB>y_tag<TAB>z_tag``, blank-line delimited
"""

from __future__ import annotations

from labelbridge.corpus.records import ParallelPair, Sentence, Tagset


class ParseError(ValueError):
    """Malformed input; carries the 1-based line number and optional path."""

    def __init__(self, message, lineno=None, path=None):
        self.message, self.lineno, self.path = message, lineno, path
        if path is not None:
            where = f"{path}:{lineno}: " if lineno is not None else f"{path}: "
        else:
            where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


def _lines(text):
    # split on "\n" only: tweets can contain U+2028 and friends
    for lineno, raw in enumerate(text.split("\n"), start=1):
        yield lineno, raw.rstrip("\r")


def _check_tag(tag, tagset, lineno):
    if tagset is None:
        return
    try:
        tagset.add(tag)
    except KeyError:
        raise ParseError(f"tag {tag!r} not in tagset {tagset.name}", lineno) from None


def parse_two_col(text, side="z", tagset: Tagset | None = None, source="ark"):
    sentences = []
    tokens, tags = [], []
    for lineno, line in _lines(text):
        if not line.strip():
            if tokens:
                sentences.append(_make(tokens, tags, side, source))
                tokens, tags = [], []
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise ParseError(f"expected 2 tab-separated fields, found {len(fields)}", lineno)
        _check_tag(fields[1], tagset, lineno)
        tokens.append(fields[0])
        tags.append(fields[1])
    if tokens:
        sentences.append(_make(tokens, tags, side, source))
    return sentences


def parse_conllu(text, side="y", tagset: Tagset | None = None, source="tweebank"):
    sentences = []
    tokens, tags = [], []
    for lineno, line in _lines(text):
        if not line.strip():
            if tokens:
                sentences.append(_make(tokens, tags, side, source))
                tokens, tags = [], []
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ParseError(f"expected 10 tab-separated columns, found {len(cols)}", lineno)
        if "-" in cols[0] or "." in cols[0]:
            # multiword-token range or empty node
            continue
        _check_tag(cols[3], tagset, lineno)
        tokens.append(cols[1])
        tags.append(cols[3])
    if tokens:
        sentences.append(_make(tokens, tags, side, source))
    return sentences


def _make(tokens, tags, side, source):
    if side == "y":
        return Sentence(tokens, y_tags=tags, source=source)
    return Sentence(tokens, z_tags=tags, source=source)


def format_two_col(sentences, side="z"):
    out = []
    for s in sentences:
        for tok, tag in zip(s.tokens, s.tags(side)):
            out.append(f"{tok}\t{tag}\n")
        out.append("\n")
    return "".join(out)


def format_conllu(sentences, side="y"):
    out = []
    for s in sentences:
        for i, (tok, tag) in enumerate(zip(s.tokens, s.tags(side)), start=1):
            out.append(f"{i}\t{tok}\t_\t{tag}\t_\t_\t_\t_\t_\t_\n")
        out.append("\n")
    return "".join(out)


def parse_pairs(text):
    pairs = []
    rows = []
    for lineno, line in _lines(text):
        if not line.strip():
            if rows:
                pairs.append(ParallelPair(*map(list, zip(*rows))))
                rows = []
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated fields, found {len(fields)}", lineno)
        rows.append(fields)
    if rows:
        pairs.append(ParallelPair(*map(list, zip(*rows))))
    return pairs


def format_pairs(pairs):
    out = []
    for p in pairs:
        for row in zip(p.tokens, p.y_tags, p.z_tags):
            out.append("\t".join(row) + "\n")
        out.append("\n")
    return "".join(out)


def read_corpus(path, side, tagset=None):
    """Read a corpus file, choosing the parser by extension (.conllu -> CoNLL-U, else two-column)."""
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        if path.endswith(".conllu"):
            return parse_conllu(text, side=side, tagset=tagset, source=path)
        return parse_two_col(text, side=side, tagset=tagset, source=path)
    except ParseError as exc:
        raise ParseError(exc.message, exc.lineno, path) from None


def read_pairs(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return parse_pairs(text)
    except ParseError as exc:
        raise ParseError(exc.message, exc.lineno, path) from None


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
