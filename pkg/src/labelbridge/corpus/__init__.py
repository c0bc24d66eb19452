"""Corpus ingestion, vocabularies, overlap detection and synthetic data."""

from labelbridge.corpus.formats import (
    ParseError,
    format_conllu,
    format_pairs,
    format_two_col,
    parse_conllu,
    parse_pairs,
    parse_two_col,
    read_corpus,
    read_pairs,
)
from labelbridge.corpus.oracle import OracleTooLarge, bayes_on_pairs, bayes_oracle
from labelbridge.corpus.overlap import OverlapResult, detect_overlap
from labelbridge.corpus.records import ParallelPair, Sentence, Tagset
from labelbridge.corpus.synth import PRESETS, SynthConfig, SynthCorpus, gen_synthetic
from labelbridge.corpus.vocab import PAD_ID, UNK_ID, Vocab, build_vocab

__all__ = [
    "PAD_ID",
    "PRESETS",
    "UNK_ID",
    "OracleTooLarge",
    "OverlapResult",
    "ParallelPair",
    "ParseError",
    "Sentence",
    "SynthConfig",
    "SynthCorpus",
    "Tagset",
    "Vocab",
    "bayes_on_pairs",
    "bayes_oracle",
    "build_vocab",
    "detect_overlap",
    "format_conllu",
    "format_pairs",
    "format_two_col",
    "gen_synthetic",
    "parse_conllu",
    "parse_pairs",
    "parse_two_col",
    "read_corpus",
    "read_pairs",
]
