"""Text corpus ingestion: tokenization, vocabulary selection, n-gram counting.

Corpus files are UTF-8 text with one sentence per line and LF line endings.
Text is treated as already normalized: tokens are split on runs of whitespace,
case is preserved, and no punctuation handling is applied.  The reserved
symbols ``<s>``, ``</s>`` and ``<unk>`` are injected by counting and scoring,
never stored inside sentences.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
RESERVED = (BOS, EOS, UNK)

# A sentence is a plain list of word tokens (possibly empty).
Sentence = list


class CorpusError(ValueError):
    """Undecodable or malformed corpus input."""


def tokenize(raw_text: str) -> list[Sentence]:
    """Split raw text into one token list per line.

    Tokens are separated by runs of whitespace; empty lines yield empty
    sentences.  A trailing newline does not create an extra sentence.
    Raises :class:`CorpusError` if a reserved symbol appears as a token,
    since sentences must never carry ``<s>``/``</s>``/``<unk>`` themselves.
    """
    lines = raw_text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    sentences = []
    for lineno, line in enumerate(lines, start=1):
        tokens = line.split()
        for tok in tokens:
            if tok in RESERVED:
                raise CorpusError(
                    f"line {lineno}: reserved token {tok!r} in input text"
                )
        sentences.append(tokens)
    return sentences


def load_corpus(path) -> list[Sentence]:
    """Read a UTF-8 corpus file (one sentence per line) and tokenize it."""
    data = Path(path).read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(
            f"{path}: invalid UTF-8 at byte offset {exc.start}"
        ) from exc
    return tokenize(text)


def save_corpus(sentences: Iterable[Sentence], path) -> None:
    """Write sentences as UTF-8 text, one sentence per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sent in sentences:
            fh.write(" ".join(sent))
            fh.write("\n")


@dataclass(frozen=True)
class Vocabulary:
    """Closed word-type set.

    Always contains the reserved symbols; every other member occurred at
    least ``min_count`` times in the pool it was built from.
    """

    words: frozenset = field(default_factory=frozenset)
    min_count: int = 1

    def __post_init__(self):
        if self.min_count < 1:
            raise ValueError(f"min_count must be >= 1, got {self.min_count}")
        object.__setattr__(self, "words", frozenset(self.words) | set(RESERVED))

    def __contains__(self, token) -> bool:
        return token in self.words

    def __len__(self) -> int:
        return len(self.words)

    def map(self, token: str) -> str:
        """Return the token itself if in-vocabulary, else ``<unk>``."""
        return token if token in self.words else UNK

    @property
    def event_words(self) -> frozenset:
        """Words that can be predicted: everything except ``<s>``."""
        return self.words - {BOS}

    def save(self, path) -> None:
        """One word per line, sorted lexicographically, reserved included."""
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for word in sorted(self.words):
                fh.write(word)
                fh.write("\n")

    @classmethod
    def load(cls, path, min_count: int = 1) -> "Vocabulary":
        words = set()
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                word = line.strip()
                if word:
                    words.add(word)
        return cls(words=frozenset(words), min_count=min_count)


def build_vocabulary(pool: Iterable[Sentence], min_count: int) -> Vocabulary:
    """Select all word types occurring at least ``min_count`` times.

    Counting is case-sensitive.  An empty pool yields the reserved-only
    vocabulary.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    freq = Counter()
    for sent in pool:
        freq.update(sent)
    kept = {w for w, c in freq.items() if c >= min_count}
    return Vocabulary(words=frozenset(kept), min_count=min_count)


@dataclass
class CountTable:
    """N-gram counts for all lengths 1..order.

    Keys are token tuples; values are raw occurrence counts.  Sentences are
    padded with (order-1) leading ``<s>`` and one trailing ``</s>``, and only
    n-grams ending at a non-pad position are counted, so ``<s>`` never appears
    as a counted unigram.
    """

    order: int
    counts: dict

    def count(self, ngram) -> int:
        return self.counts.get(tuple(ngram), 0)

    def by_length(self, k: int) -> dict:
        """All n-grams of length k with their counts."""
        return {g: c for g, c in self.counts.items() if len(g) == k}


def count_ngrams(sentences: Iterable[Sentence], order: int, vocab: Vocabulary) -> CountTable:
    """Count n-grams of all lengths 1..order over OOV-mapped, padded sentences.

    Out-of-vocabulary tokens are replaced by ``<unk>`` before counting.
    """
    if order < 1:
        raise ValueError(f"order must be >= 1, got {order}")
    counts = Counter()
    pad = [BOS] * (order - 1)
    for sent in sentences:
        mapped = pad + [vocab.map(t) for t in sent] + [EOS]
        n_pad = order - 1
        for end in range(n_pad + 1, len(mapped) + 1):
            # window end is a real word or </s>; start never reaches past the pads
            for length in range(1, order + 1):
                start = end - length
                if start < 0:
                    break
                counts[tuple(mapped[start:end])] += 1
    return CountTable(order=order, counts=dict(counts))
