"""Corpus ingestion: tokenization, vocabulary construction, id encoding."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"
SPECIALS = (BOS, EOS, UNK)

BOS_ID = 0
EOS_ID = 1
UNK_ID = 2


def tokenize(text: str, mode: str = "whitespace") -> list[str]:
    """Split text into tokens.

    "whitespace" splits on runs of whitespace (round-trips via a single
    space); "char" yields individual characters, spaces included.
    """
    if mode == "whitespace":
        return text.split()
    if mode == "char":
        return list(text)
    raise ValueError(f"unknown tokenizer mode: {mode!r}")


class Vocabulary:
    """Bijective token <-> dense-id table with BOS/EOS/UNK at ids 0..2."""

    def __init__(self, tokens: Sequence[str]) -> None:
        tokens = list(tokens)
        if tuple(tokens[:3]) != SPECIALS:
            raise ValueError(f"first three tokens must be {SPECIALS}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate token in vocabulary")
        self._tokens = tokens
        self._ids = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    @property
    def bos_id(self) -> int:
        return BOS_ID

    @property
    def eos_id(self) -> int:
        return EOS_ID

    @property
    def unk_id(self) -> int:
        return UNK_ID

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self._tokens)

    def id_of(self, token: str) -> int:
        """Id of token, or the UNK id when out of vocabulary."""
        return self._ids.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._tokens):
            raise ValueError(f"token id {token_id} outside vocabulary of size {len(self._tokens)}")
        return self._tokens[token_id]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.id_of(t) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.token_of(i) for i in ids]

    def save(self, path: str | Path) -> None:
        """One token per line, in id order."""
        body = "\n".join(self._tokens) + "\n"
        Path(path).write_text(body, encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)


@dataclass
class Corpus:
    """Encoded documents plus the vocabulary they were encoded with."""

    documents: list[list[int]]
    vocab: Vocabulary
    source: str = ""

    @property
    def token_count(self) -> int:
        return sum(len(d) for d in self.documents)


def read_lines(path: str | Path) -> list[str]:
    """Non-blank lines of a text file, one document each."""
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


def build_vocabulary(lines: Iterable[str], mode: str = "whitespace", min_count: int = 1) -> Vocabulary:
    """Count tokens over the lines and keep those seen at least min_count times.

    Ids are dense: specials first, then tokens by descending frequency with
    lexicographic tie-break, so construction is deterministic.
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts: Counter[str] = Counter()
    for line in lines:
        counts.update(tokenize(line, mode))
    for special in SPECIALS:
        counts.pop(special, None)
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(list(SPECIALS) + kept)


def load_corpus(path: str | Path, vocab: Vocabulary, mode: str = "whitespace") -> Corpus:
    """Encode one document per non-blank line; OOV tokens map to UNK."""
    docs = [vocab.encode(tokenize(line, mode)) for line in read_lines(path)]
    return Corpus(documents=docs, vocab=vocab, source=str(path))
