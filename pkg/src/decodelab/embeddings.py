"""Word vectors: PPMI co-occurrence training, text-format interchange, similarity."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, Vocabulary

log = logging.getLogger(__name__)


class EmbeddingTable:
    """Dense float64 vectors indexed by token id.

    zero_tokens lists ids whose vector is identically zero (no co-occurrence
    evidence, or missing from a loaded file); cosine against them is 0 by
    convention.
    """

    def __init__(self, vectors: np.ndarray, zero_tokens: Iterable[int] = ()) -> None:
        v = np.array(vectors, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("expected a nonempty 2-d vector table")
        if not np.all(np.isfinite(v)):
            raise ValueError("non-finite vector entry")
        v.flags.writeable = False
        self.vectors = v
        self.dim = v.shape[1]
        self.zero_tokens = tuple(sorted(int(i) for i in zero_tokens))

    def __len__(self) -> int:
        return self.vectors.shape[0]


def train_cooccurrence(corpus: Corpus, window: int = 4, dim: int = 16) -> EmbeddingTable:
    """PPMI over a symmetric window, reduced by SVD to dim components.

    The reduction is made deterministic by fixing each basis vector's sign so
    its largest-magnitude component is positive.  Tokens with an all-zero
    PPMI row (never co-occurring inside the window) get exact zero vectors
    and are flagged.
    """
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if not corpus.documents:
        raise ValueError("corpus has no documents")
    size = len(corpus.vocab)
    if dim < 1 or dim > size:
        raise ValueError(f"dim must lie in [1, {size}], got {dim}")

    counts = np.zeros((size, size), dtype=np.float64)
    for doc in corpus.documents:
        n = len(doc)
        for i, a in enumerate(doc):
            for off in range(1, window + 1):
                j = i + off
                if j >= n:
                    break
                b = doc[j]
                counts[a, b] += 1.0
                counts[b, a] += 1.0

    total = counts.sum()
    vectors = np.zeros((size, dim), dtype=np.float64)
    if total == 0.0:
        log.warning("no co-occurrence pairs at window %d; all vectors are zero", window)
        return EmbeddingTable(vectors, zero_tokens=range(size))

    row = counts.sum(axis=1, keepdims=True)
    col = counts.sum(axis=0, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        pmi = np.log(counts * total / (row * col))
    ppmi = np.where(counts > 0.0, np.maximum(pmi, 0.0), 0.0)

    u, s, _vt = np.linalg.svd(ppmi)
    for j in range(dim):
        pivot = int(np.argmax(np.abs(u[:, j])))
        if u[pivot, j] < 0.0:
            u[:, j] = -u[:, j]
    vectors = u[:, :dim] * np.sqrt(s[:dim])

    zero_rows = [i for i in range(size) if not ppmi[i].any()]
    if zero_rows:
        vectors[zero_rows] = 0.0
        log.info("%d tokens have no co-occurrence evidence; their vectors are zero", len(zero_rows))
    return EmbeddingTable(vectors, zero_tokens=zero_rows)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, defined as 0 when either vector is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(a @ b / (na * nb))


def cosine_to_all(table: EmbeddingTable, query: np.ndarray) -> np.ndarray:
    """Cosine of the query against every row; zero rows score 0."""
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (table.dim,):
        raise ValueError(f"query has shape {q.shape}, table dim is {table.dim}")
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        return np.zeros(len(table), dtype=np.float64)
    norms = np.linalg.norm(table.vectors, axis=1)
    safe = np.where(norms > 0.0, norms, 1.0)
    sims = table.vectors @ q / (safe * qn)
    sims[norms == 0.0] = 0.0
    return sims


def average_embedding(token_ids: Sequence[int], table: EmbeddingTable) -> np.ndarray:
    """Mean vector of the given token ids."""
    if not token_ids:
        raise ValueError("cannot average an empty id list")
    return table.vectors[list(token_ids)].mean(axis=0)


def nearest(
    table: EmbeddingTable,
    query: np.ndarray,
    top_n: int,
    exclude: Iterable[int] = (),
) -> list[tuple[int, float]]:
    """Top-n ids by cosine to the query, ties broken by ascending id."""
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    sims = cosine_to_all(table, query)
    order = np.lexsort((np.arange(sims.size), -sims))
    banned = set(int(i) for i in exclude)
    out: list[tuple[int, float]] = []
    for i in order:
        i = int(i)
        if i in banned:
            continue
        out.append((i, float(sims[i])))
        if len(out) == top_n:
            break
    return out


def save_text_vectors(table: EmbeddingTable, vocab: Vocabulary, path: str | Path) -> None:
    """word2vec text format: a "count dim" header, then one token per line.

    Float values are written with shortest round-trip repr, so save/load is
    exact.  Tokens containing whitespace cannot be represented in this format
    and are rejected.
    """
    if len(table) != len(vocab):
        raise ValueError(f"table has {len(table)} rows, vocabulary has {len(vocab)}")
    lines = [f"{len(vocab)} {table.dim}"]
    for i, token in enumerate(vocab.tokens):
        if any(ch.isspace() for ch in token):
            raise ValueError(f"token {token!r} contains whitespace; not representable in text vector format")
        values = " ".join(repr(float(x)) for x in table.vectors[i])
        lines.append(f"{token} {values}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_text_vectors(path: str | Path, vocab: Vocabulary) -> EmbeddingTable:
    """Load word2vec text vectors for an existing vocabulary.

    Unknown words in the file are ignored; vocabulary words missing from the
    file get the zero vector and are reported via the table's zero_tokens.
    Malformed lines raise ValueError with their line number.
    """
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError(f"{path}: line 1: empty vector file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: line 1: expected 'count dim' header")
    try:
        _count, dim = int(head[0]), int(head[1])
    except ValueError:
        raise ValueError(f"{path}: line 1: expected 'count dim' header") from None
    if dim < 1:
        raise ValueError(f"{path}: line 1: dim must be >= 1")

    vectors = np.zeros((len(vocab), dim), dtype=np.float64)
    seen: set[int] = set()
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != dim + 1:
            raise ValueError(f"{path}: line {ln}: expected a token and {dim} values, got {len(fields)} fields")
        token = fields[0]
        if token not in vocab:
            continue
        try:
            vec = [float(f) for f in fields[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}: line {ln}: {exc}") from None
        tid = vocab.id_of(token)
        vectors[tid] = vec
        seen.add(tid)

    missing = sorted(set(range(len(vocab))) - seen)
    if missing:
        names = ", ".join(vocab.token_of(i) for i in missing[:8])
        more = "" if len(missing) <= 8 else f" (+{len(missing) - 8} more)"
        log.warning("%s: %d vocabulary words missing from vector file: %s%s", path, len(missing), names, more)
    # All-zero rows carry no direction whether they were absent or stored as
    # zeros, so both kinds are flagged; this keeps save/load a full round trip.
    zero_rows = np.flatnonzero(~vectors.any(axis=1))
    return EmbeddingTable(vectors, zero_tokens=sorted(set(missing) | set(int(i) for i in zero_rows)))
