"""Count-based n-gram language model and a replay provider for exported distributions.

The model exposes the interface every decoder needs: a vocabulary and
``next_distribution(context) -> ProbDist``.  Smoothing keeps the support full,
so information content is defined for every token at every step.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import math

import numpy as np

from .corpus import Corpus, Vocabulary
from .dist import ProbDist, normalize

_MAGIC = "decodelab-ngram v1"


@dataclass(frozen=True)
class AddK:
    """Add-k smoothing: P(y|ctx) = (count + k) / (total + k * |V|)."""

    k: float = 0.01

    def __post_init__(self) -> None:
        if not self.k > 0.0:
            raise ValueError(f"k must be positive, got {self.k!r}")


@dataclass(frozen=True)
class Interpolated:
    """Weighted mixture of add-k estimates of orders 1..n.

    weights[i] scales the order-(i+1) estimate; they are normalized to sum
    to 1 on use.
    """

    weights: tuple[float, ...]
    k: float = 0.01

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValueError("weights must be nonempty")
        if any(w < 0.0 for w in self.weights) or sum(self.weights) <= 0.0:
            raise ValueError("weights must be nonnegative with positive sum")
        if not self.k > 0.0:
            raise ValueError(f"k must be positive, got {self.k!r}")


Smoothing = AddK | Interpolated

# context -> (successor ids ascending, their counts, total count)
_Table = dict[tuple[int, ...], tuple[np.ndarray, np.ndarray, int]]


class NGramLM:
    def __init__(self, vocab: Vocabulary, order: int, smoothing: Smoothing, tables: dict[int, _Table]) -> None:
        self.vocab = vocab
        self.order = order
        self.smoothing = smoothing
        self._tables = tables

    # -- training ---------------------------------------------------------

    @classmethod
    def train(cls, corpus: Corpus, order: int, smoothing: Smoothing = AddK()) -> "NGramLM":
        """Count n-grams with BOS padding of length order-1 and per-document EOS."""
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if not corpus.documents:
            raise ValueError("corpus has no documents")
        if isinstance(smoothing, Interpolated) and len(smoothing.weights) != order:
            raise ValueError(f"interpolated smoothing needs {order} weights, got {len(smoothing.weights)}")
        orders = range(1, order + 1) if isinstance(smoothing, Interpolated) else [order]
        vocab = corpus.vocab
        raw: dict[int, dict[tuple[int, ...], Counter]] = {o: defaultdict(Counter) for o in orders}
        for doc in corpus.documents:
            for o in orders:
                seq = [vocab.bos_id] * (o - 1) + list(doc) + [vocab.eos_id]
                table = raw[o]
                for i in range(len(seq) - o + 1):
                    table[tuple(seq[i : i + o - 1])][seq[i + o - 1]] += 1
        tables: dict[int, _Table] = {}
        for o, table in raw.items():
            packed: _Table = {}
            for ctx, counter in table.items():
                ids = np.array(sorted(counter), dtype=np.intp)
                cnts = np.array([counter[i] for i in ids], dtype=np.float64)
                packed[ctx] = (ids, cnts, int(cnts.sum()))
            tables[o] = packed
        return cls(vocab, order, smoothing, tables)

    # -- probabilities -----------------------------------------------------

    def _sanitize(self, context: Sequence[int]) -> list[int]:
        n = len(self.vocab)
        unk = self.vocab.unk_id
        return [c if 0 <= c < n else unk for c in context]

    def _context_for(self, context: list[int], o: int) -> tuple[int, ...]:
        need = o - 1
        if need == 0:
            return ()
        tail = context[-need:]
        if len(tail) < need:
            tail = [self.vocab.bos_id] * (need - len(tail)) + tail
        return tuple(tail)

    def _order_vector(self, o: int, ctx: tuple[int, ...], k: float) -> np.ndarray:
        size = len(self.vocab)
        vec = np.full(size, k, dtype=np.float64)
        entry = self._tables[o].get(ctx)
        total = 0
        if entry is not None:
            ids, cnts, total = entry
            vec[ids] += cnts
        return vec / (total + k * size)

    def next_distribution(self, context: Sequence[int]) -> ProbDist:
        """Smoothed distribution over the next token given the recent context."""
        ctx_ids = self._sanitize(context)
        if isinstance(self.smoothing, AddK):
            ctx = self._context_for(ctx_ids, self.order)
            return ProbDist._wrap(self._order_vector(self.order, ctx, self.smoothing.k))
        weights = np.asarray(self.smoothing.weights, dtype=np.float64)
        weights = weights / weights.sum()
        mix = np.zeros(len(self.vocab), dtype=np.float64)
        for o in range(1, self.order + 1):
            ctx = self._context_for(ctx_ids, o)
            mix += weights[o - 1] * self._order_vector(o, ctx, self.smoothing.k)
        return ProbDist._wrap(mix / mix.sum())

    def _token_prob(self, ctx_ids: list[int], token: int) -> float:
        size = len(self.vocab)

        def order_prob(o: int) -> float:
            ctx = self._context_for(ctx_ids, o)
            entry = self._tables[o].get(ctx)
            k = self.smoothing.k
            count, total = 0.0, 0
            if entry is not None:
                ids, cnts, total = entry
                j = int(np.searchsorted(ids, token))
                if j < ids.size and ids[j] == token:
                    count = float(cnts[j])
            return (count + k) / (total + k * size)

        if isinstance(self.smoothing, AddK):
            return order_prob(self.order)
        weights = np.asarray(self.smoothing.weights, dtype=np.float64)
        weights = weights / weights.sum()
        return float(sum(weights[o - 1] * order_prob(o) for o in range(1, self.order + 1)))

    def sequence_logprob(self, tokens: Sequence[int]) -> float:
        """Sum of per-step natural log probabilities, starting at BOS padding.

        Tokens are scored as given; an EOS id in the sequence is scored like
        any other step, and none is appended implicitly.
        """
        if not tokens:
            raise ValueError("cannot score an empty sequence")
        ids = self._sanitize(tokens)
        total = 0.0
        context: list[int] = []
        for tok in ids:
            total += math.log(self._token_prob(context, tok))
            context.append(tok)
        return total

    # -- serialization -----------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Line-oriented dump: header, vocabulary, then sorted count tables."""
        lines = [_MAGIC, f"order {self.order}"]
        if isinstance(self.smoothing, AddK):
            lines.append(f"smoothing add_k {self.smoothing.k!r}")
        else:
            parts = " ".join(repr(w) for w in self.smoothing.weights)
            lines.append(f"smoothing interpolated {self.smoothing.k!r} {parts}")
        lines.append(f"vocab {len(self.vocab)}")
        lines.extend(self.vocab.tokens)
        for o in sorted(self._tables):
            table = self._tables[o]
            lines.append(f"counts {o} {len(table)}")
            for ctx in sorted(table):
                ids, cnts, _total = table[ctx]
                head = ",".join(str(c) for c in ctx) if ctx else "-"
                body = " ".join(f"{int(i)}:{int(c)}" for i, c in zip(ids, cnts))
                lines.append(f"{head} {body}" if body else head)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "NGramLM":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        pos = 0

        def take() -> str:
            nonlocal pos
            if pos >= len(lines):
                raise ValueError(f"{path}: truncated model file")
            line = lines[pos]
            pos += 1
            return line

        if take() != _MAGIC:
            raise ValueError(f"{path}: not a decodelab n-gram model")
        order = int(take().split()[1])
        parts = take().split()
        if parts[1] == "add_k":
            smoothing: Smoothing = AddK(float(parts[2]))
        elif parts[1] == "interpolated":
            smoothing = Interpolated(tuple(float(w) for w in parts[3:]), k=float(parts[2]))
        else:
            raise ValueError(f"{path}: unknown smoothing {parts[1]!r}")
        vocab_size = int(take().split()[1])
        vocab = Vocabulary([take() for _ in range(vocab_size)])
        tables: dict[int, _Table] = {}
        while pos < len(lines):
            header = take().split()
            if header[0] != "counts":
                raise ValueError(f"{path}: expected a counts block, got {header[0]!r}")
            o, n_ctx = int(header[1]), int(header[2])
            packed: _Table = {}
            for _ in range(n_ctx):
                fields = take().split()
                ctx = () if fields[0] == "-" else tuple(int(c) for c in fields[0].split(","))
                pairs = [f.split(":") for f in fields[1:]]
                ids = np.array([int(i) for i, _ in pairs], dtype=np.intp)
                cnts = np.array([float(c) for _, c in pairs], dtype=np.float64)
                packed[ctx] = (ids, cnts, int(cnts.sum()))
            tables[o] = packed
        return cls(vocab, order, smoothing, tables)


class EndOfStream(Exception):
    """Raised when a replay provider runs out of recorded steps."""


class ReplayProvider:
    """Serves pre-recorded per-step distributions in file order.

    The file holds one distribution per line: |V| space-separated
    probabilities.  Rows are normalized at load time; a negative entry is a
    load error naming the row.  Satisfies the same interface as NGramLM, so
    decoders can run against distributions exported by external models
    (context is ignored; steps are consumed strictly in order).
    """

    def __init__(self, vocab: Vocabulary, steps: Sequence[ProbDist]) -> None:
        self.vocab = vocab
        self._steps = list(steps)
        self._cursor = 0

    @classmethod
    def load(cls, path: str | Path, vocab: Vocabulary) -> "ReplayProvider":
        steps: list[ProbDist] = []
        with open(path, encoding="utf-8") as fh:
            for row, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    vals = np.array([float(f) for f in line.split()], dtype=np.float64)
                except ValueError as exc:
                    raise ValueError(f"{path}: row {row}: {exc}") from None
                if vals.size != len(vocab):
                    raise ValueError(f"{path}: row {row}: expected {len(vocab)} probabilities, got {vals.size}")
                if np.any(vals < 0.0):
                    raise ValueError(f"{path}: row {row}: negative probability")
                if float(vals.sum()) <= 0.0:
                    raise ValueError(f"{path}: row {row}: probabilities sum to zero")
                steps.append(normalize(vals))
        return cls(vocab, steps)

    def __len__(self) -> int:
        return len(self._steps)

    @property
    def remaining(self) -> int:
        return len(self._steps) - self._cursor

    def replay_next(self) -> ProbDist:
        if self._cursor >= len(self._steps):
            raise EndOfStream(f"replay exhausted after {len(self._steps)} steps")
        dist = self._steps[self._cursor]
        self._cursor += 1
        return dist

    def next_distribution(self, context: Sequence[int]) -> ProbDist:
        return self.replay_next()
