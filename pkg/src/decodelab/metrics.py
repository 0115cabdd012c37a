"""Diversity and faithfulness metrics over token sequences.

All functions take tokens as sequences of strings.  Corpus-level diversity
(dist_n, uniq_n) pools n-grams across texts; rep_n is per-text.  BLEU and
ROUGE follow the standard clipped-count formulations; coverage checks that
each required piece occurs contiguously in the hypothesis.
"""

from __future__ import annotations

import math

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

Tokens = Sequence[str]


def ngrams(tokens: Tokens, n: int) -> list[tuple[str, ...]]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return [tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]


def dist_n(texts: Sequence[Tokens], n: int) -> float:
    """Distinct n-grams divided by total n-grams, pooled over all texts."""
    total = 0
    seen: set[tuple[str, ...]] = set()
    for text in texts:
        grams = ngrams(text, n)
        total += len(grams)
        seen.update(grams)
    return len(seen) / total if total else 0.0


def uniq_n(texts: Sequence[Tokens], n: int) -> int:
    """Count of distinct n-grams pooled over all texts."""
    seen: set[tuple[str, ...]] = set()
    for text in texts:
        seen.update(ngrams(text, n))
    return len(seen)


def rep_n(tokens: Tokens, n: int) -> float:
    """Fraction of repeated n-grams in one text: 1 - distinct/total.

    Texts shorter than n tokens have no n-grams and score 0.
    """
    grams = ngrams(tokens, n)
    if not grams:
        return 0.0
    return 1.0 - len(set(grams)) / len(grams)


def _closest_ref_length(hyp_len: int, ref_lens: Sequence[int]) -> int:
    # Ties between equally close reference lengths go to the shorter one.
    return min(ref_lens, key=lambda r: (abs(r - hyp_len), r))


def bleu_n(hypothesis: Tokens, references: Sequence[Tokens], max_n: int = 4) -> float:
    """Clipped n-gram precision BLEU with brevity penalty.

    Smoothing adds one to numerator and denominator only for orders above 1
    whose clipped count is zero; an order whose denominator is zero (the
    hypothesis is shorter than n) contributes precision 1.  A unigram
    precision of zero, or an empty hypothesis, scores 0.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    if not references:
        raise ValueError("bleu_n needs at least one reference")
    hyp_len = len(hypothesis)
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        hyp_grams = Counter(ngrams(hypothesis, n))
        denom = sum(hyp_grams.values())
        if denom == 0:
            continue  # precision 1, contributes log 0
        clipped = 0
        max_ref: Counter[tuple[str, ...]] = Counter()
        for ref in references:
            for gram, count in Counter(ngrams(ref, n)).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        for gram, count in hyp_grams.items():
            clipped += min(count, max_ref[gram])
        if clipped == 0:
            if n == 1:
                return 0.0
            precision = 1.0 / (denom + 1.0)
        else:
            precision = clipped / denom
        log_sum += math.log(precision)
    ref_len = _closest_ref_length(hyp_len, [len(r) for r in references])
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_sum / max_n)


def rouge_n(hypothesis: Tokens, reference: Tokens, n: int) -> tuple[float, float, float]:
    """Clipped n-gram overlap as (precision, recall, f1)."""
    hyp = Counter(ngrams(hypothesis, n))
    ref = Counter(ngrams(reference, n))
    overlap = sum(min(count, ref[gram]) for gram, count in hyp.items())
    hyp_total = sum(hyp.values())
    ref_total = sum(ref.values())
    p = overlap / hyp_total if hyp_total else 0.0
    r = overlap / ref_total if ref_total else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def _lcs_len(a: Tokens, b: Tokens) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def _split_sentences(tokens: Tokens) -> list[list[str]]:
    out: list[list[str]] = []
    cur: list[str] = []
    for tok in tokens:
        if tok == "\n":
            if cur:
                out.append(cur)
            cur = []
        else:
            cur.append(tok)
    if cur:
        out.append(cur)
    return out


def _lcs_positions(ref: Tokens, hyp: Tokens) -> set[int]:
    """Reference indices participating in one LCS of ref and hyp."""
    m, n = len(ref), len(hyp)
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if ref[i - 1] == hyp[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    hits: set[int] = set()
    i, j = m, n
    while i > 0 and j > 0:
        if ref[i - 1] == hyp[j - 1]:
            hits.add(i - 1)
            i -= 1
            j -= 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return hits


def rouge_l(hypothesis: Tokens, reference: Tokens) -> tuple[float, float, float]:
    """LCS-based (precision, recall, f1).

    When either side contains the sentence separator token "\\n", the
    union-LCS variant over sentences is used; otherwise the whole texts are
    matched as single sequences.
    """
    if "\n" in hypothesis or "\n" in reference:
        hyp_sents = _split_sentences(hypothesis)
        ref_sents = _split_sentences(reference)
        hit_total = 0
        for ref_sent in ref_sents:
            union: set[int] = set()
            for hyp_sent in hyp_sents:
                union |= _lcs_positions(ref_sent, hyp_sent)
            hit_total += len(union)
        hyp_total = sum(len(s) for s in hyp_sents)
        ref_total = sum(len(s) for s in ref_sents)
        lcs = hit_total
    else:
        lcs = _lcs_len(hypothesis, reference)
        hyp_total = len(hypothesis)
        ref_total = len(reference)
    p = lcs / hyp_total if hyp_total else 0.0
    r = lcs / ref_total if ref_total else 0.0
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f1


def coverage(hypothesis: Tokens, pieces: Sequence[Tokens]) -> float:
    """Fraction of pieces that appear as a contiguous subsequence.

    An empty piece list scores 1.
    """
    if not pieces:
        return 1.0
    hyp = list(hypothesis)
    hit = 0
    for piece in pieces:
        p = list(piece)
        if not p:
            hit += 1
            continue
        found = any(hyp[i : i + len(p)] == p for i in range(len(hyp) - len(p) + 1))
        hit += int(found)
    return hit / len(pieces)


def perplexity(logprobs: Sequence[float], token_counts: Sequence[int]) -> float:
    """exp of the negative mean per-token log probability, pooled."""
    total_tokens = sum(token_counts)
    if total_tokens <= 0:
        raise ValueError("perplexity needs at least one token")
    return math.exp(-sum(logprobs) / total_tokens)


@dataclass
class MetricReport:
    """Aggregated metric values plus the per-sample rows they came from."""

    values: dict[str, float] = field(default_factory=dict)
    per_sample: dict[str, list[float]] = field(default_factory=dict)
    samples: int = 0
