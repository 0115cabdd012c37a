"""Decoding strategies: greedy, beam, temperature, top-k, nucleus, gamma sampling,
and the two-stage enhance-then-filter samplers.

Every strategy consumes a language model through the same interface (a
vocabulary plus ``next_distribution``) and is fully deterministic given the
model and a :class:`DecodeConfig`, including its seed.  Sampling strategies
draw exactly one uniform variate per emitted token from a SplitMix64 stream,
so a longer generation extends a shorter one with the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Protocol, Sequence

import math

import numpy as np

from .corpus import Vocabulary
from .dist import ExtremenessPolicy, ProbDist, clamp_extremes, entropy
from .embeddings import EmbeddingTable, average_embedding
from .enhance import (
    GammaParams,
    SimiParams,
    TypicalSets,
    build_terminal_set,
    build_theme_set,
    enhance_step,
    gamma_transform,
    simi_enhance,
)
from .info_filter import FilterParams, filter_dist, survivor_mask
from .rng import SplitMix64

STRATEGIES = ("greedy", "beam", "temperature", "top_k", "nucleus", "gamma", "ifdid", "ifdid_simi")
_GAMMA_FAMILY = ("gamma", "ifdid", "ifdid_simi")


class LanguageModel(Protocol):
    """What a decoder needs from a model: a vocabulary and next-token distributions."""

    vocab: Vocabulary

    def next_distribution(self, context: Sequence[int]) -> ProbDist: ...


class StepDiag(NamedTuple):
    """Per-step diagnostics.

    entropy and info are measured on the distribution the strategy scored:
    the raw model distribution for greedy/top-k/nucleus/beam, the flattened
    one for temperature, and the enhanced pre-filter one for the two-stage
    strategies.  survivors is the candidate count of the final draw."""

    entropy: float
    info: float
    survivors: int


@dataclass
class DecodeRecord:
    """One finished generation: emitted ids (EOS excluded), aligned per-step
    diagnostics, and why decoding stopped ("eos" or "max_length")."""

    tokens: list[int]
    steps: list[StepDiag]
    termination: str


@dataclass
class DecodeConfig:
    strategy: str
    max_length: int = 64
    seed: int = 0
    prompt: Sequence[int] = ()
    input_pieces: Sequence[Sequence[int]] = ()
    temperature: float = 0.5
    k: int = 5
    p: float = 0.3
    beam_size: int = 5
    no_repeat_ngram_n: int = 3  # 0 disables n-gram blocking
    gamma: GammaParams = field(default_factory=GammaParams)
    filter: FilterParams = field(default_factory=FilterParams)
    simi: SimiParams = field(default_factory=SimiParams)
    extremeness: ExtremenessPolicy = field(default_factory=ExtremenessPolicy)
    # None picks the strategy default: extremeness clamping on for the gamma
    # family (whose transforms assume probabilities away from 0 and 1), off
    # for the classical baselines.
    clamp: bool | None = None
    survivor_sampling: str = "proportional"  # or "uniform"
    theme_mode: str = "verbatim"  # "simi" expands the theme with near neighbours
    terminal_extra: Sequence[str] = ()
    redistribution: str = "proportional"  # "additive" keeps the constant-shift variant

    def clamp_enabled(self) -> bool:
        if self.clamp is not None:
            return self.clamp
        return self.strategy in _GAMMA_FAMILY


def _validate(cfg: DecodeConfig, vocab_size: int) -> None:
    if cfg.strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {cfg.strategy!r}; expected one of {STRATEGIES}")
    if cfg.max_length < 1:
        raise ValueError(f"max_length must be >= 1, got {cfg.max_length}")
    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool):
        raise ValueError("seed must be an int")
    if cfg.strategy == "temperature" and not cfg.temperature > 0.0:
        raise ValueError(f"temperature must be positive, got {cfg.temperature!r}")
    if cfg.strategy == "top_k" and not 1 <= cfg.k <= vocab_size:
        raise ValueError(f"k must lie in [1, {vocab_size}], got {cfg.k}")
    if cfg.strategy == "nucleus" and not 0.0 < cfg.p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {cfg.p!r}")
    if cfg.strategy == "beam":
        if cfg.beam_size < 1:
            raise ValueError(f"beam_size must be >= 1, got {cfg.beam_size}")
        if cfg.no_repeat_ngram_n < 0:
            raise ValueError(f"no_repeat_ngram_n must be >= 0, got {cfg.no_repeat_ngram_n}")
    if cfg.survivor_sampling not in ("proportional", "uniform"):
        raise ValueError(f"survivor_sampling must be 'proportional' or 'uniform', got {cfg.survivor_sampling!r}")
    if cfg.theme_mode not in ("verbatim", "simi"):
        raise ValueError(f"theme_mode must be 'verbatim' or 'simi', got {cfg.theme_mode!r}")
    if cfg.redistribution not in ("proportional", "additive"):
        raise ValueError(f"redistribution must be 'proportional' or 'additive', got {cfg.redistribution!r}")


def _draw_index(weights: np.ndarray, rng: SplitMix64) -> int:
    """Index into weights, chosen proportionally using one uniform draw."""
    c = np.cumsum(weights)
    return int(np.searchsorted(c, rng.random() * c[-1], side="right"))


def _info_of(dist: ProbDist, token: int) -> float:
    return -math.log(float(dist.probs[token]))


# -- per-distribution transforms shared by the step API and the decode loop --


def _prep_temperature(dist: ProbDist, temperature: float) -> ProbDist:
    w = dist.probs ** (1.0 / temperature)
    return ProbDist._wrap(w / w.sum())


def _prep_topk(dist: ProbDist, k: int) -> tuple[np.ndarray, np.ndarray]:
    keep = min(k, dist.probs.size)
    ids = np.argsort(-dist.probs, kind="stable")[:keep]
    return ids, dist.probs[ids]


def _prep_nucleus(dist: ProbDist, p: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-dist.probs, kind="stable")
    cum = np.cumsum(dist.probs[order])
    cut = min(int(np.searchsorted(cum, p, side="left")) + 1, order.size)
    ids = order[:cut]
    return ids, dist.probs[ids]


def _gamma_dist(
    dist: ProbDist,
    sets: TypicalSets,
    params: GammaParams,
    policy: ExtremenessPolicy,
    mode: str = "proportional",
) -> ProbDist:
    return enhance_step(clamp_extremes(dist, policy), sets, params, mode=mode)


def _ifdid_simi_dist(
    dist: ProbDist,
    sets: TypicalSets,
    piece_embedding: np.ndarray | None,
    table: EmbeddingTable | None,
    gamma_params: GammaParams,
    simi_params: SimiParams,
    policy: ExtremenessPolicy,
    mode: str = "proportional",
) -> ProbDist:
    """The similarity variant of the enhance stage: the theme transform is
    replaced by an embedding-similarity bump between the repeated and
    terminal transforms."""
    d, frozen = gamma_transform(clamp_extremes(dist, policy), sets.repeated, frozenset(), gamma_params.rep, mode)
    theme = sets.theme - frozen
    if theme and piece_embedding is not None:
        if table is None:
            raise ValueError("similarity enhancement needs an embedding table")
        d = simi_enhance(d, theme, piece_embedding, table, simi_params)
    d, frozen = gamma_transform(d, sets.terminal - frozen, frozen, gamma_params.sentence, mode)
    return d


# -- single-step selection rules (the public, per-distribution surface) ------


def step_greedy(dist: ProbDist) -> int:
    """Highest-probability token, ties to the lowest id."""
    return int(np.argmax(dist.probs))


def step_temperature(dist: ProbDist, t: float, rng: SplitMix64) -> int:
    """Sample from q ** (1/t), renormalized."""
    if not t > 0.0:
        raise ValueError(f"temperature must be positive, got {t!r}")
    return int(_draw_index(_prep_temperature(dist, t).probs, rng))


def step_topk(dist: ProbDist, k: int, rng: SplitMix64) -> int:
    """Sample among the k most probable tokens (ties to the lowest id)."""
    if not 1 <= k <= len(dist):
        raise ValueError(f"k must lie in [1, {len(dist)}], got {k}")
    ids, w = _prep_topk(dist, k)
    return int(ids[_draw_index(w, rng)])


def step_nucleus(dist: ProbDist, p: float, rng: SplitMix64) -> int:
    """Sample inside the smallest prefix of the sorted probabilities whose
    cumulative mass reaches p."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p!r}")
    ids, w = _prep_nucleus(dist, p)
    return int(ids[_draw_index(w, rng)])


def step_gamma(
    dist: ProbDist,
    sets: TypicalSets,
    gamma_params: GammaParams,
    rng: SplitMix64,
    policy: ExtremenessPolicy = ExtremenessPolicy(),
    mode: str = "proportional",
) -> int:
    """Clamp extremes, apply the three typical-set transforms, sample."""
    return int(_draw_index(_gamma_dist(dist, sets, gamma_params, policy, mode).probs, rng))


def step_ifdid(
    dist: ProbDist,
    sets: TypicalSets,
    gamma_params: GammaParams,
    filter_params: FilterParams,
    rng: SplitMix64,
    policy: ExtremenessPolicy = ExtremenessPolicy(),
    mode: str = "proportional",
) -> int:
    """Clamp, enhance, keep the information band, sample proportionally."""
    d = _gamma_dist(dist, sets, gamma_params, policy, mode)
    return int(_draw_index(filter_dist(d, filter_params).probs, rng))


def step_ifdid_simi(
    dist: ProbDist,
    sets: TypicalSets,
    piece_embedding: np.ndarray,
    table: EmbeddingTable,
    gamma_params: GammaParams,
    simi_params: SimiParams,
    filter_params: FilterParams,
    rng: SplitMix64,
    policy: ExtremenessPolicy = ExtremenessPolicy(),
    mode: str = "proportional",
) -> int:
    """Clamp, crush repeats, bump theme tokens by embedding similarity,
    damp terminals, filter, sample proportionally."""
    d = _ifdid_simi_dist(dist, sets, piece_embedding, table, gamma_params, simi_params, policy, mode)
    return int(_draw_index(filter_dist(d, filter_params).probs, rng))


# -- full-sequence decoding ---------------------------------------------------


class _SetBuilder:
    """Per-decode state for the gamma-family strategies."""

    def __init__(self, lm: LanguageModel, cfg: DecodeConfig, table: EmbeddingTable | None) -> None:
        vocab = lm.vocab
        self.terminal = build_terminal_set(vocab, cfg.terminal_extra)
        pieces = [list(piece) for piece in cfg.input_pieces if piece]
        mode = "simi" if cfg.strategy == "ifdid_simi" else cfg.theme_mode
        if pieces:
            exclude = {vocab.bos_id, vocab.eos_id, vocab.unk_id} | self.terminal
            self.theme = build_theme_set(pieces, mode, table, cfg.simi.top_n, exclude)
        else:
            self.theme = frozenset()
        self.piece_embedding = None
        if cfg.strategy == "ifdid_simi" and pieces:
            if table is None:
                raise ValueError("ifdid_simi needs an embedding table")
            flat = [tid for piece in pieces for tid in piece]
            self.piece_embedding = average_embedding(flat, table)
        self.seen: set[int] = set()

    def sets(self) -> TypicalSets:
        return TypicalSets(theme=self.theme, terminal=self.terminal, repeated=frozenset(self.seen))


def _step_token(
    q: ProbDist,
    cfg: DecodeConfig,
    rng: SplitMix64,
    state: _SetBuilder | None,
    table: EmbeddingTable | None,
) -> tuple[int, StepDiag]:
    s = cfg.strategy
    if s == "greedy":
        tok = step_greedy(q)
        return tok, StepDiag(entropy(q), _info_of(q, tok), 1)
    if s == "temperature":
        d = _prep_temperature(q, cfg.temperature)
        tok = int(_draw_index(d.probs, rng))
        return tok, StepDiag(entropy(d), _info_of(d, tok), d.support_size())
    if s == "top_k":
        ids, w = _prep_topk(q, cfg.k)
        tok = int(ids[_draw_index(w, rng)])
        return tok, StepDiag(entropy(q), _info_of(q, tok), ids.size)
    if s == "nucleus":
        ids, w = _prep_nucleus(q, cfg.p)
        tok = int(ids[_draw_index(w, rng)])
        return tok, StepDiag(entropy(q), _info_of(q, tok), ids.size)

    assert state is not None
    base = clamp_extremes(q, cfg.extremeness) if cfg.clamp_enabled() else q
    if s == "gamma":
        d = enhance_step(base, state.sets(), cfg.gamma, mode=cfg.redistribution)
        tok = int(_draw_index(d.probs, rng))
        return tok, StepDiag(entropy(d), _info_of(d, tok), d.support_size())

    if s == "ifdid":
        d = enhance_step(base, state.sets(), cfg.gamma, mode=cfg.redistribution)
    else:  # ifdid_simi: similarity bump replaces the theme gamma transform
        d, frozen = gamma_transform(base, frozenset(state.seen), frozenset(), cfg.gamma.rep, cfg.redistribution)
        theme = state.theme - frozen
        if theme and state.piece_embedding is not None:
            d = simi_enhance(d, theme, state.piece_embedding, table, cfg.simi)
        d, frozen = gamma_transform(d, state.terminal - frozen, frozen, cfg.gamma.sentence, cfg.redistribution)

    mask = survivor_mask(d, cfg.filter)
    filtered = filter_dist(d, cfg.filter)
    survivors = int(mask.sum()) if mask.any() else 1
    if cfg.survivor_sampling == "proportional":
        tok = int(_draw_index(filtered.probs, rng))
    else:
        ids = np.flatnonzero(filtered.probs)
        tok = int(ids[int(rng.random() * ids.size)])
    # Diagnostics are measured on the pre-filter distribution: that is the one
    # whose entropy defines the band.
    return tok, StepDiag(entropy(d), _info_of(d, tok), survivors)


def decode(lm: LanguageModel, cfg: DecodeConfig, table: EmbeddingTable | None = None) -> DecodeRecord:
    """Generate until EOS or max_length under the configured strategy.

    The emitted sequence excludes EOS; sampling EOS stops decoding with
    termination "eos".  Parameter problems raise ValueError before any
    generation happens.
    """
    _validate(cfg, len(lm.vocab))
    if cfg.strategy == "beam":
        return beam_decode(lm, cfg)
    needs_sets = cfg.strategy in _GAMMA_FAMILY
    if needs_sets and cfg.theme_mode == "simi" and table is None:
        raise ValueError("simi theme construction needs an embedding table")
    if cfg.strategy == "ifdid_simi" and table is None:
        raise ValueError("ifdid_simi needs an embedding table")

    vocab = lm.vocab
    rng = SplitMix64(cfg.seed)
    state = _SetBuilder(lm, cfg, table) if needs_sets else None
    context = list(cfg.prompt)
    tokens: list[int] = []
    steps: list[StepDiag] = []
    termination = "max_length"
    for _ in range(cfg.max_length):
        q = lm.next_distribution(context)
        tok, diag = _step_token(q, cfg, rng, state, table)
        if tok == vocab.eos_id:
            termination = "eos"
            break
        tokens.append(tok)
        steps.append(diag)
        context.append(tok)
        if state is not None:
            state.seen.add(tok)
    return DecodeRecord(tokens=tokens, steps=steps, termination=termination)


# -- beam search --------------------------------------------------------------


@dataclass
class _Hypothesis:
    tokens: tuple[int, ...]
    logprob: float
    ngrams: frozenset[tuple[int, ...]]


def _forbidden_successors(tokens: tuple[int, ...], ngrams: frozenset[tuple[int, ...]], n: int) -> set[int]:
    if n == 0 or len(tokens) < n - 1:
        return set()
    prefix = tokens[len(tokens) - (n - 1) :]
    return {g[-1] for g in ngrams if g[:-1] == prefix}


def beam_decode(lm: LanguageModel, cfg: DecodeConfig) -> DecodeRecord:
    """Length-normalized beam search with optional repeated-n-gram blocking.

    A candidate that would repeat an n-gram already present in its own
    generated sequence scores -inf.  Final ranking uses logprob divided by
    emitted length; exact ties go to the lexicographically smallest token
    sequence.  Completed (EOS) hypotheses outrank unfinished ones.  Per-step
    diagnostics are reconstructed for the winning sequence from the raw
    model distributions.
    """
    _validate(cfg, len(lm.vocab))
    vocab = lm.vocab
    eos = vocab.eos_id
    n_block = cfg.no_repeat_ngram_n
    prompt = list(cfg.prompt)

    live = [_Hypothesis(tokens=(), logprob=0.0, ngrams=frozenset())]
    completed: list[tuple[float, tuple[int, ...]]] = []  # (length-normalized score, tokens)

    for _ in range(cfg.max_length):
        candidates: list[tuple[float, tuple[int, ...], _Hypothesis, int]] = []
        for hyp in live:
            q = lm.next_distribution(prompt + list(hyp.tokens))
            with np.errstate(divide="ignore"):
                logq = np.log(q.probs)
            for tok in _forbidden_successors(hyp.tokens, hyp.ngrams, n_block):
                logq[tok] = -np.inf
            order = np.argsort(-logq, kind="stable")[: cfg.beam_size]
            for tok in order:
                tok = int(tok)
                score = hyp.logprob + float(logq[tok])
                candidates.append((score, hyp.tokens + (tok,), hyp, tok))
        candidates.sort(key=lambda c: (-c[0], c[1]))

        next_live: list[_Hypothesis] = []
        for score, seq, hyp, tok in candidates:
            if len(next_live) == cfg.beam_size:
                break
            if score == -np.inf:
                continue
            if tok == eos:
                completed.append((score / len(seq), hyp.tokens))
                continue
            grams = hyp.ngrams
            if n_block > 0 and len(seq) >= n_block:
                grams = grams | {seq[-n_block:]}
            next_live.append(_Hypothesis(tokens=seq, logprob=score, ngrams=grams))
        live = next_live
        if not live:
            break

    if completed:
        pool = [(norm, toks, "eos") for norm, toks in completed]
    else:
        pool = [(h.logprob / max(len(h.tokens), 1), h.tokens, "max_length") for h in live]
    if not pool:
        return DecodeRecord(tokens=[], steps=[], termination="max_length")
    pool.sort(key=lambda item: (-item[0], item[1]))
    _score, best, termination = pool[0]

    steps: list[StepDiag] = []
    context = list(prompt)
    for tok in best:
        q = lm.next_distribution(context)
        steps.append(StepDiag(entropy(q), _info_of(q, tok), q.support_size()))
        context.append(tok)
    return DecodeRecord(tokens=list(best), steps=steps, termination=termination)
