"""The enhance stage: reshaping next-token probabilities around typical-token sets.

A typical set is a group of token ids treated as one unit.  Its total mass
p_T is rescaled to

    p*_T = p_T ** h(gamma) * (1 - p_F) ** (1 - h(gamma)),   h(gamma) = tan(pi * gamma / 2)

where p_F is the mass already frozen by earlier applications.  gamma below
0.5 amplifies the group, 0.5 is the identity, above 0.5 suppresses it.
Members share a single scale factor so their relative ratios survive, frozen
entries are untouched, and the complement absorbs the mass difference
proportionally, keeping the vector normalized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import chain
from typing import Collection, Iterable, Sequence

import numpy as np

from .corpus import Vocabulary
from .dist import ProbDist
from .embeddings import EmbeddingTable, average_embedding, cosine_to_all, nearest

# Complements thinner than float resolution cannot absorb redistributed mass;
# such calls take the degenerate no-complement path.
_MIN_COMPLEMENT = 1e-15

DEFAULT_TERMINAL_MARKS = (".", "!", "?")


@dataclass(frozen=True)
class GammaParams:
    """Per-set gamma knobs: rep for seen tokens, topic for theme, sentence for terminals."""

    rep: float = 0.99
    topic: float = 0.4
    sentence: float = 0.9

    def __post_init__(self) -> None:
        for name in ("rep", "topic", "sentence"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v!r}")


@dataclass(frozen=True)
class SimiParams:
    """Similarity bump strength and the neighbour count for theme expansion."""

    lam: float = 0.0005
    top_n: int = 300

    def __post_init__(self) -> None:
        # lam = 0 is allowed and makes the bump a no-op.
        if self.lam < 0.0:
            raise ValueError(f"lam must be >= 0, got {self.lam!r}")
        if self.top_n < 1:
            raise ValueError(f"top_n must be >= 1, got {self.top_n}")


@dataclass(frozen=True)
class TypicalSets:
    """The three token groups a decoding step may reshape."""

    theme: frozenset[int] = frozenset()
    terminal: frozenset[int] = frozenset()
    repeated: frozenset[int] = frozenset()


def activation(gamma: float) -> float:
    """h(gamma) = tan(pi * gamma / 2) on (0, 1); h(0.5) is exactly 1."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma!r}")
    if gamma == 0.5:
        return 1.0
    return math.tan(math.pi * gamma / 2.0)


def _index_array(ids) -> np.ndarray:
    if isinstance(ids, np.ndarray):
        return ids.astype(np.intp, copy=False)
    if not ids:
        return np.empty(0, dtype=np.intp)
    return np.fromiter(sorted(ids), dtype=np.intp, count=len(ids))


def gamma_transform(
    dist: ProbDist,
    typical: Collection[int] | np.ndarray,
    frozen: Collection[int] | np.ndarray = frozenset(),
    gamma: float = 0.5,
    mode: str = "proportional",
) -> tuple[ProbDist, frozenset[int]]:
    """Rescale the typical group's mass; return the result and the grown frozen set.

    Frozen entries are preserved bit-identically.  When the typical group has
    zero mass the call is a no-op.  When no complement exists to absorb the
    difference, the typical block is renormalized back so unfrozen mass is
    conserved (an identity up to roundoff).

    mode "proportional" (default) spreads the mass difference over the
    complement in proportion to current probabilities, which conserves mass
    exactly.  mode "additive" applies a constant per-token shift instead;
    that reading does not conserve mass, so the result is floored at zero and
    renormalized.  It is kept for comparison only.
    """
    t_idx = _index_array(typical)
    f_idx = _index_array(frozen)
    if t_idx.size and f_idx.size and not frozenset(t_idx.tolist()).isdisjoint(f_idx.tolist()):
        raise ValueError("typical and frozen sets overlap")
    if isinstance(frozen, frozenset):
        new_frozen = frozen.union(int(i) for i in t_idx)
    else:
        new_frozen = frozenset(int(i) for i in f_idx) | frozenset(int(i) for i in t_idx)

    p = dist.probs
    p_typ = float(p[t_idx].sum()) if t_idx.size else 0.0
    if p_typ <= 0.0:
        return dist, new_frozen

    h = activation(gamma)
    p_frz = float(p[f_idx].sum()) if f_idx.size else 0.0
    p_comp = float(p.sum()) - p_typ - p_frz
    p_star = p_typ**h * (1.0 - p_frz) ** (1.0 - h)
    scale_typ = p_star / p_typ

    if p_comp > _MIN_COMPLEMENT:
        if mode == "proportional":
            factor = np.full(p.size, 1.0 + (p_typ - p_star) / p_comp)
            factor[t_idx] = scale_typ
            if f_idx.size:
                factor[f_idx] = 1.0
            out = p * factor
        elif mode == "additive":
            out = p.copy()
            out[t_idx] *= scale_typ
            comp_mask = np.ones(p.size, dtype=bool)
            comp_mask[t_idx] = False
            if f_idx.size:
                comp_mask[f_idx] = False
            out[comp_mask] = np.maximum(out[comp_mask] + (p_typ - p_star) / p_comp, 0.0)
            out = out / out.sum()
        else:
            raise ValueError(f"unknown redistribution mode: {mode!r}")
    else:
        # Everything outside F lies in the typical group; rescale it back to
        # the unfrozen mass.
        out = p.copy()
        out[t_idx] *= scale_typ * ((1.0 - p_frz) / p_star)
    return ProbDist._wrap(out), new_frozen


def build_theme_set(
    input_pieces: Sequence[Sequence[int]],
    mode: str = "verbatim",
    table: EmbeddingTable | None = None,
    top_n: int = 0,
    exclude: Iterable[int] = (),
) -> frozenset[int]:
    """Token ids the theme transform should favor.

    "verbatim" is the union of the piece tokens.  "simi" additionally pulls,
    for every piece, the top_n tokens nearest to that piece's mean embedding
    (the piece's own tokens and the exclude list never qualify).
    """
    if not input_pieces:
        raise ValueError("input_pieces is empty")
    theme = set(chain.from_iterable(input_pieces))
    if mode == "verbatim":
        return frozenset(theme)
    if mode != "simi":
        raise ValueError(f"unknown theme mode: {mode!r}")
    if table is None:
        raise ValueError("simi theme construction needs an embedding table")
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    banned = set(int(i) for i in exclude)
    for piece in input_pieces:
        if not piece:
            continue
        query = average_embedding(list(piece), table)
        for tid, _sim in nearest(table, query, min(top_n, len(table)), exclude=banned | set(piece)):
            theme.add(tid)
    return frozenset(theme)


def build_terminal_set(vocab: Vocabulary, extra_marks: Iterable[str] = ()) -> frozenset[int]:
    """EOS plus whatever sentence-final marks exist in the vocabulary."""
    ids = {vocab.eos_id}
    for mark in chain(DEFAULT_TERMINAL_MARKS, extra_marks):
        if mark in vocab:
            ids.add(vocab.id_of(mark))
    return frozenset(ids)


def build_repeated_set(emitted: Iterable[int]) -> frozenset[int]:
    """Distinct token ids generated so far."""
    return frozenset(int(i) for i in emitted)


def enhance_step(
    dist: ProbDist,
    sets: TypicalSets,
    params: GammaParams,
    order: Sequence[str] = ("repeated", "theme", "terminal"),
    mode: str = "proportional",
) -> ProbDist:
    """Apply the per-set gamma transforms in order, threading the frozen set.

    The first application wins where sets overlap: later sets are pruned of
    already-frozen ids.  Empty sets are skipped implicitly (zero mass).
    """
    groups = {"repeated": sets.repeated, "theme": sets.theme, "terminal": sets.terminal}
    gammas = {"repeated": params.rep, "theme": params.topic, "terminal": params.sentence}
    if set(order) != set(groups):
        raise ValueError(f"order must be a permutation of {tuple(groups)}, got {tuple(order)!r}")
    out = dist
    frozen: frozenset[int] = frozenset()
    for name in order:
        out, frozen = gamma_transform(out, groups[name] - frozen, frozen, gammas[name], mode)
    return out


def simi_enhance(
    dist: ProbDist,
    theme: Collection[int],
    piece_embedding: np.ndarray,
    table: EmbeddingTable,
    params: SimiParams,
) -> ProbDist:
    """Additive theme bump: weight_i += lam * cos(piece_embedding, vec_i).

    Applied to theme members only, floored at zero, then renormalized; the
    renormalization preserves relative ratios among non-theme tokens.
    """
    ids = _index_array(theme)
    if not ids.size:
        raise ValueError("theme set is empty")
    sims = cosine_to_all(table, piece_embedding)[ids]
    w = dist.probs.copy()
    w[ids] = np.maximum(w[ids] + params.lam * sims, 0.0)
    total = float(w.sum())
    if total <= 0.0:
        # The bump erased the entire support; treat as a no-op.
        return dist
    return ProbDist._wrap(w / total)
