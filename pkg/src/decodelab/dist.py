"""Probability vectors and the numeric primitives shared by every decoder stage.

All decoding transforms consume and produce :class:`ProbDist` values, so the
invariants (nonnegative float64 entries in [0, 1], unit sum) are checked in one
place and everything downstream can rely on them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SUM_TOL = 1e-9


class InvalidDistribution(ValueError):
    """A vector that cannot be read as a probability distribution."""


class ProbDist:
    """An immutable, normalized probability vector over token ids.

    Index i holds the probability of token id i.  Entries are float64 in
    [0, 1] and sum to 1 within ``SUM_TOL``.  Transforms never mutate an
    instance; they return new ones.
    """

    __slots__ = ("probs",)

    def __init__(self, probs) -> None:
        p = np.array(probs, dtype=np.float64)
        if p.ndim != 1 or p.size == 0:
            raise InvalidDistribution("expected a nonempty 1-d vector")
        if not np.all(np.isfinite(p)):
            raise InvalidDistribution("non-finite entry")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise InvalidDistribution("entries must lie in [0, 1]")
        total = float(p.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidDistribution(f"entries sum to {total!r}, not 1")
        p.flags.writeable = False
        self.probs = p

    @classmethod
    def _wrap(cls, p: np.ndarray) -> "ProbDist":
        # Trusted path for transforms that preserve the invariants by
        # construction; skips validation so the per-step pipeline stays cheap.
        obj = object.__new__(cls)
        p.flags.writeable = False
        obj.probs = p
        return obj

    def __len__(self) -> int:
        return self.probs.size

    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs))

    def __repr__(self) -> str:
        body = np.array2string(self.probs, precision=4, threshold=8)
        return f"ProbDist({body})"


@dataclass(frozen=True)
class ExtremenessPolicy:
    """Clamp bounds for near-0/near-1 probabilities.

    Values in (0, threshold) are raised to threshold and values above
    1 - threshold are lowered to it; exact zeros are left alone so pruned
    tokens stay pruned.
    """

    threshold: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 0.5:
            raise ValueError(f"threshold must lie in (0, 0.5), got {self.threshold!r}")


def normalize(weights) -> ProbDist:
    """Scale nonnegative weights to a distribution; zero entries stay zero."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InvalidDistribution("expected a nonempty 1-d vector")
    if not np.all(np.isfinite(w)):
        raise InvalidDistribution("non-finite weight")
    if np.any(w < 0.0):
        raise InvalidDistribution("negative weight")
    total = float(w.sum())
    if total <= 0.0:
        raise InvalidDistribution("weights sum to zero, nothing to normalize")
    return ProbDist._wrap(w / total)


def clamp_extremes(dist: ProbDist, policy: ExtremenessPolicy = ExtremenessPolicy()) -> ProbDist:
    """Pull extreme entries toward the interior, then renormalize once.

    Entries in (0, threshold) become threshold, entries above 1 - threshold
    become 1 - threshold, exact zeros are preserved.  Returns the input
    object unchanged when nothing is clamped, so repeated application is a
    fixed point.
    """
    p = dist.probs
    t = policy.threshold
    low = (p > 0.0) & (p < t)
    high = p > 1.0 - t
    if not low.any() and not high.any():
        return dist
    w = p.copy()
    w[low] = t
    w[high] = 1.0 - t
    return ProbDist._wrap(w / w.sum())


def entropy(dist: ProbDist) -> float:
    """Shannon entropy -sum(p * ln p) in nats, with 0 * ln 0 read as 0."""
    p = dist.probs
    m = p > 0.0
    return float(-(p[m] * np.log(p[m])).sum())


def information(dist: ProbDist, token: int) -> float:
    """Information content -ln p(token) in nats."""
    if not 0 <= token < dist.probs.size:
        raise ValueError(f"token id {token} outside the distribution")
    p = float(dist.probs[token])
    if p <= 0.0:
        raise ValueError(f"token id {token} has zero probability; information undefined")
    return -math.log(p)
