"""The filter stage: keep tokens whose information content sits near the entropy.

For a distribution q, token i survives when |Ent(q) - I(i)| <= epsilon with
I(i) = -ln q(i).  Out-of-band tokens are zeroed and the survivors are
renormalized.  Saturating epsilon recovers plain sampling; epsilon = 0 keeps
only tokens whose probability equals e^{-Ent(q)}.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dist import ProbDist, entropy

# Absolute slack on the band comparison so exactly-typical tokens (uniform
# distributions, epsilon = 0) are not lost to float roundoff.
_BAND_SLACK = 1e-12


@dataclass(frozen=True)
class FilterParams:
    epsilon: float = 0.1

    def __post_init__(self) -> None:
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon!r}")


def survivor_mask(dist: ProbDist, params: FilterParams) -> np.ndarray:
    """Boolean mask of in-band tokens; zero-probability tokens never pass."""
    p = dist.probs
    ent = entropy(dist)
    with np.errstate(divide="ignore"):
        info = -np.log(p)
    return (p > 0.0) & (np.abs(ent - info) <= params.epsilon + _BAND_SLACK)


def passes(dist: ProbDist, token: int, params: FilterParams) -> bool:
    """Whether a single token lies inside the information band."""
    if not 0 <= token < dist.probs.size:
        raise ValueError(f"token id {token} outside the distribution")
    return bool(survivor_mask(dist, params)[token])


def filter_dist(dist: ProbDist, params: FilterParams) -> ProbDist:
    """Zero out-of-band tokens and renormalize the survivors.

    When every supported token is in band the input is returned unchanged
    (bit-identical).  When none survives, the single nearest-to-band token
    (ties to the lowest id) is kept with probability 1 rather than emitting
    an invalid vector.
    """
    mask = survivor_mask(dist, params)
    p = dist.probs
    if mask.sum() == dist.support_size():
        return dist
    if not mask.any():
        ent = entropy(dist)
        with np.errstate(divide="ignore"):
            gap = np.where(p > 0.0, np.abs(ent + np.log(p)), np.inf)
        out = np.zeros_like(p)
        out[int(np.argmin(gap))] = 1.0
        return ProbDist._wrap(out)
    kept = np.where(mask, p, 0.0)
    return ProbDist._wrap(kept / kept.sum())
