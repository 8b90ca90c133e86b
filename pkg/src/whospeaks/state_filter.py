"""Exact recursive filtering of the joint binary speaking-state vector.

The state of N tracked persons is a bitmask in [0, 2^N): bit n set means
person n speaks. Transitions factorize over persons, so prediction costs
O(2^N * N) per step instead of O(4^N); the posterior itself is kept exactly
over all 2^N configurations.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterConfig:
    q: float = 0.8           # self-transition prior for a visible person
    max_persons: int = 16    # guard against 2^N blow-up

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"q must be in [0, 1], got {self.q}")


@dataclass(frozen=True)
class StateConfig:
    """One speaking configuration: bits[n] = 1 iff person n speaks."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("bits must be binary")
        object.__setattr__(self, "bits", bits)

    @property
    def bitmask(self) -> int:
        return int(np.sum(self.bits.astype(np.int64) << np.arange(len(self.bits))))

    @classmethod
    def from_bitmask(cls, mask: int, n_persons: int) -> "StateConfig":
        return cls(bits=(mask >> np.arange(n_persons)) & 1)

    @property
    def speaker_ids(self) -> list[int]:
        return [int(n) for n in np.nonzero(self.bits)[0]]


@dataclass(frozen=True)
class FilterPosterior:
    """Filtering distribution over all 2^N configurations at one time index."""

    probs: np.ndarray
    t: int

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != 1 or (p.size & (p.size - 1)) != 0:
            raise ValueError("probs must have length 2^N")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probs must be a normalized distribution")
        object.__setattr__(self, "probs", p)

    @property
    def n_persons(self) -> int:
        return int(np.log2(self.probs.size))


def transition_prob(s_prev: int, s_cur: int, v_prev: int, v_cur: int, q: float) -> float:
    """Per-person speaking-state transition prior.

    Visible at both steps: stay with probability q, switch with 1 - q.
    Newly visible: either state with probability 1/2. Not visible now
    (regardless of before): silent with probability 1.
    """
    if v_cur == 0:
        return 1.0 if s_cur == 0 else 0.0
    if v_prev == 0:
        return 0.5
    return q if s_cur == s_prev else 1.0 - q


def transition_matrix(v_prev: int, v_cur: int, q: float) -> np.ndarray:
    """2x2 kernel, rows indexed by the previous state, columns by the next."""
    return np.array(
        [
            [transition_prob(0, 0, v_prev, v_cur, q), transition_prob(0, 1, v_prev, v_cur, q)],
            [transition_prob(1, 0, v_prev, v_cur, q), transition_prob(1, 1, v_prev, v_cur, q)],
        ]
    )


def bits_table(n_persons: int) -> np.ndarray:
    """(2^N, N) matrix: row s holds the bits of configuration s."""
    configs = np.arange(2 ** n_persons)
    return ((configs[:, None] >> np.arange(n_persons)[None, :]) & 1).astype(np.uint8)


def _apply_per_person(probs: np.ndarray, matrices: list[np.ndarray]) -> np.ndarray:
    """Contract a length-2^N vector with one 2x2 kernel per person."""
    n = len(matrices)
    arr = probs.reshape((2,) * n)
    for person, M in enumerate(matrices):
        axis = n - 1 - person  # row-major reshape: person n lives on axis N-1-n
        arr = np.moveaxis(np.tensordot(arr, M, axes=([axis], [0])), -1, axis)
    return arr.reshape(-1)


def predict(
    post_prev: FilterPosterior | np.ndarray,
    v_prev: np.ndarray,
    v_cur: np.ndarray,
    cfg: FilterConfig = FilterConfig(),
) -> np.ndarray:
    """One-step predictive distribution from the previous posterior."""
    probs = post_prev.probs if isinstance(post_prev, FilterPosterior) else np.asarray(post_prev)
    v_prev = np.asarray(v_prev, dtype=np.uint8)
    v_cur = np.asarray(v_cur, dtype=np.uint8)
    n = len(v_prev)
    if n > cfg.max_persons:
        raise ValueError(f"{n} persons exceeds max_persons={cfg.max_persons}")
    if probs.size != 2 ** n or len(v_cur) != n:
        raise ValueError("posterior size and visibility lengths disagree")
    mats = [transition_matrix(int(v_prev[i]), int(v_cur[i]), cfg.q) for i in range(n)]
    return _apply_per_person(probs, mats)


def config_likelihood(
    s: StateConfig | int, p_speak: np.ndarray, v_cur: np.ndarray
) -> float:
    """Observation likelihood of a single configuration.

    Visible persons contribute p_speak[n] or 1 - p_speak[n] depending on their
    bit; invisible persons contribute 1 unless their bit is set, which makes
    the configuration impossible.
    """
    v_cur = np.asarray(v_cur, dtype=np.uint8)
    bits = (
        s.bits
        if isinstance(s, StateConfig)
        else StateConfig.from_bitmask(int(s), len(v_cur)).bits
    )
    out = 1.0
    for n in range(len(v_cur)):
        if v_cur[n] == 0:
            if bits[n] == 1:
                return 0.0
            continue
        p = float(p_speak[n])
        out *= p if bits[n] == 1 else 1.0 - p
    return out


def likelihood_vector(p_speak: np.ndarray, v_cur: np.ndarray) -> np.ndarray:
    """config_likelihood evaluated for every bitmask at once."""
    v_cur = np.asarray(v_cur, dtype=np.uint8)
    n = len(v_cur)
    p = np.asarray(p_speak, dtype=np.float64)
    factors = np.empty((2, n))
    factors[0] = np.where(v_cur == 1, 1.0 - p, 1.0)
    factors[1] = np.where(v_cur == 1, p, 0.0)
    bits = bits_table(n)
    return np.prod(factors[bits, np.arange(n)], axis=1)


def update(predictive: np.ndarray, likelihoods: np.ndarray, t: int = 0) -> FilterPosterior:
    """Bayes update of the predictive distribution.

    A zero normalizer (no configuration carries any evidence) falls back to
    the predictive distribution so the recursion stays defined.
    """
    weighted = np.asarray(predictive) * np.asarray(likelihoods)
    norm = weighted.sum()
    if norm <= 0.0:
        log.warning("zero-evidence update at t=%d; keeping predictive", t)
        probs = np.asarray(predictive, dtype=np.float64)
        probs = probs / probs.sum()
    else:
        probs = weighted / norm
    return FilterPosterior(probs=probs, t=t)


def map_state(post: FilterPosterior) -> StateConfig:
    """Most probable configuration; ties break to the smallest bitmask."""
    best = int(np.argmax(post.probs))
    return StateConfig.from_bitmask(best, post.n_persons)


@dataclass(frozen=True)
class FilterTimeline:
    """Filter outputs for a whole sequence."""

    posteriors: np.ndarray    # (T, 2^N)
    map_bitmasks: np.ndarray  # (T,)
    marginals: np.ndarray     # (T, N) per-person speaking probability

    @property
    def n_frames(self) -> int:
        return self.posteriors.shape[0]

    def map_config(self, t: int) -> StateConfig:
        return StateConfig.from_bitmask(int(self.map_bitmasks[t]), self.marginals.shape[1])


def _uniform_valid(v: np.ndarray) -> np.ndarray:
    """Uniform distribution over configurations allowed by the visibility."""
    n = len(v)
    bits = bits_table(n)
    out = np.ones(2 ** n)
    for i in range(n):
        if v[i]:
            out *= 0.5
        else:
            out *= bits[:, i] == 0
    return out


def run_filter(
    obs_sequence: list[tuple[np.ndarray, np.ndarray]],
    cfg: FilterConfig = FilterConfig(),
) -> FilterTimeline:
    """Filter a sequence of (speaking probabilities, visibility) observations.

    The first step starts from a uniform prior over visibility-valid
    configurations and is immediately conditioned on the first observation;
    each later step chains predict and update. Per-person marginals sum the
    posterior over configurations with that person's bit set.
    """
    if not obs_sequence:
        raise ValueError("empty observation sequence")
    n = len(obs_sequence[0][1])
    if n > cfg.max_persons:
        raise ValueError(f"{n} persons exceeds max_persons={cfg.max_persons}")
    bits = bits_table(n)
    posteriors = np.zeros((len(obs_sequence), 2 ** n))
    maps = np.zeros(len(obs_sequence), dtype=np.int64)
    marginals = np.zeros((len(obs_sequence), n))
    prev_post: FilterPosterior | None = None
    prev_vis: np.ndarray | None = None
    for t, (p_speak, vis) in enumerate(obs_sequence):
        vis = np.asarray(vis, dtype=np.uint8)
        if len(vis) != n:
            raise ValueError(f"person count changed at t={t}")
        if prev_post is None:
            predictive = _uniform_valid(vis)
        else:
            predictive = predict(prev_post, prev_vis, vis, cfg)
        post = update(predictive, likelihood_vector(p_speak, vis), t=t)
        posteriors[t] = post.probs
        maps[t] = map_state(post).bitmask
        marginals[t] = post.probs @ bits
        prev_post, prev_vis = post, vis
    return FilterTimeline(posteriors=posteriors, map_bitmasks=maps, marginals=marginals)
