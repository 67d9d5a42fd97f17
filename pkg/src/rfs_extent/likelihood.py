"""Extended multi-target measurement likelihood.

Measurement groups are tuples of measurement indices into a scan ``Z``
(an ``(n, d)`` array).  A partition is a canonical tuple of such groups.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .ggiw import GGIWMixture, GGIWParams, GroupStats, misdetect_mixture, update_mixture_stats

MISDETECT = -1
LOG_KAPPA_FLOOR = -700.0


@dataclass(frozen=True, eq=False)
class ClutterModel:
    """Poisson clutter, uniform over an axis-aligned box."""

    rate: float
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if self.rate < 0:
            raise ValueError("clutter rate must be non-negative")
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ValueError("clutter region must have positive volume")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def log_intensity(self) -> float:
        """Log clutter intensity inside the region (``-inf`` for zero rate)."""
        return math.log(self.rate / self.volume) if self.rate > 0 else -math.inf

    @property
    def log_intensity_floor(self) -> float:
        """Log intensity floored at ``LOG_KAPPA_FLOOR``; keeps clutter-free ratios finite."""
        return max(self.log_intensity, LOG_KAPPA_FLOOR)

    def contains(self, Z) -> np.ndarray:
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.size == 0:
            return np.zeros(0, dtype=bool)
        return np.all((Z >= self.lower) & (Z <= self.upper), axis=1)


@dataclass(frozen=True)
class Partition:
    """Disjoint non-empty groups of measurement indices covering a scan."""

    groups: tuple

    @classmethod
    def of(cls, groups) -> "Partition":
        canon = tuple(sorted(tuple(sorted(int(i) for i in g)) for g in groups))
        return cls(canon)

    @classmethod
    def from_labels(cls, assignment) -> "Partition":
        """Build from a cluster id per measurement."""
        buckets: dict = {}
        for i, c in enumerate(assignment):
            buckets.setdefault(c, []).append(i)
        return cls.of(buckets.values())

    def __len__(self):
        return len(self.groups)

    def validate(self, n: int) -> "Partition":
        seen = [i for g in self.groups for i in g]
        if any(len(g) == 0 for g in self.groups):
            raise ValueError("empty group")
        if sorted(seen) != list(range(n)):
            raise ValueError("groups must be disjoint and cover the scan")
        return self


def set_partitions(n: int) -> Iterator[Partition]:
    """All partitions of ``range(n)`` (Bell(n) of them), via restricted growth strings."""
    if n == 0:
        yield Partition(())
        return
    a = [0] * n

    def rec(i, top):
        if i == n:
            yield Partition.from_labels(a)
            return
        for c in range(top + 2):
            a[i] = c
            yield from rec(i + 1, max(top, c))

    a[0] = 0
    yield from rec(1, 0)


def _p_detect(p_D, label) -> float:
    if isinstance(p_D, Mapping):
        return float(p_D[label])
    return float(p_D)


def log_clutter_density(Z, clutter: ClutterModel) -> float:
    """``log g_C(Z) = -lambda_c + sum_z log kappa(z)``."""
    Z = np.asarray(Z, dtype=float)
    n = 0 if Z.size == 0 else np.atleast_2d(Z).shape[0]
    if n == 0:
        return -clutter.rate
    if not np.all(clutter.contains(Z)):
        return -math.inf
    return -clutter.rate + n * clutter.log_intensity


def log_group_pseudolikelihood(track, group, p_D: float, clutter: ClutterModel, H):
    """Detection pseudo-likelihood of one group for one track.

    ``track`` may be a :class:`GGIWParams` or a :class:`GGIWMixture`; the
    posterior has the same type.  ``log_psi`` is
    ``log p_D + log evidence - sum_z log kappa(z)``.
    """
    W = np.atleast_2d(np.asarray(group, dtype=float))
    if W.size == 0:
        raise ValueError("group must be non-empty")
    mix = GGIWMixture.single(track) if isinstance(track, GGIWParams) else track
    post, log_ev = update_mixture_stats(mix, GroupStats.of(W), H)
    if p_D <= 0:
        log_psi = -math.inf
    else:
        log_psi = math.log(p_D) + log_ev - W.shape[0] * clutter.log_intensity_floor
    if isinstance(track, GGIWParams):
        post = post.components[0]
    return post, log_psi


def _as_mixture(track):
    return GGIWMixture.single(track) if isinstance(track, GGIWParams) else track


def brute_force_terms(tracks: Sequence, Z, p_D, clutter: ClutterModel, H, literal_mode=True, stats=None):
    """Exhaustively enumerate the terms of the extended-target likelihood.

    ``tracks`` is a sequence of ``(density, label)`` pairs.  Every partition
    of ``Z`` with at most ``len(tracks) + 1`` groups is combined with every
    injective association of groups to tracks that leaves at most one group
    unassigned (that group is the clutter set).  Returns a list of
    ``(association, log_term, posteriors, log_joint)`` where ``association``
    holds, per track, the tuple of measurement indices it generated (``None``
    when missed).  ``log_term`` excludes the common ``log g_C(Z)`` factor;
    ``log_joint`` is the full term including it.
    """
    Z = np.asarray(Z, dtype=float).reshape(-1, clutter.lower.shape[0])
    n, nx = Z.shape[0], len(tracks)
    if n > 6 or nx > 3:
        raise ValueError("brute-force enumeration refused: need |Z| <= 6 and |X| <= 3")
    mixes = [_as_mixture(t) for t, _ in tracks]
    pds = [_p_detect(p_D, l) for _, l in tracks]
    miss = [misdetect_mixture(m, pd, literal_mode) for m, pd in zip(mixes, pds)]
    cache: dict = {}

    def detect(i, group):
        key = (i, group)
        if key not in cache:
            post, log_ev = update_mixture_stats(mixes[i], GroupStats.of(Z[list(group)]), H)
            raw = math.log(pds[i]) + log_ev if pds[i] > 0 else -math.inf
            cache[key] = (post, raw - len(group) * clutter.log_intensity_floor, raw)
        return cache[key]

    terms = []
    visited = 0
    for part in set_partitions(n):
        visited += 1
        k = len(part)
        if k > nx + 1:
            continue
        # theta: each track -> group index or MISDETECT, injective on groups
        for theta in itertools.product(range(MISDETECT, k), repeat=nx):
            used = [g for g in theta if g != MISDETECT]
            if len(set(used)) != len(used) or k - len(used) > 1:
                continue
            log_term = 0.0
            log_joint = -clutter.rate
            n_clutter = n
            posts, assoc = [], []
            for i, g in enumerate(theta):
                if g == MISDETECT:
                    post, lp = miss[i]
                    raw = lp
                    assoc.append(None)
                else:
                    post, lp, raw = detect(i, part.groups[g])
                    assoc.append(part.groups[g])
                    n_clutter -= len(part.groups[g])
                log_term += lp
                log_joint += raw
                posts.append(post)
            if n_clutter:
                log_joint += n_clutter * clutter.log_intensity
            terms.append((tuple(assoc), log_term, posts, log_joint))
    if stats is not None:
        stats["partitions_visited"] = visited
    return terms


def brute_force_likelihood(tracks: Sequence, Z, p_D, clutter: ClutterModel, H, literal_mode=True, log=False, stats=None):
    """Exact likelihood of ``Z`` marginalised over the GGIW densities of ``tracks``.

    Small instances only (``|Z| <= 6``, ``|X| <= 3``); used as a test oracle.
    """
    terms = brute_force_terms(tracks, Z, p_D, clutter, H, literal_mode, stats)
    logs = np.array([t[3] for t in terms])
    top = logs.max() if logs.size else -math.inf
    out = top + math.log(np.exp(logs - top).sum()) if np.isfinite(top) else -math.inf
    return out if log else math.exp(out)
