"""Measurement partitioning, track clustering and adaptive-birth candidates."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist, squareform
from scipy.stats import chi2

from .ggiw import GGIWMixture, GGIWParams, _extent_for_gating
from .likelihood import Partition, set_partitions


@dataclass(frozen=True)
class PartitionConfig:
    """Feasible-partition generation settings.

    Distance thresholds are taken at ``n_thresholds`` uniform quantiles of
    the sorted pairwise distances that fall inside ``distance_range``.
    ``exhaustive=True`` enumerates every partition (small scans only).
    An EM split of a group is offered only when the halves are separated by
    more than ``em_min_separation`` pooled standard deviations.
    """

    n_thresholds: int = 10
    distance_range: tuple = (0.5, 40.0)
    em_refine: bool = False
    em_min_group: int = 8
    em_iterations: int = 10
    em_min_separation: float = 3.0
    max_partitions: int = 50
    singletons_max: int = 4
    exhaustive: bool = False
    exhaustive_max: int = 8

    def __post_init__(self):
        if self.n_thresholds < 1 or self.max_partitions < 1:
            raise ValueError("n_thresholds and max_partitions must be >= 1")


def single_linkage(Z, threshold: float) -> Partition:
    """Connected components of the graph joining points closer than ``threshold``."""
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    n = Z.shape[0]
    if n == 0:
        return Partition(())
    if n == 1:
        return Partition(((0,),))
    labels = fcluster(linkage(pdist(Z), method="single"), t=threshold, criterion="distance")
    return Partition.from_labels(labels)


def _thresholds(dist: np.ndarray, cfg: PartitionConfig) -> np.ndarray:
    lo, hi = cfg.distance_range
    inside = np.sort(dist[(dist >= lo) & (dist <= hi)])
    if inside.size == 0:
        return np.array([lo])
    q = np.linspace(0.0, 1.0, cfg.n_thresholds)
    return np.unique(np.quantile(inside, q, method="lower"))


def _em_split(X: np.ndarray, iterations: int, min_separation: float = 3.0):
    """Two-component Gaussian EM seeded from the farthest pair; returns a boolean split or None."""
    D = squareform(pdist(X))
    i, j = np.unravel_index(np.argmax(D), D.shape)
    means = np.stack([X[i], X[j]])
    d = X.shape[1]
    covs = np.stack([np.cov(X.T) + 1e-6 * np.eye(d)] * 2)
    pis = np.array([0.5, 0.5])
    resp = None
    for _ in range(iterations):
        logp = np.empty((X.shape[0], 2))
        for k in range(2):
            diff = X - means[k]
            inv = np.linalg.inv(covs[k])
            _, ld = np.linalg.slogdet(covs[k])
            logp[:, k] = math.log(pis[k]) - 0.5 * (ld + np.einsum("ij,jk,ik->i", diff, inv, diff))
        logp -= logp.max(axis=1, keepdims=True)
        resp = np.exp(logp)
        resp /= resp.sum(axis=1, keepdims=True)
        nk = resp.sum(axis=0)
        if np.any(nk < 1e-9):
            return None
        pis = nk / nk.sum()
        means = (resp.T @ X) / nk[:, None]
        for k in range(2):
            diff = X - means[k]
            covs[k] = (resp[:, k, None] * diff).T @ diff / nk[k] + 1e-6 * np.eye(d)
    split = resp[:, 0] >= resp[:, 1]
    if split.all() or not split.any():
        return None
    # a lone blob cut in half scores about 2.7 here, so weaker splits are
    # dropped; offered every scan they let a second track share one target
    if _separation(X, split) <= min_separation:
        return None
    return split


def _separation(X: np.ndarray, split: np.ndarray) -> float:
    """Distance between the two halves' means over their pooled spread along that axis."""
    a, b = X[split], X[~split]
    if len(a) < 2 or len(b) < 2:
        return 0.0
    u = a.mean(axis=0) - b.mean(axis=0)
    dist = float(np.linalg.norm(u))
    if dist == 0.0:
        return 0.0
    u /= dist
    spread = 0.5 * (np.var(a @ u, ddof=1) + np.var(b @ u, ddof=1))
    return dist / math.sqrt(spread) if spread > 0 else math.inf


def feasible_partitions(Z, cfg: PartitionConfig = PartitionConfig()) -> list:
    """A small set of distinct, plausible partitions of the scan ``Z``."""
    Z = np.asarray(Z, dtype=float)
    n = 0 if Z.size == 0 else np.atleast_2d(Z).shape[0]
    if n == 0:
        return [Partition(())]
    Z = np.atleast_2d(Z)
    if cfg.exhaustive:
        if n > cfg.exhaustive_max:
            raise ValueError(f"exhaustive partitioning refused for {n} measurements")
        return list(set_partitions(n))
    out: list = []
    seen: set = set()

    def add(p: Partition):
        if p not in seen:
            seen.add(p)
            out.append(p)

    if n <= cfg.singletons_max:
        add(Partition(tuple((i,) for i in range(n))))
    if n > 1:
        dist = pdist(Z)
        link = linkage(dist, method="single")
        for thr in _thresholds(dist, cfg):
            add(Partition.from_labels(fcluster(link, t=thr, criterion="distance")))
    add(Partition((tuple(range(n)),)))
    if cfg.em_refine:
        splits: dict = {}  # the same group recurs across thresholds
        for p in list(out):
            for gi, g in enumerate(p.groups):
                if len(g) < cfg.em_min_group:
                    continue
                if g not in splits:
                    splits[g] = _em_split(Z[list(g)], cfg.em_iterations, cfg.em_min_separation)
                split = splits[g]
                if split is None:
                    continue
                a = tuple(i for i, s in zip(g, split) if s)
                b = tuple(i for i, s in zip(g, split) if not s)
                add(Partition.of(p.groups[:gi] + (a, b) + p.groups[gi + 1 :]))
    return out[: cfg.max_partitions]


# ------------------------------------------------------------- track gating


def gating_distances(mix: GGIWMixture, Z, H) -> np.ndarray:
    """Smallest squared Mahalanobis distance of each measurement over mixture components.

    The predicted single-measurement covariance is ``(H P H^T + 1) * E[chi]``.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    best = np.full(Z.shape[0], np.inf)
    H = np.asarray(H, dtype=float)
    for comp in mix.components:
        X = _extent_for_gating(comp)
        s, d = comp.s, comp.d
        z_hat = H @ comp.m.reshape(s, d)
        cov = (float(H @ comp.P @ H) + 1.0) * X
        diff = Z - z_hat
        d2 = np.einsum("ij,jk,ik->i", diff, np.linalg.inv(cov), diff)
        best = np.minimum(best, d2)
    return best


@dataclass(frozen=True)
class TrackCluster:
    labels: tuple
    measurements: tuple


def _components(n_tracks, edges):
    parent = list(range(n_tracks))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    return [find(i) for i in range(n_tracks)]


def cluster_tracks(tracks, Z, H, gate: float = 0.99, max_labels: int | None = None):
    """Split tracks and measurements into independent groups.

    ``tracks`` maps label -> (existence, GGIWMixture) or is an LMBDensity.
    Two tracks share a group when some measurement gates both.  Returns
    ``(clusters, residual)`` where ``residual`` holds the indices of
    measurements that gate no track.
    """
    items = getattr(tracks, "tracks", tracks)
    labels = sorted(items)
    Z = np.asarray(Z, dtype=float)
    n = 0 if Z.size == 0 else np.atleast_2d(Z).shape[0]
    if not labels:
        return [], tuple(range(n))
    if n == 0:
        return [TrackCluster((l,), ()) for l in labels], ()
    Z = np.atleast_2d(Z)
    d = Z.shape[1]
    thr = chi2.ppf(gate, d)
    dist = np.stack([gating_distances(_density(items[l]), Z, H) for l in labels])
    gated = dist <= thr
    while True:
        edges = []
        for j in range(n):
            hit = np.flatnonzero(gated[:, j])
            edges.extend((hit[0], h) for h in hit[1:])
        roots = _components(len(labels), edges)
        sizes = {r: roots.count(r) for r in set(roots)}
        too_big = [r for r, c in sizes.items() if max_labels is not None and c > max_labels]
        if not too_big:
            break
        # cut the weakest gating link inside an oversized group
        members = [i for i, r in enumerate(roots) if r in too_big]
        sub = np.where(gated[members], dist[members], -np.inf)
        multi = gated[members].sum(axis=0) > 1
        sub[:, ~multi] = -np.inf
        if not np.isfinite(sub).any():
            break
        i, j = np.unravel_index(np.argmax(sub), sub.shape)
        gated[members[i], j] = False
        warnings.warn("track group exceeds the enumeration cap; dropping weakest gating link", stacklevel=2)
    groups: dict = {}
    for i, r in enumerate(roots):
        groups.setdefault(r, ([], []))[0].append(labels[i])
    residual = []
    for j in range(n):
        hit = np.flatnonzero(gated[:, j])
        if hit.size == 0:
            residual.append(j)
        else:
            # measurements gating several groups go to the closest track
            best = hit[np.argmin(dist[hit, j])]
            groups[roots[best]][1].append(j)
    clusters = [TrackCluster(tuple(ls), tuple(ms)) for ls, ms in groups.values()]
    clusters.sort(key=lambda c: c.labels)
    return clusters, tuple(residual)


def _density(item):
    return getattr(item, "density", item[1] if isinstance(item, tuple) else item)


# ------------------------------------------------------------ adaptive birth


@dataclass(frozen=True)
class BirthConfig:
    """Adaptive-birth prior.  ``distance`` defaults to four expected extent radii."""

    alpha: float = 10.0
    beta: float = 1.0
    v: float = 10.0
    V: tuple = ((100.0, 0.0), (0.0, 100.0))
    P: tuple = ((100.0, 0.0, 0.0), (0.0, 6.25, 0.0), (0.0, 0.0, 1.0))
    min_size: int = 5
    r_max: float = 0.1
    distance: float | None = None

    @property
    def d(self) -> int:
        return len(self.V)

    @property
    def s(self) -> int:
        return len(self.P)

    @property
    def expected_count(self) -> float:
        return self.alpha / self.beta

    def link_distance(self) -> float:
        if self.distance is not None:
            return float(self.distance)
        extent = np.asarray(self.V) / (self.v - 2 * self.d - 2)
        return 4.0 * math.sqrt(np.trace(extent) / self.d)


@dataclass(frozen=True)
class BirthCandidate:
    params: GGIWParams
    size: int
    r: float
    measurements: tuple


def birth_candidates(Z, cfg: BirthConfig = BirthConfig()) -> list:
    """Clusters of at least ``min_size`` measurements turned into GGIW birth priors."""
    Z = np.asarray(Z, dtype=float)
    if Z.size == 0:
        return []
    Z = np.atleast_2d(Z)
    d, s = cfg.d, cfg.s
    out = []
    for g in single_linkage(Z, cfg.link_distance()).groups:
        if len(g) < cfg.min_size:
            continue
        W = Z[list(g)]
        m = np.zeros(s * d)
        m[:d] = W.mean(axis=0)
        dev = W - W.mean(axis=0)
        spread = dev.T @ dev / (len(g) - 1)
        V = (cfg.v - 2 * d - 2) * spread
        if np.any(np.linalg.eigvalsh(V) <= 0):
            V = np.asarray(cfg.V, dtype=float)
        params = GGIWParams(cfg.alpha, cfg.beta, m, np.asarray(cfg.P, dtype=float), cfg.v, V)
        r = min(cfg.r_max, len(g) / cfg.expected_count)
        out.append(BirthCandidate(params, len(g), r, g))
    return out
