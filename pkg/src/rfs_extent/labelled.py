"""Labelled multi-target densities: GLMB and LMB representations."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .ggiw import GGIWMixture, extent_point_estimate, reduce_mixture


class Label(NamedTuple):
    birth_step: int
    index: int

    def __str__(self):
        return f"{self.birth_step}.{self.index}"

    @classmethod
    def parse(cls, text: str) -> "Label":
        b, i = str(text).split(".")
        return cls(int(b), int(i))


class EmptyPosteriorError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """One GLMB component: a label set with one density per label.

    ``labels`` is sorted; ``meta`` carries provenance such as the parent
    component and the measurement association that produced it.
    """

    log_weight: float
    labels: tuple
    densities: tuple
    meta: object = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.labels) != len(self.densities):
            raise ValueError("one density per label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("labels within a component must be distinct")

    @classmethod
    def from_tracks(cls, log_weight: float, tracks: Mapping[Label, GGIWMixture], meta=None) -> "Hypothesis":
        labels = tuple(sorted(tracks))
        return cls(log_weight, labels, tuple(tracks[l] for l in labels), meta)

    @property
    def tracks(self) -> dict:
        return dict(zip(self.labels, self.densities))

    def __len__(self):
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class GLMBDensity:
    components: tuple
    cardinality: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return np.exp([c.log_weight for c in self.components])

    @property
    def labels(self) -> list:
        out = set()
        for c in self.components:
            out.update(c.labels)
        return sorted(out)

    def __len__(self):
        return len(self.components)

    @classmethod
    def empty(cls) -> "GLMBDensity":
        return cls((Hypothesis(0.0, (), ()),), np.ones(1))

    def expected_cardinality(self) -> float:
        return float(np.dot(np.arange(len(self.cardinality)), self.cardinality))


@dataclass(frozen=True, eq=False)
class LMBTrack:
    r: float
    density: GGIWMixture


@dataclass(frozen=True, eq=False)
class LMBDensity:
    tracks: dict

    def __post_init__(self):
        for label, trk in self.tracks.items():
            if not (-1e-12 <= trk.r <= 1.0 + 1e-12):
                raise ValueError(f"existence probability of {label} outside [0, 1]: {trk.r}")

    @classmethod
    def empty(cls) -> "LMBDensity":
        return cls({})

    @property
    def labels(self) -> list:
        return sorted(self.tracks)

    def __len__(self):
        return len(self.tracks)

    def subset(self, labels: Iterable[Label]) -> "LMBDensity":
        return LMBDensity({l: self.tracks[l] for l in labels})

    def union(self, other: "LMBDensity") -> "LMBDensity":
        clash = set(self.tracks) & set(other.tracks)
        if clash:
            raise ValueError(f"label collision: {sorted(clash)}")
        return LMBDensity({**self.tracks, **other.tracks})

    def expected_cardinality(self) -> float:
        return float(sum(t.r for t in self.tracks.values()))


@dataclass(frozen=True)
class Estimate:
    label: Label
    x: np.ndarray
    chi: np.ndarray
    gamma: float
    r: float | None = None


def _logsumexp(a) -> float:
    a = np.asarray(a, dtype=float)
    top = a.max()
    if not np.isfinite(top):
        return top
    return float(top + math.log(np.exp(a - top).sum()))


def cardinality_of(components: Sequence[Hypothesis]) -> np.ndarray:
    n_max = max((len(c) for c in components), default=0)
    rho = np.zeros(n_max + 1)
    for c in components:
        rho[len(c)] += math.exp(c.log_weight)
    return rho


def normalize_glmb(components: Iterable[Hypothesis]) -> GLMBDensity:
    """Log-sum-exp normalise raw component log-weights."""
    comps = list(components)
    if not comps:
        raise EmptyPosteriorError("no components")
    total = _logsumexp([c.log_weight for c in comps])
    if not np.isfinite(total):
        raise EmptyPosteriorError("all component weights are zero")
    out = tuple(Hypothesis(c.log_weight - total, c.labels, c.densities, c.meta) for c in comps)
    return GLMBDensity(out, cardinality_of(out))


def _label_key(c: Hypothesis):
    return (len(c.labels), c.labels)


def prune_glmb(g: GLMBDensity, max_components: int) -> GLMBDensity:
    """Keep at most ``max_components`` components and renormalise.

    The heaviest component of every distinct label set is kept first (in
    weight order), then the remaining slots go to the heaviest of the rest.
    Without this, many near-identical histories of one label set can push
    every competing cardinality hypothesis out of the density.
    """
    if max_components < 1:
        raise ValueError("max_components must be >= 1")
    if len(g) <= max_components:
        return g
    order = sorted(range(len(g)), key=lambda i: (-g.components[i].log_weight, _label_key(g.components[i])))
    keep, seen = [], set()
    for i in order:
        labels = g.components[i].labels
        if labels not in seen:
            seen.add(labels)
            keep.append(i)
    keep = keep[:max_components]
    chosen = set(keep)
    for i in order:
        if len(keep) >= max_components:
            break
        if i not in chosen:
            keep.append(i)
    rank = {i: r for r, i in enumerate(order)}
    keep.sort(key=rank.__getitem__)
    return normalize_glmb(g.components[i] for i in keep)


def make_estimate(label: Label, mix: GGIWMixture, r=None) -> Estimate:
    best = mix.best
    return Estimate(label, np.array(best.m), extent_point_estimate(best), best.rate_mean, r)


def extract_estimates(g: GLMBDensity) -> list:
    """MAP cardinality, then the heaviest component of that cardinality."""
    n_map = int(np.argmax(g.cardinality))
    if n_map == 0:
        return []
    candidates = [c for c in g.components if len(c) == n_map]
    best = min(candidates, key=lambda c: (-c.log_weight, c.labels))
    return [make_estimate(l, mix) for l, mix in zip(best.labels, best.densities)]


def lmb_to_glmb(lmb: LMBDensity, labels: Iterable[Label] | None = None, cap: int = 15) -> GLMBDensity:
    """Enumerate every label subset of an LMB as a GLMB component."""
    labels = sorted(lmb.tracks if labels is None else labels)
    if len(labels) > cap:
        raise ValueError(f"{len(labels)} labels exceed the subset-enumeration cap {cap}")
    r = np.array([lmb.tracks[l].r for l in labels])
    with np.errstate(divide="ignore"):
        log_r, log_q = np.log(r), np.log1p(-r)
    comps = []
    for included in itertools.product((True, False), repeat=len(labels)):
        lw = sum(log_r[i] if inc else log_q[i] for i, inc in enumerate(included))
        sel = [l for l, inc in zip(labels, included) if inc]
        comps.append(Hypothesis(float(lw), tuple(sel), tuple(lmb.tracks[l].density for l in sel)))
    rho = cardinality_of(comps)
    return GLMBDensity(tuple(comps), rho)


def glmb_to_lmb(
    g: GLMBDensity,
    prune_thresh: float = 1e-3,
    max_mixture: int = 10,
    merge_gate: float = 1.0,
    reduce: bool = True,
) -> LMBDensity:
    """LMB with the same first moment (per-label existence and mixture density)."""
    r: dict = {}
    parts: dict = {}
    for c in g.components:
        w = math.exp(c.log_weight)
        for l, mix in zip(c.labels, c.densities):
            r[l] = r.get(l, 0.0) + w
            # components sharing one density object contribute a single mixture term
            bucket = parts.setdefault(l, {})
            prev = bucket.get(id(mix))
            bucket[id(mix)] = (w + (prev[0] if prev else 0.0), mix)
    tracks = {}
    for l in sorted(r):
        parts[l] = list(parts[l].values())
        weights, comps = [], []
        for w, mix in parts[l]:
            for wi, ci in zip(mix.weights, mix.components):
                weights.append(w * wi)
                comps.append(ci)
        weights = np.asarray(weights)
        if weights.sum() <= 0:
            weights = np.ones_like(weights)
        mix = GGIWMixture(weights, tuple(comps))
        if len(parts[l]) == 1:
            mix = parts[l][0][1]
        elif reduce:
            mix = reduce_mixture(mix, prune_thresh, max_mixture, merge_gate)
        tracks[l] = LMBTrack(min(1.0, r[l]), mix)
    return LMBDensity(tracks)
