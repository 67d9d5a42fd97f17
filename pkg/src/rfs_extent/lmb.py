"""GGIW-LMB filter: per-group GLMB updates on independent track clusters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ggiw import GGIWMixture, predict_mixture
from .glmb import FilterConfig, _filter_region, update_lmb_group
from .labelled import Estimate, Label, LMBDensity, LMBTrack, glmb_to_lmb, make_estimate
from .partitioning import birth_candidates, cluster_tracks


def predict_lmb(post: LMBDensity | None, birth: LMBDensity, cfg: FilterConfig) -> LMBDensity:
    """Surviving tracks (``r * p_S``, predicted densities) joined with the birth tracks."""
    post = post or LMBDensity.empty()
    survivors = {
        l: LMBTrack(t.r * cfg.p_S, predict_mixture(t.density, cfg.motion)) for l, t in post.tracks.items()
    }
    return LMBDensity(survivors).union(birth)


def _update_group(sub: LMBDensity, Z, cfg: FilterConfig) -> LMBDensity:
    post = update_lmb_group(sub, Z, cfg)
    return glmb_to_lmb(post, cfg.mixture_prune, cfg.mixture_max, cfg.mixture_merge_gate)


def adaptive_births(Z, cfg: FilterConfig, k: int, first_index: int = 0) -> LMBDensity:
    """Birth tracks from measurement clusters, labelled ``(k, first_index + j)``."""
    tracks = {}
    for j, cand in enumerate(birth_candidates(Z, cfg.birth_config)):
        tracks[Label(k, first_index + j)] = LMBTrack(cand.r, GGIWMixture.single(cand.params))
    return LMBDensity(tracks)


def update_lmb(pred: LMBDensity, Z, cfg: FilterConfig, k: int = 0) -> LMBDensity:
    """Cluster tracks and measurements, update each group, add adaptive births."""
    Z = _filter_region(Z, cfg.clutter)
    clusters, residual = cluster_tracks(pred, Z, cfg.H, cfg.gate if cfg.gate is not None else 1.0, cfg.subset_cap)
    tracks: dict = {}
    for cl in clusters:
        updated = _update_group(pred.subset(cl.labels), Z[list(cl.measurements)], cfg)
        tracks.update(updated.tracks)
    tracks = {l: t for l, t in tracks.items() if t.r >= cfg.delete_threshold}
    out = LMBDensity(tracks)
    if cfg.adaptive_birth and residual:
        out = out.union(adaptive_births(Z[list(residual)], cfg, k, len(cfg.births)))
    return out


@dataclass
class LMBState:
    density: LMBDensity = field(default_factory=LMBDensity.empty)
    k: int = 0
    reported: frozenset = frozenset()


def report(density: LMBDensity, cfg: FilterConfig, previous=frozenset()) -> tuple[list, frozenset]:
    """Tracks above the report threshold; previously reported ones stay while above the hysteresis level."""
    out, shown = [], set()
    for l in density.labels:
        t = density.tracks[l]
        thr = cfg.report_hysteresis if l in previous else cfg.report_threshold
        if t.r > thr:
            out.append(make_estimate(l, t.density, t.r))
            shown.add(l)
    return out, frozenset(shown)


def step_lmb(state: LMBState, Z, cfg: FilterConfig):
    """Predict to step ``state.k`` and update with ``Z``; returns ``(next state, estimates)``."""
    pred = predict_lmb(state.density, cfg.birth_lmb(state.k), cfg)
    post = update_lmb(pred, Z, cfg, state.k)
    est, shown = report(post, cfg, state.reported)
    return LMBState(post, state.k + 1, shown), est


class LMBFilter:
    def __init__(self, cfg: FilterConfig, k0: int = 0):
        self.cfg = cfg
        self.state = LMBState(LMBDensity.empty(), k0)

    def step(self, Z) -> list[Estimate]:
        self.state, est = step_lmb(self.state, Z, self.cfg)
        return est

    @property
    def density(self) -> LMBDensity:
        return self.state.density
