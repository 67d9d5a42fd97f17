"""Run filters over scenario logs and score them."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .glmb import FilterConfig, GLMBFilter
from .lmb import LMBFilter
from .metrics import cardinality_error, extended_base_distance, ospa


@dataclass
class TrackRun:
    estimates: list
    step_times: list
    r_series: list = field(default_factory=list)  # per step: {label: r}


def make_filter(name: str, cfg: FilterConfig):
    if name == "glmb":
        return GLMBFilter(cfg)
    if name in ("lmb", "lmb-ab"):
        return LMBFilter(cfg)
    raise ValueError(f"unknown filter {name!r}")


def run_filter(name: str, log, cfg: FilterConfig, k0: int | None = None) -> TrackRun:
    """Step a filter over every record of ``log``."""
    flt = make_filter(name, cfg)
    if k0 is not None:
        flt.state.k = k0
    elif log:
        flt.state.k = log[0].k
    ests, times, rs = [], [], []
    for rec in log:
        t0 = time.perf_counter()
        ests.append(flt.step(rec.Z))
        times.append(time.perf_counter() - t0)
        if isinstance(flt, LMBFilter):
            rs.append({l: t.r for l, t in flt.density.tracks.items()})
    return TrackRun(ests, times, rs)


def score(log, estimates, c: float = 100.0, p: float = 1.0, extended: bool = False):
    """Per-step cardinality error, OSPA and (optionally) extended OSPA."""
    card, dist, ext = [], [], []
    for rec, est in zip(log, estimates, strict=True):
        card.append(cardinality_error(len(est), len(rec.truth)))
        X = [np.asarray(e.x)[:2] for e in est]
        Y = [np.asarray(t.x)[:2] for t in rec.truth]
        dist.append(ospa(X, Y, c, p))
        if extended:
            Xe = [(e.x, e.chi, e.gamma) for e in est]
            Ye = [(t.x, t.chi, t.gamma) for t in rec.truth]
            ext.append(ospa(Xe, Ye, c, p, base=extended_base_distance))
    return card, dist, (ext if extended else None)
