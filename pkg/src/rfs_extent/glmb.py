"""GGIW-GLMB filter: k-shortest-paths prediction and partition + Murty update."""
from __future__ import annotations

import heapq
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.stats import chi2

from .assignment import INF, AssignCostMatrix, k_shortest_paths, murty_ranked
from .ggiw import GGIWMixture, GGIWParams, GroupStats, MotionModel, misdetect_mixture, observation_row, predict_mixture, singer_model, update_mixture_stats
from .labelled import GLMBDensity, Hypothesis, Label, LMBDensity, LMBTrack, extract_estimates, lmb_to_glmb, normalize_glmb, prune_glmb
from .likelihood import ClutterModel, _p_detect
from .partitioning import BirthConfig, PartitionConfig, feasible_partitions, gating_distances

UNLIMITED = 10**9


@dataclass(frozen=True)
class BirthTemplate:
    """Static birth track: existence probability and initial density."""

    r: float
    density: GGIWMixture

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("birth existence must lie in [0, 1]")
        if isinstance(self.density, GGIWParams):
            object.__setattr__(self, "density", GGIWMixture.single(self.density))


def _default_clutter():
    return ClutterModel(10.0, np.array([-1000.0, -1000.0]), np.array([1000.0, 1000.0]))


@dataclass
class FilterConfig:
    """Settings shared by the GLMB and LMB filters.

    ``n_predict_components`` / ``n_update_components`` are the ranked
    hypothesis budgets (``None`` removes truncation), ``max_components``
    caps the GLMB after each stage.  ``gate`` is a per-measurement
    chi-square probability; ``None`` disables gating.
    """

    motion: MotionModel = field(default_factory=singer_model)
    clutter: ClutterModel = field(default_factory=_default_clutter)
    p_S: float = 0.99
    p_D: float | Mapping = 0.9
    n_predict_components: int | None = 100
    n_update_components: int | None = 100
    max_components: int = 1000
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    births: tuple = ()
    adaptive_birth: bool = False
    birth_config: BirthConfig = field(default_factory=BirthConfig)
    literal_misdetect: bool = True
    gate: float | None = 0.999
    mixture_prune: float = 1e-3
    mixture_max: int = 10
    mixture_merge_gate: float = 1.0
    # LMB bookkeeping
    delete_threshold: float = 1e-3
    report_threshold: float = 0.5
    report_hysteresis: float = 0.4
    subset_cap: int = 10

    def __post_init__(self):
        if not 0.0 <= self.p_S <= 1.0:
            raise ValueError("p_S must lie in [0, 1]")
        pds = self.p_D.values() if isinstance(self.p_D, Mapping) else [self.p_D]
        if any(not 0.0 <= float(p) <= 1.0 for p in pds):
            raise ValueError("p_D must lie in [0, 1]")
        for name in ("n_predict_components", "n_update_components"):
            val = getattr(self, name)
            if val is not None and val < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")
        self.births = tuple(self.births)

    @property
    def H(self) -> np.ndarray:
        return observation_row(self.motion.s)

    def birth_lmb(self, k: int) -> LMBDensity:
        """Static birth tracks for step ``k``, labelled ``(k, i)``."""
        return LMBDensity({Label(k, i): LMBTrack(b.r, b.density) for i, b in enumerate(self.births)})


# ---------------------------------------------------------------- prediction


def predict_glmb(post: GLMBDensity | None, cfg: FilterConfig, k: int, birth: LMBDensity | None = None) -> GLMBDensity:
    """Survival via k-shortest paths per component, times the birth GLMB."""
    birth = cfg.birth_lmb(k) if birth is None else birth
    birth_g = lmb_to_glmb(birth, cap=max(len(birth), 1))
    if post is None or len(post) == 0:
        post = GLMBDensity.empty()
    predicted: dict = {}
    N = cfg.n_predict_components
    log_ps = math.log(cfg.p_S) if cfg.p_S > 0 else -INF
    log_qs = math.log1p(-cfg.p_S) if cfg.p_S < 1 else -INF
    survivors = []
    for comp in post.components:
        w = math.exp(comp.log_weight)
        n = len(comp)
        K = 2**n if N is None else max(1, math.ceil(N * w))
        K = min(K, 2**n) if n < 60 else K
        C = np.tile([-log_ps, -log_qs], (n, 1)) if n else np.zeros((0, 2))
        for subset, cost in k_shortest_paths(C, K):
            if not math.isfinite(cost):
                continue
            labels, dens = [], []
            for i in subset:
                mix = comp.densities[i]
                if id(mix) not in predicted:
                    predicted[id(mix)] = (mix, predict_mixture(mix, cfg.motion))
                labels.append(comp.labels[i])
                dens.append(predicted[id(mix)][1])
            survivors.append((comp.log_weight - cost, labels, dens))
    out = []
    for lw, labels, dens in survivors:
        for b in birth_g.components:
            if not math.isfinite(b.log_weight):
                continue
            tracks = dict(zip(labels, dens))
            clash = set(tracks) & set(b.labels)
            if clash:
                raise ValueError(f"birth labels collide with surviving labels: {sorted(clash)}")
            tracks.update(zip(b.labels, b.densities))
            out.append(Hypothesis.from_tracks(lw + b.log_weight, tracks))
    return prune_glmb(normalize_glmb(out), cfg.max_components)


# -------------------------------------------------------------------- update


def _filter_region(Z, clutter: ClutterModel):
    Z = np.asarray(Z, dtype=float)
    d = clutter.lower.shape[0]
    Z = Z.reshape(-1, d)
    inside = clutter.contains(Z)
    if not inside.all():
        warnings.warn(f"dropping {int((~inside).sum())} measurement(s) outside the surveillance region", stacklevel=3)
        Z = Z[inside]
    return Z


class _TrackCache:
    """Per-scan cache of gating sets and (track, group) detection terms."""

    def __init__(self, Z, cfg: FilterConfig):
        self.Z = Z
        self.cfg = cfg
        self.H = cfg.H
        self.log_kappa = cfg.clutter.log_intensity_floor
        self.thr = None if cfg.gate is None else chi2.ppf(cfg.gate, Z.shape[1])
        self.gates: dict = {}
        self.detect: dict = {}
        self.miss: dict = {}
        self.stats: dict = {}
        self.agroups: dict = {}
        self.rows: dict = {}

    def gated(self, mix) -> np.ndarray:
        key = id(mix)
        if key not in self.gates:
            if self.thr is None:
                self.gates[key] = np.ones(self.Z.shape[0], dtype=bool)
            else:
                self.gates[key] = gating_distances(mix, self.Z, self.H) <= self.thr
        return self.gates[key]

    def assignable(self, mix, group) -> bool:
        return bool(self.gated(mix)[list(group)].any())

    def set_partitions(self, partitions):
        """Index the distinct groups of ``partitions``; partitions become index arrays."""
        self.groups = _all_groups(partitions)
        index = {g: i for i, g in enumerate(self.groups)}
        self.members = [list(g) for g in self.groups]
        self.part_cols = [np.array(sorted(index[g] for g in part.groups), dtype=np.intp) for part in partitions]

    def group_mask(self, mix) -> np.ndarray:
        """Which indexed groups have at least one measurement inside the track's gate."""
        key = id(mix)
        if key not in self.agroups:
            gate = self.gated(mix)
            self.agroups[key] = np.array([gate[m].any() for m in self.members], dtype=bool)
        return self.agroups[key]

    def detection(self, mix, label, group):
        """``(posterior, log psi)`` for ``group`` generated by the track."""
        key = (id(mix), label, group)
        if key not in self.detect:
            if group not in self.stats:
                self.stats[group] = GroupStats.of(self.Z[list(group)])
            post, log_ev = update_mixture_stats(mix, self.stats[group], self.H)
            p_D = _p_detect(self.cfg.p_D, label)
            lp = math.log(p_D) + log_ev - len(group) * self.log_kappa if p_D > 0 else -INF
            self.detect[key] = (post, lp)
        return self.detect[key]

    def full_row(self, mix, label):
        """``(detection costs over every indexed group, misdetection cost, row minimum)``."""
        key = (id(mix), label)
        if key not in self.rows:
            row = np.full(len(self.groups), INF)
            for j in np.flatnonzero(self.group_mask(mix)):
                row[j] = -self.detection(mix, label, self.groups[j])[1]
            miss = -self.misdetection(mix, label)[1]
            self.rows[key] = (row, miss, min(miss, row.min(initial=INF)))
        return self.rows[key]

    def misdetection(self, mix, label):
        key = (id(mix), label)
        if key not in self.miss:
            self.miss[key] = misdetect_mixture(mix, _p_detect(self.cfg.p_D, label), self.cfg.literal_misdetect)
        return self.miss[key]


def update_glmb(pred: GLMBDensity, Z, cfg: FilterConfig, partitions=None) -> GLMBDensity:
    """Bayes update of a predicted GLMB with the scan ``Z``.

    Posterior components carry ``meta = (parent index, association)`` where
    the association holds, per label, the tuple of measurement indices
    assigned to it or ``None`` for a missed detection.
    """
    Z = _filter_region(Z, cfg.clutter)
    cache = _TrackCache(Z, cfg)
    if Z.shape[0] == 0:
        return _update_empty(enumerate(pred.components), cache, cfg)
    if partitions is None:
        partitions = feasible_partitions(Z, cfg.partition)
    cache.set_partitions(partitions)
    keyed = []
    for ci, comp in enumerate(pred.components):
        if comp.log_weight == -INF:
            continue
        bound = sum(cache.full_row(m, l)[2] for l, m in zip(comp.labels, comp.densities))
        if math.isfinite(bound):
            keyed.append((bound - comp.log_weight, ci, comp))
    keyed.sort(key=lambda t: t[:2])
    return _ranked_update(iter(keyed), cache, partitions, cfg)


def update_lmb_group(lmb: LMBDensity, Z, cfg: FilterConfig, partitions=None) -> GLMBDensity:
    """``update_glmb(lmb_to_glmb(lmb), Z, cfg)`` without building all label subsets.

    The component cost bound is a sum of per-track terms, so label subsets
    can be generated lazily in bound order; only those the ranked merge
    reaches are ever formed.  Parent indices in ``meta`` count subsets in
    generation order.
    """
    Z = _filter_region(Z, cfg.clutter)
    cache = _TrackCache(Z, cfg)
    if Z.shape[0] == 0:
        return _update_empty(enumerate(lmb_to_glmb(lmb, cap=cfg.subset_cap).components), cache, cfg)
    if len(lmb.tracks) > cfg.subset_cap:
        raise ValueError(f"{len(lmb.tracks)} labels exceed the subset-enumeration cap {cfg.subset_cap}")
    if partitions is None:
        partitions = feasible_partitions(Z, cfg.partition)
    cache.set_partitions(partitions)
    labels = sorted(lmb.tracks)
    with np.errstate(divide="ignore"):
        log_r = [math.log(lmb.tracks[l].r) if lmb.tracks[l].r > 0 else -INF for l in labels]
        log_q = [math.log1p(-lmb.tracks[l].r) if lmb.tracks[l].r < 1 else -INF for l in labels]
    best = [cache.full_row(lmb.tracks[l].density, l)[2] for l in labels]
    cost_in = [b - lr for b, lr in zip(best, log_r)]
    cost_out = [-lq for lq in log_q]

    def source():
        for ci, (key, included) in enumerate(ranked_subsets(cost_in, cost_out)):
            sel = [l for l, inc in zip(labels, included) if inc]
            lw = sum(log_r[i] if inc else log_q[i] for i, inc in enumerate(included))
            yield key, ci, Hypothesis(lw, tuple(sel), tuple(lmb.tracks[l].density for l in sel))

    return _ranked_update(source(), cache, partitions, cfg)


def ranked_subsets(cost_in, cost_out):
    """All include/exclude choices in non-decreasing total cost, as ``(cost, flags)``.

    Choices with an infinite cost are never taken.  Starting from the
    per-item cheaper choice, flips are ranked by their extra cost with the
    usual extend/replace successor rule, so every subset appears once.
    """
    base = [ci <= co for ci, co in zip(cost_in, cost_out)]
    total = sum(min(ci, co) for ci, co in zip(cost_in, cost_out))
    if not math.isfinite(total):
        return
    flips = sorted(
        (abs(ci - co), i) for i, (ci, co) in enumerate(zip(cost_in, cost_out)) if math.isfinite(ci) and math.isfinite(co)
    )
    yield total, tuple(base)
    heap = [(total + flips[0][0], (0,))] if flips else []
    while heap:
        cost, chosen = heapq.heappop(heap)
        flags = list(base)
        for j in chosen:
            flags[flips[j][1]] = not flags[flips[j][1]]
        yield cost, tuple(flags)
        last = chosen[-1]
        if last + 1 < len(flips):
            heapq.heappush(heap, (cost + flips[last + 1][0], chosen + (last + 1,)))
            heapq.heappush(heap, (cost - flips[last][0] + flips[last + 1][0], chosen[:-1] + (last + 1,)))


def _all_groups(partitions) -> tuple:
    return tuple(sorted({g for part in partitions for g in part.groups}))


def _update_empty(components, cache: _TrackCache, cfg: FilterConfig) -> GLMBDensity:
    out = []
    for ci, comp in components:
        lw, dens = comp.log_weight, []
        for l, mix in zip(comp.labels, comp.densities):
            post, lq = cache.misdetection(mix, l)
            lw += lq
            dens.append(post)
        out.append(Hypothesis(lw, comp.labels, tuple(dens), (ci, (None,) * len(comp))))
    return prune_glmb(normalize_glmb(out), cfg.max_components)


def _ranked_update(source, cache: _TrackCache, partitions, cfg: FilterConfig) -> GLMBDensity:
    """Best-first merge over components drawn from ``source`` in non-decreasing bound order.

    One ranked assignment stream per (component, partition) pair; partitions
    offering a component the same assignable groups are redundant.  The merge
    is lazy but exact: a component enters with a cost bound over all
    partitions, a stream with a bound over its own groups, and each is only
    expanded once its bound reaches the top.
    """
    heap = []
    seq = itertools.count()
    comps: dict = {}
    pending = next(source, None)
    budget = UNLIMITED if cfg.n_update_components is None else cfg.n_update_components
    out = []
    seen = set()
    refined_comps = set()
    while len(out) < budget:
        if pending is not None and (not heap or pending[0] <= heap[0][0]):
            key, ci, comp = pending
            comps[ci] = comp
            heapq.heappush(heap, (key, next(seq), _COMPONENT, ci))
            pending = next(source, None)
        if not heap:
            break
        key, _, kind, item = heapq.heappop(heap)
        if kind == _COMPONENT:
            comp = comps[item]
            full = [cache.full_row(m, l) for l, m in zip(comp.labels, comp.densities)]
            F = np.vstack([r[0] for r in full]) if full else np.zeros((0, len(cache.groups)))
            miss = np.array([r[1] for r in full], dtype=float)
            if item not in refined_comps:
                # a partition's assignments are also assignments over all groups,
                # so the conflict-aware bound on the full matrix holds for every stream
                refined_comps.add(item)
                tight = _stream_bound(F, miss) - comp.log_weight
                if tight > key:
                    heapq.heappush(heap, (tight, next(seq), _COMPONENT, item))
                    continue
            usable = np.zeros(len(cache.groups), dtype=bool)
            for m in comp.densities:
                usable |= cache.group_mask(m)
            seen_cols = set()
            for part in cache.part_cols:
                cols = part[usable[part]]
                if cols.tobytes() in seen_cols:
                    continue
                seen_cols.add(cols.tobytes())
                D = F[:, cols]
                # row minima only; the conflict-aware bound waits until the stream is popped
                bound = float(np.minimum(D.min(axis=1, initial=INF), miss).sum())
                if math.isfinite(bound):
                    heapq.heappush(heap, (bound - comp.log_weight, next(seq), _STREAM, (item, cols, D, miss, False)))
            continue
        if kind == _STREAM:
            ci, cols, D, miss, refined = item
            if not refined:
                tight = _stream_bound(D, miss) - comps[ci].log_weight
                if tight > key:
                    heapq.heappush(heap, (tight, next(seq), _STREAM, (ci, cols, D, miss, True)))
                    continue
            stream = (ci, cols, murty_ranked(AssignCostMatrix(D, miss)))
            _push_next(heap, seq, stream, comps[ci].log_weight)
            continue
        stream, assign = item
        ci, cols, _ = stream
        comp = comps[ci]
        _push_next(heap, seq, stream, comp.log_weight)
        assoc = tuple(None if j < 0 else cache.groups[cols[j]] for j in assign)
        hkey = (ci, assoc)
        if hkey in seen:
            continue
        seen.add(hkey)
        dens = []
        for l, mix, g in zip(comp.labels, comp.densities, assoc):
            dens.append(cache.misdetection(mix, l)[0] if g is None else cache.detection(mix, l, g)[0])
        out.append(Hypothesis(-key, comp.labels, tuple(dens), hkey))
    return prune_glmb(normalize_glmb(out), cfg.max_components)


_COMPONENT, _STREAM, _HYPOTHESIS = 0, 1, 2


def _stream_bound(D, miss) -> float:
    """Lower bound on the best assignment cost of one stream.

    Every row pays at least its minimum.  Rows whose minimum sits in the
    same group cannot all have it: all but one pay at least their next best
    entry (misdetection columns are private).  Not knowing which row keeps
    the group, the largest regret is set aside and the rest are added.
    """
    n, g = D.shape
    if g == 0:
        return float(miss.sum())
    best = D.min(axis=1)
    low = np.minimum(best, miss)
    total = float(low.sum())
    claim = np.flatnonzero(best < miss)
    if claim.size < 2 or not math.isfinite(total):
        return total
    j = D[claim].argmin(axis=1)
    if len(set(j.tolist())) == j.size:
        return total
    second = np.partition(D[claim], 1, axis=1)[:, 1] if g > 1 else np.full(claim.size, INF)
    regret = np.minimum(second, miss[claim]) - low[claim]
    for col in set(j.tolist()):
        r = np.sort(regret[j == col])
        total += float(r[:-1].sum())
    return total


def _push_next(heap, seq, stream, log_weight):
    for assign, cost in stream[2]:
        if math.isfinite(cost):
            heapq.heappush(heap, (cost - log_weight, next(seq), _HYPOTHESIS, (stream, assign)))
            return


# ---------------------------------------------------------------- recursion


@dataclass
class GLMBState:
    density: GLMBDensity | None = None
    k: int = 0


def step_glmb(state: GLMBState, Z, cfg: FilterConfig):
    """Predict to step ``state.k``, update with ``Z``; returns ``(next state, estimates)``."""
    pred = predict_glmb(state.density, cfg, state.k)
    post = update_glmb(pred, Z, cfg)
    return GLMBState(post, state.k + 1), extract_estimates(post)


class GLMBFilter:
    """Stateful convenience wrapper around :func:`step_glmb`."""

    def __init__(self, cfg: FilterConfig, k0: int = 0):
        self.cfg = cfg
        self.state = GLMBState(None, k0)

    def step(self, Z):
        self.state, est = step_glmb(self.state, Z, self.cfg)
        return est

    @property
    def density(self):
        return self.state.density
