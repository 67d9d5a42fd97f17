"""Filter configurations for the built-in scenarios and from JSON documents."""
from __future__ import annotations

import dataclasses

import numpy as np

from .ggiw import GGIWParams, singer_model
from .glmb import BirthTemplate, FilterConfig
from .likelihood import ClutterModel
from .partitioning import BirthConfig, PartitionConfig
from .simulation import ScenarioSpec

# prior shared by static and adaptive births
ALPHA0, BETA0, V_DOF0 = 10.0, 1.0, 10.0
V0 = 100.0 * np.eye(2)
P0 = np.diag([10.0, 2.5, 1.0]) ** 2
BIRTH_R = 0.03

FILTERS = ("glmb", "lmb", "lmb-ab")


def birth_prior(position, alpha=ALPHA0, beta=BETA0, v=V_DOF0, V=V0, P=P0) -> GGIWParams:
    P = np.asarray(P, dtype=float)
    m = np.zeros(P.shape[0] * 2)
    m[:2] = position
    return GGIWParams(alpha, beta, m, P, v, np.asarray(V, dtype=float))


def _birth_sites(spec: ScenarioSpec) -> list:
    """Distinct start positions of the scenario's targets."""
    sites = []
    for t in spec.targets:
        wp = np.asarray(t.waypoints, dtype=float)
        # position at the birth step from the first waypoint row at or before it
        pos = wp[0, 1:]
        if not any(np.allclose(pos, s) for s in sites):
            sites.append(pos)
    return sites or [np.zeros(2)]


def scenario_config(spec: ScenarioSpec, filter_name: str = "glmb", **overrides) -> FilterConfig:
    """Filter settings matched to a scenario: its clutter, p_D and birth sites."""
    if filter_name not in FILTERS:
        raise ValueError(f"unknown filter {filter_name!r}; choose from {FILTERS}")
    region = np.asarray(spec.region, dtype=float)
    clutter = ClutterModel(spec.clutter_rate if spec.clutter_rate > 0 else 1e-9, region[:, 0], region[:, 1])
    births = tuple(BirthTemplate(BIRTH_R, birth_prior(p)) for p in _birth_sites(spec))
    cfg = dict(
        motion=singer_model(T=1.0, theta=1.0, sigma=0.1, mu=1.25, tau=5.0),
        clutter=clutter,
        p_S=0.99,
        p_D=spec.p_D,
        n_predict_components=50,
        n_update_components=50,
        max_components=50,
        partition=PartitionConfig(n_thresholds=6, distance_range=(2.0, 30.0), em_refine=True),
        births=births,
        adaptive_birth=filter_name == "lmb-ab",
        birth_config=BirthConfig(alpha=ALPHA0, beta=BETA0, v=V_DOF0, V=tuple(map(tuple, V0)), P=tuple(map(tuple, P0))),
    )
    cfg.update(overrides)
    return FilterConfig(**cfg)


# ------------------------------------------------------------ JSON config


_SCALAR_KEYS = {
    "p_S", "p_D", "n_predict_components", "n_update_components", "max_components", "gate",
    "literal_misdetect", "adaptive_birth", "mixture_prune", "mixture_max", "mixture_merge_gate",
    "delete_threshold", "report_threshold", "report_hysteresis", "subset_cap",
}
_NESTED_KEYS = {"motion", "clutter", "partition", "births", "birth_config"}


def _dataclass_from(cls, doc: dict, base=None):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    vals = {k: tuple(map(tuple, v)) if isinstance(v, list) and v and isinstance(v[0], list) else (tuple(v) if isinstance(v, list) else v) for k, v in doc.items()}
    if base is None:
        return cls(**vals)
    return dataclasses.replace(base, **vals)


def config_from_dict(doc: dict, base: FilterConfig) -> FilterConfig:
    """Apply a JSON configuration document on top of ``base``; unknown keys are rejected."""
    unknown = set(doc) - _SCALAR_KEYS - _NESTED_KEYS
    if unknown:
        raise ValueError(f"unknown configuration keys: {sorted(unknown)}")
    changes = {k: doc[k] for k in _SCALAR_KEYS & set(doc)}
    if "motion" in doc:
        m = dict(doc["motion"])
        allowed = {"T", "theta", "sigma", "mu", "tau"}
        if set(m) - allowed:
            raise ValueError(f"unknown motion keys: {sorted(set(m) - allowed)}")
        changes["motion"] = singer_model(**m)
    if "clutter" in doc:
        c = dict(doc["clutter"])
        if set(c) - {"rate", "lower", "upper"}:
            raise ValueError(f"unknown clutter keys: {sorted(set(c) - {'rate', 'lower', 'upper'})}")
        old = base.clutter
        changes["clutter"] = ClutterModel(float(c.get("rate", old.rate)), np.asarray(c.get("lower", old.lower)), np.asarray(c.get("upper", old.upper)))
    if "partition" in doc:
        changes["partition"] = _dataclass_from(PartitionConfig, doc["partition"], base.partition)
    if "birth_config" in doc:
        changes["birth_config"] = _dataclass_from(BirthConfig, doc["birth_config"], base.birth_config)
    if "births" in doc:
        births = []
        for b in doc["births"]:
            b = dict(b)
            allowed = {"r", "position", "alpha", "beta", "v", "V", "P"}
            if set(b) - allowed:
                raise ValueError(f"unknown birth keys: {sorted(set(b) - allowed)}")
            r = float(b.pop("r", BIRTH_R))
            births.append(BirthTemplate(r, birth_prior(b.pop("position"), **b)))
        changes["births"] = tuple(births)
    try:
        return dataclasses.replace(base, **changes)
    except TypeError as exc:
        raise ValueError(str(exc)) from None
