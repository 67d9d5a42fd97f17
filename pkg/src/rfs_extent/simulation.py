"""Ground truth and measurement generation for extended-target scenarios."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .labelled import Label


@dataclass(frozen=True)
class TargetSpec:
    """One true target.

    The trajectory is a shape-preserving cubic (PCHIP) through ``waypoints``
    (``(step, x, y)`` rows) evaluated at every step in ``[birth, death)``, so
    straight or constant stretches between waypoints stay exact.  Velocity
    and acceleration come from the interpolant's derivatives.
    """

    birth: int
    death: int
    waypoints: tuple
    extent: tuple = ((25.0, 0.0), (0.0, 25.0))
    rate: float = 10.0
    always_detected: bool = False
    missed_steps: tuple = ()

    def validate(self, steps: int):
        if not 0 <= self.birth < self.death <= steps:
            raise ValueError(f"need 0 <= birth < death <= steps, got {self.birth}, {self.death}")
        if self.rate <= 0:
            raise ValueError("measurement rate must be positive")
        X = np.asarray(self.extent, dtype=float)
        if X.shape[0] != X.shape[1] or not np.allclose(X, X.T) or np.any(np.linalg.eigvalsh(X) <= 0):
            raise ValueError("extent must be symmetric positive definite")
        wp = np.asarray(self.waypoints, dtype=float)
        if wp.ndim != 2 or wp.shape[0] < 2 or wp.shape[1] != X.shape[0] + 1:
            raise ValueError("waypoints need at least two (step, position...) rows")


@dataclass(frozen=True)
class ScenarioSpec:
    steps: int
    targets: tuple
    p_D: float
    clutter_rate: float
    region: tuple = ((-1000.0, 1000.0), (-1000.0, 1000.0))
    seed: int = 0
    name: str = "custom"

    def validate(self) -> "ScenarioSpec":
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0.0 <= self.p_D <= 1.0 or self.clutter_rate < 0:
            raise ValueError("need p_D in [0, 1] and a non-negative clutter rate")
        for t in self.targets:
            t.validate(self.steps)
        return self

    def with_seed(self, seed: int) -> "ScenarioSpec":
        return ScenarioSpec(self.steps, self.targets, self.p_D, self.clutter_rate, self.region, seed, self.name)

    # JSON round trip for user-defined scenarios
    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioSpec":
        allowed = {"steps", "targets", "p_D", "clutter_rate", "region", "seed", "name"}
        unknown = set(doc) - allowed
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        targets = []
        for t in doc["targets"]:
            t = dict(t)
            t["waypoints"] = tuple(tuple(map(float, w)) for w in t["waypoints"])
            if "extent" in t:
                t["extent"] = tuple(tuple(map(float, r)) for r in t["extent"])
            t["missed_steps"] = tuple(t.get("missed_steps", ()))
            targets.append(TargetSpec(**t))
        region = tuple(tuple(map(float, r)) for r in doc.get("region", ((-1000.0, 1000.0), (-1000.0, 1000.0))))
        return cls(
            int(doc["steps"]), tuple(targets), float(doc["p_D"]), float(doc["clutter_rate"]),
            region, int(doc.get("seed", 0)), str(doc.get("name", "custom")),
        ).validate()


@dataclass(frozen=True)
class TruthRecord:
    label: Label
    x: np.ndarray
    chi: np.ndarray
    gamma: float


@dataclass(frozen=True)
class StepRecord:
    k: int
    truth: tuple
    Z: np.ndarray


def _trajectory(t: TargetSpec, order: int = 3) -> np.ndarray:
    """Kinematic states (steps x order*d) over the target's lifetime."""
    wp = np.asarray(t.waypoints, dtype=float)
    curve = PchipInterpolator(wp[:, 0], wp[:, 1:])
    ks = np.arange(t.birth, t.death, dtype=float)
    blocks = [curve(ks, nu) for nu in range(order)]
    return np.concatenate(blocks, axis=1)


def generate(spec: ScenarioSpec) -> list[StepRecord]:
    """Sample a scenario log.

    Every target draws its detection flag, count and points at every live
    step even when the detection is forced, so two specs differing only in
    forced misses produce aligned random streams.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    region = np.asarray(spec.region, dtype=float)
    lo, hi = region[:, 0], region[:, 1]
    d = region.shape[0]
    trajs = [_trajectory(t) for t in spec.targets]
    log = []
    for k in range(spec.steps):
        truth, Z = [], []
        for i, (t, traj) in enumerate(zip(spec.targets, trajs)):
            if not t.birth <= k < t.death:
                continue
            x = traj[k - t.birth]
            chi = np.asarray(t.extent, dtype=float)
            truth.append(TruthRecord(Label(t.birth, i), x, chi, float(t.rate)))
            detected = rng.random() < spec.p_D
            count = rng.poisson(t.rate)
            pts = rng.multivariate_normal(x[:d], chi, size=count, method="cholesky")
            if t.always_detected:
                detected = True
            if k in t.missed_steps:
                detected = False
            if detected and count:
                Z.append(pts)
        n_c = rng.poisson(spec.clutter_rate)
        Z.append(lo + (hi - lo) * rng.random((n_c, d)))
        Z = np.concatenate(Z, axis=0) if Z else np.zeros((0, d))
        # keep only points inside the region, targets are placed with margin
        Z = Z[np.all((Z >= lo) & (Z <= hi), axis=1)]
        log.append(StepRecord(k, tuple(truth), Z))
    return log


# --------------------------------------------------------------- scenarios


def _radial(birth, death, angle_deg, speed, start=(0.0, 0.0)):
    a = math.radians(angle_deg)
    u = np.array([math.cos(a), math.sin(a)])
    s0 = np.asarray(start, dtype=float)
    ks = np.linspace(birth, death, 4)
    return tuple((float(k), *(s0 + speed * (k - birth) * u)) for k in ks)


def builtin_scenario(sid: int, gap: float = 20.0) -> ScenarioSpec:
    """Built-in scenarios 1-3.

    1: four targets leaving the origin at different times, 200 steps.
    2: two targets approaching, moving in parallel ``gap`` apart, separating.
    3: two targets far apart, target 1 missed at steps 20, 40 and 41.
    """
    if sid == 1:
        targets = (
            TargetSpec(0, 160, _radial(0, 160, 30, 5.0)),
            TargetSpec(20, 200, _radial(20, 200, 150, 4.0)),
            TargetSpec(40, 140, _radial(40, 140, 250, 6.0)),
            TargetSpec(60, 190, _radial(60, 190, 320, 5.0)),
        )
        return ScenarioSpec(200, targets, 0.8, 30.0, name="scenario-1").validate()
    if sid == 2:
        h = gap / 2.0
        wp0 = ((0, -500, 150), (15, -350, 75), (30, -200, h), (50, 0, h), (70, 200, h), (85, 350, 75), (100, 500, 150))
        wp1 = tuple((k, x, -y) for k, x, y in wp0)
        targets = (TargetSpec(0, 100, wp0), TargetSpec(0, 100, wp1))
        return ScenarioSpec(100, targets, 0.98, 10.0, name="scenario-2").validate()
    if sid == 3:
        wp0 = ((0, -600, -200), (49, -600, 290))
        wp1 = ((0, 600, -200), (49, 600, 290))
        targets = (
            TargetSpec(0, 50, wp0, always_detected=True),
            TargetSpec(0, 50, wp1, always_detected=True, missed_steps=(20, 40, 41)),
        )
        return ScenarioSpec(50, targets, 0.9, 10.0, name="scenario-3").validate()
    raise ValueError(f"unknown scenario id {sid!r}")


# ------------------------------------------------------------- JSON Lines


def _num(x) -> str:
    return "%.17g" % float(x)


def _vec(a) -> str:
    return "[" + ",".join(_num(v) for v in np.asarray(a).reshape(-1)) + "]"


def _mat(a) -> str:
    return "[" + ",".join(_vec(r) for r in np.atleast_2d(a)) + "]"


def record_to_json(rec: StepRecord) -> str:
    truth = ",".join(
        '{"label":"%s","x":%s,"chi":%s,"gamma":%s}' % (t.label, _vec(t.x), _mat(t.chi), _num(t.gamma))
        for t in rec.truth
    )
    Z = "[" + ",".join(_vec(z) for z in rec.Z) + "]"
    return '{"k":%d,"truth":[%s],"Z":%s}' % (rec.k, truth, Z)


def record_from_json(line: str, d: int = 2) -> StepRecord:
    doc = json.loads(line)
    truth = tuple(
        TruthRecord(Label.parse(t["label"]), np.asarray(t["x"], dtype=float), np.asarray(t["chi"], dtype=float), float(t["gamma"]))
        for t in doc["truth"]
    )
    Z = np.asarray(doc["Z"], dtype=float).reshape(-1, d)
    return StepRecord(int(doc["k"]), truth, Z)


def write_log(log, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in log:
            fh.write(record_to_json(rec) + "\n")


class MalformedLine(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def read_log(path) -> list[StepRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(record_from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedLine(lineno, str(exc)) from None
    return out
