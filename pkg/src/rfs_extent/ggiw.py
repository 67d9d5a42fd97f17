"""Gamma Gaussian inverse-Wishart (GGIW) single extended-target densities.

A GGIW density factorises into a gamma density on the Poisson measurement
rate, a Gaussian on the kinematic state whose covariance is ``P (x) chi``
(Kronecker product with the extent) and an inverse-Wishart density on the
extent ``chi``.  The inverse-Wishart is parameterised so that its density is
proportional to ``|V|^((v-d-1)/2) |chi|^(-v/2) exp(-tr(V chi^-1)/2)``,
which requires ``v > 2d``.

Kinematic means are stored flat, block-ordered: the first ``d`` entries are
the position, the next ``d`` the velocity, and so on (``s`` blocks).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DOF_EPS = 1e-6
_LOG_PI = math.log(math.pi)


class DimensionError(ValueError):
    pass


class DegradedEstimateWarning(UserWarning):
    """Raised when the inverse-Wishart mean does not exist and the mode is used."""


def _frozen(a, ndim):
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise DimensionError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GGIWParams:
    alpha: float
    beta: float
    m: np.ndarray
    P: np.ndarray
    v: float
    V: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", _frozen(self.m, 1))
        object.__setattr__(self, "P", _frozen(self.P, 2))
        object.__setattr__(self, "V", _frozen(self.V, 2))
        s, d = self.P.shape[0], self.V.shape[0]
        if self.P.shape != (s, s) or self.V.shape != (d, d):
            raise DimensionError("P and V must be square")
        if self.m.shape[0] != s * d:
            raise DimensionError(f"len(m)={self.m.shape[0]} != s*d={s * d}")

    @property
    def d(self) -> int:
        return self.V.shape[0]

    @property
    def s(self) -> int:
        return self.P.shape[0]

    @property
    def position(self) -> np.ndarray:
        return self.m[: self.d]

    @property
    def rate_mean(self) -> float:
        return self.alpha / self.beta

    def validate(self):
        """Check the full set of parameter invariants, raising ``ValueError``."""
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")
        if not self.v > 2 * self.d:
            raise ValueError(f"v={self.v} must exceed 2d={2 * self.d}")
        if np.any(np.linalg.eigvalsh(self.V) <= 0):
            raise ValueError("V must be positive definite")
        if np.any(np.linalg.eigvalsh(self.P) < -1e-12 * max(1.0, np.abs(self.P).max())):
            raise ValueError("P must be positive semidefinite")
        return self

    def allclose(self, other: "GGIWParams", rtol=1e-9, atol=0.0) -> bool:
        return (
            np.isclose(self.alpha, other.alpha, rtol=rtol, atol=atol)
            and np.isclose(self.beta, other.beta, rtol=rtol, atol=atol)
            and np.isclose(self.v, other.v, rtol=rtol, atol=atol)
            and np.allclose(self.m, other.m, rtol=rtol, atol=atol)
            and np.allclose(self.P, other.P, rtol=rtol, atol=atol)
            and np.allclose(self.V, other.V, rtol=rtol, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class GGIWMixture:
    """Weighted GGIW mixture; weights are normalised on construction."""

    weights: np.ndarray
    components: tuple

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        comps = tuple(self.components)
        if len(comps) == 0 or len(comps) != w.shape[0]:
            raise ValueError("mixture needs one weight per component and at least one component")
        total = w.sum()
        if not total > 0:
            raise ValueError("mixture weights must have a positive sum")
        w = w / total
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, params: GGIWParams) -> "GGIWMixture":
        return cls(np.ones(1), (params,))

    def __len__(self):
        return len(self.components)

    @property
    def best(self) -> GGIWParams:
        return self.components[int(np.argmax(self.weights))]


@dataclass(frozen=True, eq=False)
class MotionModel:
    F: np.ndarray
    Q: np.ndarray
    T: float = 1.0
    mu: float = 1.25
    tau: float = 5.0
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "F", _frozen(self.F, 2))
        object.__setattr__(self, "Q", _frozen(self.Q, 2))
        if self.F.shape != self.Q.shape or self.F.shape[0] != self.F.shape[1]:
            raise DimensionError("F and Q must be square and of equal size")
        if not (self.mu > 1 and self.tau > 0 and self.T > 0):
            raise ValueError("need mu > 1, tau > 0, T > 0")

    @property
    def s(self) -> int:
        return self.F.shape[0]


def forgetting_factor(window: float) -> float:
    """Gamma forgetting factor for an exponential window of length ``window > 1``."""
    if window <= 1:
        raise ValueError("window length must exceed 1")
    return 1.0 / (1.0 - 1.0 / window)


def singer_model(T=1.0, theta=1.0, sigma=0.1, mu=1.25, tau=5.0) -> MotionModel:
    """Position/velocity/acceleration model with exponentially correlated acceleration."""
    F = np.array(
        [
            [1.0, T, 0.5 * T**2],
            [0.0, 1.0, T],
            [0.0, 0.0, math.exp(-T / theta)],
        ]
    )
    Q = sigma**2 * (1.0 - math.exp(-2.0 * T / theta)) * np.diag([0.0, 0.0, 1.0])
    return MotionModel(F, Q, T=T, mu=mu, tau=tau, extras={"kind": "singer", "theta": theta, "sigma": sigma})


def constant_velocity_model(T=1.0, sigma=1.0, mu=1.25, tau=5.0) -> MotionModel:
    F = np.array([[1.0, T], [0.0, 1.0]])
    Q = sigma**2 * np.array([[T**4 / 4, T**3 / 2], [T**3 / 2, T**2]])
    return MotionModel(F, Q, T=T, mu=mu, tau=tau, extras={"kind": "cv", "sigma": sigma})


def observation_row(s: int) -> np.ndarray:
    """Row selecting the position block, e.g. ``[1, 0, 0]`` for ``s = 3``."""
    H = np.zeros(s)
    H[0] = 1.0
    return H


# ---------------------------------------------------------------- prediction


def predict_ggiw(prior: GGIWParams, model: MotionModel) -> GGIWParams:
    s, d = prior.s, prior.d
    if model.s != s:
        raise DimensionError(f"motion model order {model.s} != state order {s}")
    F = model.F
    m = (F @ prior.m.reshape(s, d)).reshape(-1)
    P = F @ prior.P @ F.T + model.Q
    v = math.exp(-model.T / model.tau) * prior.v
    # dof floor keeps the density proper; V/(v-d-1) is preserved through the clamp
    v = max(v, 2 * d + DOF_EPS)
    V = ((v - d - 1) / (prior.v - d - 1)) * prior.V
    return GGIWParams(prior.alpha / model.mu, prior.beta / model.mu, m, P, v, V)


def predict_mixture(mix: GGIWMixture, model: MotionModel) -> GGIWMixture:
    return GGIWMixture(mix.weights, tuple(predict_ggiw(c, model) for c in mix.components))


# -------------------------------------------------------------------- update


@dataclass(frozen=True)
class GroupStats:
    """Sufficient statistics of a measurement group: size, mean and scatter."""

    n: int
    mean: np.ndarray
    scatter: np.ndarray

    @classmethod
    def of(cls, W) -> "GroupStats":
        W = np.atleast_2d(np.asarray(W, dtype=float))
        n = W.shape[0]
        if n == 0:
            raise ValueError("measurement group must be non-empty")
        mean = W.mean(axis=0)
        dev = W - mean
        return cls(n, mean, dev.T @ dev)


def _logdet(A):
    if A.shape == (2, 2):
        det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        return math.log(det) if det > 0 else -math.inf
    if A.shape == (1, 1):
        return math.log(A[0, 0]) if A[0, 0] > 0 else -math.inf
    sign, ld = np.linalg.slogdet(A)
    return ld if sign > 0 else -math.inf


def log_multigamma(a: float, d: int) -> float:
    return 0.25 * d * (d - 1) * _LOG_PI + sum(math.lgamma(a - 0.5 * j) for j in range(d))


def log_eta_gamma(alpha: float, beta: float, n: int) -> float:
    """Log negative-binomial evidence of ``n`` detections under a gamma rate prior."""
    return (
        math.lgamma(alpha + n)
        - math.lgamma(alpha)
        - math.lgamma(n + 1)
        + alpha * math.log(beta)
        - (alpha + n) * math.log(beta + 1.0)
    )


def update_ggiw_stats(prior: GGIWParams, stats: GroupStats, H) -> tuple[GGIWParams, float]:
    s, d, n = prior.s, prior.d, stats.n
    H = np.asarray(H, dtype=float).reshape(-1)
    if H.shape[0] != s or stats.mean.shape[0] != d:
        raise DimensionError("observation row or measurement dimension mismatch")
    M = prior.m.reshape(s, d)
    eps = stats.mean - H @ M
    PH = prior.P @ H
    S = float(H @ PH) + 1.0 / n
    K = PH / S
    m = (M + np.outer(K, eps)).reshape(-1)
    P = prior.P - S * np.outer(K, K)
    N = np.outer(eps, eps) / S
    v = prior.v + n
    V = prior.V + N + stats.scatter
    post = GGIWParams(prior.alpha + n, prior.beta + 1.0, m, P, v, V)

    a0 = 0.5 * (prior.v - d - 1)
    a1 = 0.5 * (v - d - 1)
    log_eta_x = (
        -0.5 * d * (n * _LOG_PI + math.log(n) + math.log(S))
        + a0 * _logdet(prior.V)
        - a1 * _logdet(V)
        + log_multigamma(a1, d)
        - log_multigamma(a0, d)
    )
    return post, log_eta_gamma(prior.alpha, prior.beta, n) + log_eta_x


def update_ggiw(prior: GGIWParams, W, H) -> tuple[GGIWParams, float]:
    """Update with a non-empty measurement set ``W`` (shape ``(n, d)``).

    Returns the posterior parameters and the log Bayes evidence (rate part
    plus kinematic/extent part).
    """
    W = np.asarray(W, dtype=float)
    if W.size == 0:
        raise ValueError("update_ggiw needs at least one measurement; misdetection is handled by the caller")
    return update_ggiw_stats(prior, GroupStats.of(W), H)


def update_mixture_stats(mix: GGIWMixture, stats: GroupStats, H) -> tuple[GGIWMixture, float]:
    posts, logs = [], np.empty(len(mix))
    for i, comp in enumerate(mix.components):
        post, le = update_ggiw_stats(comp, stats, H)
        posts.append(post)
        logs[i] = le
    lw = np.log(mix.weights) + logs
    top = lw.max()
    total = top + math.log(np.exp(lw - top).sum())
    return GGIWMixture(np.exp(lw - total), tuple(posts)), float(total)


# -------------------------------------------------------------- misdetection


def log_evidence_misdetect(prior: GGIWParams, p_D: float, literal_mode: bool = True) -> float:
    if not 0.0 <= p_D <= 1.0:
        raise ValueError("p_D must lie in [0, 1]")
    if literal_mode:
        q = 1.0 - p_D
    else:
        q = 1.0 - p_D + p_D * (prior.beta / (prior.beta + 1.0)) ** prior.alpha
    return math.log(q) if q > 0 else -math.inf


def misdetect_ggiw(prior: GGIWParams, p_D: float, literal_mode: bool = True) -> GGIWParams:
    """Posterior after a missed detection.

    In literal mode the density is left unchanged.  Otherwise the gamma part
    is the moment-matched mixture of "not detected" and "detected but zero
    measurements".
    """
    if literal_mode or p_D == 0.0:
        return prior
    a, b = prior.alpha, prior.beta
    c = p_D * (b / (b + 1.0)) ** a
    z = 1.0 - p_D + c
    mean = ((1.0 - p_D) * a / b + c * a / (b + 1.0)) / z
    second = ((1.0 - p_D) * a * (a + 1) / b**2 + c * a * (a + 1) / (b + 1.0) ** 2) / z
    var = second - mean**2
    return GGIWParams(mean**2 / var, mean / var, prior.m, prior.P, prior.v, prior.V)


def misdetect_mixture(mix: GGIWMixture, p_D: float, literal_mode: bool = True) -> tuple[GGIWMixture, float]:
    if literal_mode:
        q = 1.0 - p_D
        return mix, (math.log(q) if q > 0 else -math.inf)
    logs = np.array([log_evidence_misdetect(c, p_D, False) for c in mix.components])
    lw = np.log(mix.weights) + logs
    top = lw.max()
    total = top + math.log(np.exp(lw - top).sum())
    comps = tuple(misdetect_ggiw(c, p_D, False) for c in mix.components)
    return GGIWMixture(np.exp(lw - total), comps), float(total)


# ---------------------------------------------------------------- estimation


def extent_point_estimate(params: GGIWParams) -> np.ndarray:
    """Inverse-Wishart mean ``V / (v - 2d - 2)``; falls back to the mode ``V / v``."""
    d = params.d
    denom = params.v - 2 * d - 2
    if denom > 0:
        return params.V / denom
    warnings.warn(
        f"v={params.v:.4g} <= 2d+2, extent mean undefined; returning the mode",
        DegradedEstimateWarning,
        stacklevel=2,
    )
    return params.V / params.v


def _extent_for_gating(params: GGIWParams) -> np.ndarray:
    denom = params.v - 2 * params.d - 2
    return params.V / denom if denom > 0 else params.V / params.v


# ---------------------------------------------------------- mixture reduction


def _merge(weights: Sequence[float], comps: Sequence[GGIWParams]) -> GGIWParams:
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    s, d = comps[0].s, comps[0].d
    Ms = np.stack([c.m.reshape(s, d) for c in comps])
    M = np.tensordot(w, Ms, axes=1)
    X = sum(wi * _extent_for_gating(c) for wi, c in zip(w, comps))
    Xinv = np.linalg.inv(X)
    P = np.zeros((s, s))
    for wi, c, Mi in zip(w, comps, Ms):
        D = Mi - M
        # project the spread of the means onto the P (x) X structure
        P += wi * (c.P + D @ Xinv @ D.T / d)
    return GGIWParams(
        float(np.dot(w, [c.alpha for c in comps])),
        float(np.dot(w, [c.beta for c in comps])),
        M.reshape(-1),
        P,
        float(np.dot(w, [c.v for c in comps])),
        sum(wi * c.V for wi, c in zip(w, comps)),
    )


def _kinematic_mahalanobis2(a: GGIWParams, ref: GGIWParams) -> float:
    s, d = ref.s, ref.d
    D = a.m.reshape(s, d) - ref.m.reshape(s, d)
    Pinv = np.linalg.pinv(ref.P)
    Xinv = np.linalg.inv(_extent_for_gating(ref))
    # vec(D)^T (P (x) X)^-1 vec(D) with row-blocked D
    return float(np.trace(Pinv @ D @ Xinv @ D.T))


def reduce_mixture(
    mix: GGIWMixture,
    prune_thresh: float = 1e-3,
    max_components: int = 10,
    merge_gate: float = 1.0,
) -> GGIWMixture:
    """Prune, merge close components, cap the component count, renormalise."""
    if len(mix) == 1:
        return mix
    w = mix.weights
    keep = [i for i in range(len(mix)) if w[i] >= prune_thresh]
    if not keep:
        keep = [int(np.argmax(w))]
    order = sorted(keep, key=lambda i: -w[i])
    remaining = list(order)
    out_w, out_c = [], []
    while remaining:
        j = remaining[0]
        ref = mix.components[j]
        group = [i for i in remaining if i == j or _kinematic_mahalanobis2(mix.components[i], ref) <= merge_gate]
        remaining = [i for i in remaining if i not in group]
        gw = [w[i] for i in group]
        if len(group) == 1:
            out_c.append(ref)
        else:
            out_c.append(_merge(gw, [mix.components[i] for i in group]))
        out_w.append(sum(gw))
    order = np.argsort(-np.asarray(out_w), kind="stable")[:max_components]
    return GGIWMixture(np.asarray(out_w)[order], tuple(out_c[i] for i in order))
