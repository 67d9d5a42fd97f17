"""Shared oracles and fixtures for the filter tests."""
import math

import numpy as np

from rfs_extent.ggiw import GGIWMixture, GGIWParams, singer_model
from rfs_extent.glmb import FilterConfig, update_glmb
from rfs_extent.labelled import Hypothesis, Label, normalize_glmb
from rfs_extent.likelihood import ClutterModel, brute_force_terms
from rfs_extent.partitioning import PartitionConfig

REGION = (np.array([-100.0, -100.0]), np.array([100.0, 100.0]))


def params_at(x, y=0.0, alpha=10.0, beta=1.0, v=10.0, V=None, P=None):
    m = np.zeros(6)
    m[:2] = (x, y)
    P = np.diag([4.0, 1.0, 0.25]) if P is None else P
    V = 20.0 * np.eye(2) if V is None else V
    return GGIWParams(alpha, beta, m, P, v, V)


def mix_at(x, y=0.0, **kw):
    return GGIWMixture.single(params_at(x, y, **kw))


def exact_config(p_D=0.8, clutter_rate=5.0, **kw):
    """Truncation-free settings: every partition, no gating, no budgets."""
    base = dict(
        motion=singer_model(),
        clutter=ClutterModel(clutter_rate, *REGION),
        p_D=p_D,
        n_predict_components=None,
        n_update_components=None,
        max_components=10**6,
        partition=PartitionConfig(exhaustive=True),
        gate=None,
    )
    base.update(kw)
    return FilterConfig(**base)


def single_component(tracks, log_weight=0.0):
    """Normalised one-component GLMB from ``{label: mixture}``."""
    return normalize_glmb([Hypothesis.from_tracks(log_weight, tracks)])


def oracle_posterior(pred, Z, cfg):
    """Posterior by exhaustive enumeration: ``{(component, association): (log weight, densities)}``.

    Log-weights are unnormalised: prior log-weight plus the brute-force term.
    """
    out = {}
    for ci, comp in enumerate(pred.components):
        tracks = list(zip(comp.densities, comp.labels))
        for assoc, log_term, posts, _ in brute_force_terms(tracks, Z, cfg.p_D, cfg.clutter, cfg.H, cfg.literal_misdetect):
            if math.isfinite(log_term):
                out[(ci, assoc)] = (comp.log_weight + log_term, posts)
    return out


def logsumexp(values):
    a = np.asarray(list(values), dtype=float)
    top = a.max()
    return float(top + math.log(np.exp(a - top).sum()))


def compare_with_oracle(pred, Z, cfg, rtol=1e-9):
    """Largest relative weight error of the filter update against the oracle.

    Also checks that the association sets agree and that every posterior
    density matches the oracle's parameters exactly (to rounding).
    """
    post = update_glmb(pred, Z, cfg)
    ref = oracle_posterior(pred, Z, cfg)
    total = logsumexp(lw for lw, _ in ref.values())
    got = {c.meta: c for c in post.components}
    assert set(got) == set(ref), (sorted(set(got) ^ set(ref), key=str))[:5]
    worst = 0.0
    for key, (lw, posts) in ref.items():
        w_ref = math.exp(lw - total)
        w = math.exp(got[key].log_weight)
        worst = max(worst, abs(w - w_ref) / w_ref)
        for a, b in zip(got[key].densities, posts):
            for ca, cb in zip(a.components, b.components):
                assert ca.allclose(cb, rtol=1e-12, atol=1e-12)
    return worst


def random_instance(rng, n_tracks, n_meas, spread=15.0):
    """Predicted GLMB (one or two components) and a scan near the tracks."""
    tracks = {Label(0, i): mix_at(*rng.uniform(-spread, spread, size=2)) for i in range(n_tracks)}
    comps = [Hypothesis.from_tracks(0.0, tracks)]
    if n_tracks and rng.random() < 0.5:
        keep = dict(list(tracks.items())[:-1])
        comps.append(Hypothesis.from_tracks(math.log(rng.uniform(0.1, 1.0)), keep))
    pred = normalize_glmb(comps)
    Z = rng.uniform(-spread - 5, spread + 5, size=(n_meas, 2))
    return pred, Z
