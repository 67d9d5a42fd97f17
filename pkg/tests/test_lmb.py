import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from helpers import exact_config, mix_at

from rfs_extent.config import scenario_config
from rfs_extent.glmb import BirthTemplate, ranked_subsets, update_glmb, update_lmb_group
from rfs_extent.labelled import Label, LMBDensity, LMBTrack, glmb_to_lmb, lmb_to_glmb
from rfs_extent.lmb import LMBFilter, LMBState, adaptive_births, predict_lmb, report, step_lmb, update_lmb
from rfs_extent.partitioning import PartitionConfig
from rfs_extent.simulation import ScenarioSpec, TargetSpec, generate

A, B = Label(0, 0), Label(0, 1)


def lmb(**rs_at):
    """``lmb(a=(r, x), b=(r, x))`` with labels 0.0, 0.1, ..."""
    return LMBDensity({Label(0, i): LMBTrack(r, mix_at(x)) for i, (r, x) in enumerate(rs_at.values())})


# ---------------------------------------------------------------- prediction


def test_prediction_scales_existence():
    cfg = exact_config(p_S=0.99)
    pred = predict_lmb(lmb(a=(0.5, 0.0)), LMBDensity.empty(), cfg)
    assert pred.tracks[A].r == pytest.approx(0.495, rel=1e-15)


def test_prediction_of_empty_is_birth():
    birth = LMBDensity({Label(3, 0): LMBTrack(0.03, mix_at(0))})
    assert predict_lmb(LMBDensity.empty(), birth, exact_config()).tracks == birth.tracks
    assert predict_lmb(None, birth, exact_config()).tracks == birth.tracks


def test_certain_survival_keeps_existence():
    post = lmb(a=(0.3, 0.0), b=(0.8, 40.0))
    pred = predict_lmb(post, LMBDensity.empty(), exact_config(p_S=1.0))
    assert {l: t.r for l, t in pred.tracks.items()} == {A: 0.3, B: 0.8}


def test_prediction_label_collision():
    with pytest.raises(ValueError):
        predict_lmb(lmb(a=(0.5, 0.0)), LMBDensity({A: LMBTrack(0.1, mix_at(0))}), exact_config())


# -------------------------------------------------------------------- update


def test_independent_groups_update_separately():
    rng = np.random.default_rng(0)
    cfg = exact_config(p_D=0.9, partition=PartitionConfig(exhaustive=True))
    pred = lmb(a=(0.7, -60.0), b=(0.4, 60.0))
    Z = np.vstack([[-60.0, 0.0] + rng.normal(size=(2, 2)), [60.0, 0.0] + rng.normal(size=(2, 2))])
    joint = glmb_to_lmb(update_glmb(lmb_to_glmb(pred), Z, cfg), reduce=False)
    sep_a = glmb_to_lmb(update_glmb(lmb_to_glmb(pred.subset([A])), Z[:2], cfg), reduce=False)
    sep_b = glmb_to_lmb(update_glmb(lmb_to_glmb(pred.subset([B])), Z[2:], cfg), reduce=False)
    for l, sep in ((A, sep_a), (B, sep_b)):
        assert joint.tracks[l].r == pytest.approx(sep.tracks[l].r, rel=1e-9)
        mj, ms = joint.tracks[l].density, sep.tracks[l].density
        mean_j = sum(w * c.m for w, c in zip(mj.weights, mj.components))
        mean_s = sum(w * c.m for w, c in zip(ms.weights, ms.components))
        np.testing.assert_allclose(mean_j, mean_s, rtol=1e-9, atol=1e-9)


def test_update_lmb_groups_concatenate():
    rng = np.random.default_rng(1)
    cfg = exact_config(p_D=0.9, partition=PartitionConfig(), gate=0.999)
    pred = lmb(a=(0.7, -60.0), b=(0.4, 60.0))
    Z = np.vstack([[-60.0, 0.0] + rng.normal(size=(4, 2)), [60.0, 0.0] + rng.normal(size=(3, 2))])
    both = update_lmb(pred, Z, cfg)
    only_a = update_lmb(pred.subset([A]), Z[:4], cfg)
    only_b = update_lmb(pred.subset([B]), Z[4:], cfg)
    assert both.tracks[A].r == pytest.approx(only_a.tracks[A].r, rel=1e-12)
    assert both.tracks[B].r == pytest.approx(only_b.tracks[B].r, rel=1e-12)


def test_certain_track_with_empty_scan():
    cfg = exact_config(p_D=0.8)
    pred = lmb(a=(1.0, 0.0))
    post = update_lmb(pred, np.zeros((0, 2)), cfg)
    assert post.tracks[A].r == 1.0
    assert post.tracks[A].density is pred.tracks[A].density


def test_adaptive_birth_from_far_cluster():
    rng = np.random.default_rng(2)
    cfg = exact_config(p_D=0.9, partition=PartitionConfig(), gate=0.999, adaptive_birth=True, births=(BirthTemplate(0.03, mix_at(0)),))
    pred = lmb(a=(0.5, 0.0))
    Z = [80.0, 80.0] + 2.0 * rng.normal(size=(5, 2))
    post = update_lmb(pred, Z, cfg, k=7)
    assert set(post.tracks) == {A, Label(7, 1)}
    born = post.tracks[Label(7, 1)]
    assert born.r == pytest.approx(0.1)
    np.testing.assert_allclose(born.density.components[0].position, Z.mean(axis=0), rtol=1e-13)
    # four points are not enough
    post4 = update_lmb(pred, Z[:4], cfg, k=7)
    assert set(post4.tracks) == {A}


def test_adaptive_birth_labels_start_after_static_births():
    rng = np.random.default_rng(3)
    cfg = exact_config(adaptive_birth=True, births=(BirthTemplate(0.03, mix_at(0)), BirthTemplate(0.03, mix_at(50))))
    Z = np.vstack([[-50.0, -50.0] + rng.normal(size=(6, 2)), [50.0, -50.0] + rng.normal(size=(6, 2))])
    born = adaptive_births(Z, cfg, k=4, first_index=len(cfg.births))
    assert born.labels == [Label(4, 2), Label(4, 3)]


costs = st.floats(0.0, 20.0) | st.just(math.inf)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(costs, costs), max_size=7))
def test_ranked_subsets_match_enumeration(pairs):
    cin, cout = [p[0] for p in pairs], [p[1] for p in pairs]
    got = list(ranked_subsets(cin, cout))
    ref = []
    for flags in itertools.product((True, False), repeat=len(pairs)):
        c = sum(ci if f else co for f, ci, co in zip(flags, cin, cout))
        if math.isfinite(c):
            ref.append((c, flags))
    assert sorted(f for _, f in got) == sorted(f for _, f in ref)
    assert all(a[0] <= b[0] + 1e-9 for a, b in zip(got, got[1:]))
    for c, f in got:
        assert c == pytest.approx(dict((fl, cc) for cc, fl in ref)[f], abs=1e-9)


def _lmb_instance(seed, n_tracks):
    rng = np.random.default_rng(seed)
    tracks = {Label(0, i): LMBTrack(float(rng.choice([rng.uniform(0.01, 0.99), 1.0])), mix_at(rng.uniform(-15, 15))) for i in range(n_tracks)}
    Z = rng.uniform(-25, 25, size=(int(rng.integers(1, 8)), 2))
    return LMBDensity(tracks), Z


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("budget", [None, 3, 20])
def test_lazy_group_update_matches_full_conversion(seed, budget):
    lmb, Z = _lmb_instance(seed, 1 + seed % 4)
    cfg = exact_config(p_D=0.85, partition=PartitionConfig(), gate=0.999, n_update_components=budget)
    full = update_glmb(lmb_to_glmb(lmb), Z, cfg)
    lazy = update_lmb_group(lmb, Z, cfg)

    def by_key(g):
        return {(c.labels, c.meta[1]): w for c, w in zip(g.components, g.weights)}

    ref, got = by_key(full), by_key(lazy)
    assert set(got) == set(ref)
    for k, w in ref.items():
        assert got[k] == pytest.approx(w, rel=1e-12)
    a, b = glmb_to_lmb(full, reduce=False), glmb_to_lmb(lazy, reduce=False)
    for l in a.tracks:
        assert b.tracks[l].r == pytest.approx(a.tracks[l].r, rel=1e-12)


def test_expected_cardinality_preserved_by_conversion():
    rng = np.random.default_rng(4)
    cfg = exact_config(p_D=0.85, partition=PartitionConfig(exhaustive=True))
    pred = lmb(a=(0.6, 0.0), b=(0.3, 8.0))
    g = update_glmb(lmb_to_glmb(pred), rng.normal(scale=5.0, size=(3, 2)), cfg)
    assert glmb_to_lmb(g).expected_cardinality() == pytest.approx(g.expected_cardinality(), rel=1e-9)


# ----------------------------------------------------------------- recursion


@pytest.mark.filterwarnings("ignore::rfs_extent.ggiw.DegradedEstimateWarning")
def test_misdetections_decay_existence():
    cfg = exact_config(p_D=0.8, p_S=1.0)
    state = LMBState(lmb(a=(0.99, 0.0)), 1, frozenset({A}))
    r = 0.99
    for _ in range(3):
        state, est = step_lmb(state, np.zeros((0, 2)), cfg)
        r = r * 0.2 / (1 - r + r * 0.2)
        assert state.density.tracks[A].r == pytest.approx(r, rel=1e-12)
    assert r < 0.5
    # still shown through the hysteresis band, dropped on the next miss
    assert [e.label for e in est] == [A]
    state, est = step_lmb(state, np.zeros((0, 2)), cfg)
    assert est == []
    fresh, _ = report(state.density, cfg)
    assert fresh == []


def test_report_threshold_and_hysteresis():
    cfg = exact_config()
    dens = lmb(a=(0.45, 0.0), b=(0.6, 30.0))
    est, shown = report(dens, cfg)
    assert [e.label for e in est] == [B] and shown == {B}
    est, shown = report(dens, cfg, previous=frozenset({A}))
    assert [e.label for e in est] == [A, B]
    assert est[0].r == 0.45


def _run(spec, name="lmb"):
    flt = LMBFilter(scenario_config(spec, name))
    ests, rs = [], []
    for rec in generate(spec):
        ests.append(flt.step(rec.Z))
        rs.append([t.r for t in flt.density.tracks.values()])
    return ests, rs


def test_steady_target_reported_after_two_steps():
    spec = ScenarioSpec(30, (TargetSpec(0, 30, ((0, 0.0, 0.0), (30, 60.0, 60.0))),), 0.98, 5.0, region=((-300.0, 300.0), (-300.0, 300.0)), seed=2)
    ests, rs = _run(spec)
    assert [len(e) for e in ests[2:]] == [1] * 28
    assert len({e[0].label for e in ests[2:]}) == 1
    assert all(0.0 <= r <= 1.0 for step in rs for r in step)


def test_pure_clutter_gives_no_estimates():
    spec = ScenarioSpec(30, (), 0.9, 10.0, seed=5)
    ests, _ = _run(spec)
    assert all(e == [] for e in ests)


def test_tracks_below_threshold_are_deleted():
    cfg = exact_config(p_D=0.99, delete_threshold=1e-3)
    post = update_lmb(lmb(a=(0.002, 0.0)), np.zeros((0, 2)), cfg)
    assert A not in post.tracks
