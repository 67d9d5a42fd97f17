import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfs_extent.ggiw import GGIWMixture, GGIWParams
from rfs_extent.labelled import (
    EmptyPosteriorError,
    GLMBDensity,
    Hypothesis,
    Label,
    LMBDensity,
    LMBTrack,
    extract_estimates,
    glmb_to_lmb,
    lmb_to_glmb,
    normalize_glmb,
    prune_glmb,
)


def mix_at(x, y=0.0):
    m = np.zeros(6)
    m[:2] = (x, y)
    return GGIWMixture.single(GGIWParams(10.0, 1.0, m, np.eye(3), 10.0, 100.0 * np.eye(2)))


A, B, C = Label(0, 0), Label(0, 1), Label(1, 0)


def test_label_order_and_text():
    assert Label(0, 5) < Label(1, 0) < Label(1, 2)
    assert str(Label(3, 7)) == "3.7"
    assert Label.parse("3.7") == Label(3, 7)
    with pytest.raises(ValueError):
        Label.parse("3")


def test_distinct_labels_enforced():
    with pytest.raises(ValueError):
        Hypothesis(0.0, (A, A), (mix_at(0), mix_at(1)))


def test_normalize_examples():
    g = normalize_glmb([Hypothesis(0.0, (), ()), Hypothesis(0.0, (A,), (mix_at(0),))])
    np.testing.assert_allclose(g.weights, [0.5, 0.5])
    np.testing.assert_allclose(g.cardinality, [0.5, 0.5])
    g = normalize_glmb([Hypothesis(3.2, (A,), (mix_at(0),))])
    assert g.weights[0] == 1.0
    g = normalize_glmb([Hypothesis(0.0, (), ()), Hypothesis(-math.inf, (A,), (mix_at(0),))])
    np.testing.assert_array_equal(g.weights, [1.0, 0.0])
    with pytest.raises(EmptyPosteriorError):
        normalize_glmb([Hypothesis(-math.inf, (), ())])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=12))
def test_normalized_weights_and_cardinality_sum_to_one(lws):
    comps = [Hypothesis(lw, tuple(Label(0, j) for j in range(i % 4)), tuple(mix_at(j) for j in range(i % 4))) for i, lw in enumerate(lws)]
    g = normalize_glmb(comps)
    assert g.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert g.cardinality.sum() == pytest.approx(1.0, abs=1e-9)
    for n in range(len(g.cardinality)):
        assert g.cardinality[n] == pytest.approx(sum(w for w, c in zip(g.weights, g.components) if len(c) == n), abs=1e-12)


def test_prune_examples():
    g = normalize_glmb([
        Hypothesis(math.log(0.7), (A,), (mix_at(0),)),
        Hypothesis(math.log(0.2), (B,), (mix_at(1),)),
        Hypothesis(math.log(0.1), (), ()),
    ])
    assert prune_glmb(g, 5) is g
    p = prune_glmb(g, 2)
    np.testing.assert_allclose(p.weights, [7 / 9, 2 / 9], rtol=1e-14)
    p = prune_glmb(g, 1)
    assert p.components[0].labels == (A,) and p.weights[0] == 1.0


def test_prune_keeps_one_component_per_label_set_first():
    m = mix_at(0)
    comps = [Hypothesis(math.log(w), (A,), (m,)) for w in (0.3, 0.25, 0.2, 0.15)] + [Hypothesis(math.log(0.1), (), ())]
    p = prune_glmb(normalize_glmb(comps), 3)
    assert [c.labels for c in p.components] == [(A,), (A,), ()]
    np.testing.assert_allclose(p.weights, np.array([0.3, 0.25, 0.1]) / 0.65)


def test_extract_examples():
    empty = normalize_glmb([Hypothesis(0.0, (), ()), Hypothesis(-2.0, (A,), (mix_at(0),))])
    assert extract_estimates(empty) == []
    both = normalize_glmb([Hypothesis(0.0, (A, B), (mix_at(0), mix_at(50)))])
    est = extract_estimates(both)
    assert [e.label for e in est] == [A, B]
    assert est[1].x[0] == 50.0 and est[0].gamma == 10.0
    np.testing.assert_allclose(est[0].chi, 100.0 * np.eye(2) / 4.0)
    tie = normalize_glmb([
        Hypothesis(math.log(0.3), (B,), (mix_at(1),)),
        Hypothesis(math.log(0.3), (A,), (mix_at(0),)),
        Hypothesis(math.log(0.4), (), ()),
    ])
    assert [e.label for e in extract_estimates(tie)] == [A]


def test_lmb_to_glmb_examples():
    g = lmb_to_glmb(LMBDensity({A: LMBTrack(0.5, mix_at(0))}))
    assert sorted(zip(g.weights, [c.labels for c in g.components])) == [(0.5, ()), (0.5, (A,))]
    g = lmb_to_glmb(LMBDensity({A: LMBTrack(0.5, mix_at(0)), B: LMBTrack(0.5, mix_at(1))}))
    assert len(g) == 4
    np.testing.assert_allclose(g.weights, 0.25)
    g = lmb_to_glmb(LMBDensity({A: LMBTrack(1.0, mix_at(0))}))
    w = dict(zip([c.labels for c in g.components], g.weights))
    assert w[(A,)] == 1.0 and w[()] == 0.0


def test_lmb_to_glmb_product_form():
    rs = {A: 0.3, B: 0.85, C: 0.6, Label(2, 0): 0.1}
    lmb = LMBDensity({l: LMBTrack(r, mix_at(i)) for i, (l, r) in enumerate(rs.items())})
    g = lmb_to_glmb(lmb)
    assert len(g) == 16
    got = {c.labels: w for c, w in zip(g.components, g.weights)}
    for inc in itertools.product((0, 1), repeat=4):
        labels = tuple(sorted(l for l, i in zip(rs, inc) if i))
        ref = np.prod([rs[l] if i else 1 - rs[l] for l, i in zip(rs, inc)])
        assert got[labels] == pytest.approx(ref, rel=1e-12)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-12)


def test_lmb_to_glmb_cap():
    lmb = LMBDensity({Label(0, i): LMBTrack(0.5, mix_at(i)) for i in range(4)})
    with pytest.raises(ValueError):
        lmb_to_glmb(lmb, cap=3)


def test_glmb_to_lmb_examples():
    m = mix_at(3)
    lmb = glmb_to_lmb(normalize_glmb([Hypothesis(0.0, (A,), (m,))]))
    assert lmb.tracks[A].r == 1.0 and lmb.tracks[A].density is m
    lmb = glmb_to_lmb(normalize_glmb([Hypothesis(math.log(0.4), (), ()), Hypothesis(math.log(0.6), (A,), (m,))]))
    assert lmb.tracks[A].r == pytest.approx(0.6, rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=5))
def test_round_trip_recovers_existence(rs):
    lmb = LMBDensity({Label(0, i): LMBTrack(r, mix_at(10.0 * i)) for i, r in enumerate(rs)})
    g = lmb_to_glmb(lmb)
    back = glmb_to_lmb(g)
    for l, t in lmb.tracks.items():
        got = back.tracks[l].r if l in back.tracks else 0.0
        assert got == pytest.approx(t.r, abs=1e-12)
    assert back.expected_cardinality() == pytest.approx(g.expected_cardinality(), abs=1e-9)


def test_glmb_to_lmb_mixes_densities():
    a, b = mix_at(0), mix_at(10)
    g = normalize_glmb([Hypothesis(math.log(0.3), (A,), (a,)), Hypothesis(math.log(0.5), (A,), (b,)), Hypothesis(math.log(0.2), (), ())])
    t = glmb_to_lmb(g, reduce=False).tracks[A]
    assert t.r == pytest.approx(0.8)
    np.testing.assert_allclose(t.density.weights, [0.375, 0.625])


def test_lmb_density_checks():
    with pytest.raises(ValueError):
        LMBDensity({A: LMBTrack(1.5, mix_at(0))})
    one = LMBDensity({A: LMBTrack(0.5, mix_at(0))})
    with pytest.raises(ValueError):
        one.union(one)
    assert GLMBDensity.empty().expected_cardinality() == 0.0
