import math

import numpy as np
import pytest
from scipy import integrate, stats

from rfs_extent.ggiw import GGIWParams, log_eta_gamma, observation_row, update_ggiw
from rfs_extent.labelled import Label
from rfs_extent.likelihood import (
    ClutterModel,
    Partition,
    brute_force_likelihood,
    brute_force_terms,
    log_clutter_density,
    log_group_pseudolikelihood,
    set_partitions,
)

BELL = [1, 1, 2, 5, 15, 52, 203, 877]
H1 = np.array([1.0])


def scalar_track(m=0.0, alpha=5.0, beta=1.0, P=2.0, v=7.0, V=4.0):
    return GGIWParams(alpha, beta, np.array([m]), np.array([[P]]), v, np.array([[V]]))


def line_clutter(rate=2.0, half=50.0):
    return ClutterModel(rate, np.array([-half]), np.array([half]))


@pytest.mark.parametrize("n", range(8))
def test_set_partitions_count_is_bell(n):
    parts = list(set_partitions(n))
    assert len(parts) == BELL[n]
    assert len(set(parts)) == BELL[n]
    for p in parts:
        p.validate(n)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition.of([(0, 1), (1, 2)]).validate(3)
    with pytest.raises(ValueError):
        Partition.of([(0,)]).validate(2)
    assert Partition.from_labels([1, 0, 1]) == Partition(((0, 2), (1,)))


def test_clutter_density():
    c = line_clutter(rate=2.0, half=50.0)
    assert log_clutter_density(np.zeros((0, 1)), c) == -2.0
    assert log_clutter_density(np.array([[1.0], [3.0]]), c) == pytest.approx(-2.0 + 2 * math.log(2.0 / 100.0))
    assert log_clutter_density(np.array([[70.0]]), c) == -math.inf


def scalar_evidence_oracle(z, track):
    """Density of scalar measurements by quadrature over the inverse-gamma extent."""
    z = np.asarray(z, dtype=float)
    n = len(z)
    m, P, v, V = track.m[0], track.P[0, 0], track.v, track.V[0, 0]
    C0 = np.eye(n) + P * np.ones((n, n))
    f = lambda chi: stats.multivariate_normal.pdf(z, np.full(n, m), chi * C0) * stats.invgamma.pdf(chi, (v - 2) / 2, scale=V / 2)
    val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-11, limit=400)
    return val * math.exp(log_eta_gamma(track.alpha, track.beta, n))


def test_single_track_single_measurement_by_hand():
    trk = scalar_track()
    c = line_clutter(rate=2.0)
    p_D = 0.7
    Z = np.array([[1.3]])
    kappa = 2.0 / 100.0
    ref = math.exp(-2.0) * ((1 - p_D) * kappa + p_D * scalar_evidence_oracle([1.3], trk))
    got = brute_force_likelihood([(trk, Label(0, 0))], Z, p_D, c, H1)
    assert got == pytest.approx(ref, rel=1e-8)


def test_single_track_two_measurements_by_hand():
    trk = scalar_track(m=0.5)
    c = line_clutter(rate=1.5)
    p_D = 0.9
    z = [1.0, -0.4]
    kappa = 1.5 / 100.0
    ev = lambda pts: scalar_evidence_oracle(pts, trk)
    ref = math.exp(-1.5) * (
        (1 - p_D) * kappa**2  # both clutter
        + p_D * ev(z)  # one group of two
        + p_D * ev([z[0]]) * kappa  # track takes z0
        + p_D * ev([z[1]]) * kappa  # track takes z1
    )
    got = brute_force_likelihood([(trk, Label(0, 0))], np.array(z).reshape(-1, 1), p_D, c, H1)
    assert got == pytest.approx(ref, rel=1e-8)


def test_no_tracks_gives_clutter_density():
    c = line_clutter()
    Z = np.array([[1.0], [2.0], [-3.0]])
    got = brute_force_likelihood([], Z, 0.9, c, H1, log=True)
    assert got == pytest.approx(log_clutter_density(Z, c), rel=1e-14)


def test_zero_detection_probability_is_clutter_only():
    c = line_clutter()
    Z = np.array([[1.0], [2.0]])
    tracks = [(scalar_track(), Label(0, 0)), (scalar_track(m=3.0), Label(0, 1))]
    got = brute_force_likelihood(tracks, Z, 0.0, c, H1, log=True)
    assert got == pytest.approx(log_clutter_density(Z, c), rel=1e-14)


def test_terms_are_unique_associations():
    c = line_clutter()
    Z = np.array([[1.0], [2.0], [-3.0]])
    tracks = [(scalar_track(), Label(0, 0)), (scalar_track(m=3.0), Label(0, 1))]
    stats_out = {}
    terms = brute_force_terms(tracks, Z, 0.8, c, H1, stats=stats_out)
    assoc = [t[0] for t in terms]
    assert len(assoc) == len(set(assoc))
    assert stats_out["partitions_visited"] == BELL[3]
    # every term respects disjointness and covers at most one clutter group
    for a, *_ in terms:
        used = [i for g in a if g is not None for i in g]
        assert len(used) == len(set(used))


def test_term_log_weights_exclude_clutter_factor():
    c = line_clutter()
    Z = np.array([[1.0], [2.0]])
    tracks = [(scalar_track(), Label(0, 0))]
    for _, log_term, _, log_joint in brute_force_terms(tracks, Z, 0.8, c, H1):
        assert log_joint == pytest.approx(log_term + log_clutter_density(Z, c), rel=1e-12)


def test_refuses_large_instances():
    with pytest.raises(ValueError):
        brute_force_terms([], np.zeros((7, 1)), 0.5, line_clutter(), H1)


def test_group_pseudolikelihood_ratio():
    trk = GGIWParams(10.0, 1.0, np.zeros(6), np.eye(3), 10.0, 10.0 * np.eye(2))
    c = ClutterModel(10.0, np.array([-100.0, -100.0]), np.array([100.0, 100.0]))
    W = np.array([[0.5, 0.1], [-1.0, 0.4]])
    post, log_psi = log_group_pseudolikelihood(trk, W, 0.9, c, observation_row(3))
    ref_post, log_ev = update_ggiw(trk, W, observation_row(3))
    assert log_psi == pytest.approx(math.log(0.9) + log_ev - 2 * c.log_intensity, rel=1e-13)
    assert post.allclose(ref_post)
    _, log_zero = log_group_pseudolikelihood(trk, W, 0.0, c, observation_row(3))
    assert log_zero == -math.inf


def test_single_point_rate_evidence_is_negative_binomial():
    # with alpha=10, beta=1 a single detection carries NB(10, 1/2) at 1 = 5/1024
    assert math.exp(log_eta_gamma(10.0, 1.0, 1)) == pytest.approx(5.0 / 1024.0, rel=1e-14)


def test_unit_clutter_intensity_reduces_to_evidence():
    trk = GGIWParams(10.0, 1.0, np.zeros(6), np.eye(3), 10.0, 10.0 * np.eye(2))
    c = ClutterModel(1.0, np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    W = np.array([[0.2, 0.3], [0.6, 0.1]])
    _, log_psi = log_group_pseudolikelihood(trk, W, 1.0, c, observation_row(3))
    _, log_ev = update_ggiw(trk, W, observation_row(3))
    assert log_psi == pytest.approx(log_ev, rel=1e-14)


def test_empty_scan_one_target():
    c = line_clutter(rate=3.0)
    got = brute_force_likelihood([(scalar_track(), Label(0, 0))], np.zeros((0, 1)), 0.6, c, H1)
    assert got == pytest.approx(math.exp(-3.0) * 0.4, rel=1e-14)


def test_likelihood_permutation_invariant():
    rng = np.random.default_rng(2)
    c = line_clutter()
    tracks = [(scalar_track(m=0.0), Label(0, 0)), (scalar_track(m=4.0), Label(0, 1))]
    Z = rng.normal(size=(4, 1)) * 3
    base = brute_force_likelihood(tracks, Z, 0.8, c, H1, log=True)
    assert brute_force_likelihood(tracks[::-1], Z, 0.8, c, H1, log=True) == pytest.approx(base, rel=1e-12)
    assert brute_force_likelihood(tracks, Z[::-1], 0.8, c, H1, log=True) == pytest.approx(base, rel=1e-12)
