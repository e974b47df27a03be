import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import digamma, expit

from compograph.errors import CompographError, DimMismatch, TargetUnreachable
from compograph.evalsuite import composition_stats
from compograph.synth import (
    BILINEAR,
    CONTINUOUS,
    ILR_DISTANCE,
    NEAR_DISCRETE,
    P_IN,
    SynthConfig,
    edge_probabilities,
    generate_graph,
    run_recovery_experiment,
    sample_memberships,
    score_recovery,
    write_memberships_csv,
)
from compograph.train import TrainConfig


def js_direct(p, q):
    m = 0.5 * (p + q)
    return 0.5 * np.sum(p * np.log(p / m)) + 0.5 * np.sum(q * np.log(q / m))


def test_config_validation():
    with pytest.raises(CompographError):
        SynthConfig(N=5, K_true=5).validate()
    with pytest.raises(CompographError):
        SynthConfig(N=10, K_true=1).validate()
    with pytest.raises(CompographError):
        SynthConfig(N=10, K_true=3, target_mean_degree=9.0).validate()
    with pytest.raises(CompographError):
        SynthConfig(regime="blurry").validate()


def test_continuous_entropy_matches_dirichlet_expectation():
    Z = sample_memberships(SynthConfig(N=10_000, K_true=4, regime=CONTINUOUS))
    alpha, K = 5.0, 4
    expected = digamma(K * alpha + 1) - digamma(alpha + 1)
    assert abs(composition_stats(Z)["entropy_mean"] - expected) < 0.05


def test_near_discrete_mostly_in_corners():
    Z = sample_memberships(SynthConfig(N=5000, K_true=4, regime=NEAR_DISCRETE))
    assert composition_stats(Z)["near_corner_frac"] > 0.5
    assert np.all(Z > 0)
    np.testing.assert_allclose(Z.sum(axis=1), 1.0, atol=1e-12)


def test_memberships_are_seeded():
    a = sample_memberships(SynthConfig(N=50, K_true=3, seed=1))
    b = sample_memberships(SynthConfig(N=50, K_true=3, seed=1))
    c = sample_memberships(SynthConfig(N=50, K_true=3, seed=2))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_bilinear_one_hot_same_block():
    N = 30
    Z = np.zeros((N, 4))
    Z[:, 2] = 1.0
    cfg = SynthConfig(N=N, K_true=4, generator=BILINEAR, target_mean_degree=P_IN * (N - 1))
    p, _ = edge_probabilities(Z, cfg)
    np.testing.assert_allclose(p, P_IN, atol=1e-12)


def test_ilr_identical_memberships():
    N = 40
    Z = np.tile([0.1, 0.2, 0.3, 0.4], (N, 1))
    cfg = SynthConfig(N=N, K_true=4, generator=ILR_DISTANCE, target_mean_degree=10.0)
    p, alpha = edge_probabilities(Z, cfg)
    np.testing.assert_allclose(p, expit(alpha), atol=1e-15)
    assert abs(p.sum() * 2 / N - 10.0) <= 0.1


@pytest.mark.parametrize("generator", [BILINEAR, ILR_DISTANCE])
@pytest.mark.parametrize("regime", [CONTINUOUS, NEAR_DISCRETE])
def test_realised_mean_degree(generator, regime):
    cfg = SynthConfig(N=500, K_true=5, regime=regime, generator=generator, target_mean_degree=20.0, seed=3)
    Z = sample_memberships(cfg)
    p, _ = edge_probabilities(Z, cfg)
    expected = 2 * p.sum() / cfg.N
    assert abs(expected - 20.0) <= 0.2
    g = generate_graph(Z, cfg)
    sd = 2 * np.sqrt(np.sum(p * (1 - p))) / cfg.N
    assert abs(2 * g.num_edges / cfg.N - expected) < 2 * sd
    assert np.all(g.edges[:, 0] < g.edges[:, 1])


def test_bilinear_falls_back_to_scaling_when_sparse():
    cfg = SynthConfig(N=400, K_true=4, regime=CONTINUOUS, generator=BILINEAR, target_mean_degree=5.0)
    p, p_out = edge_probabilities(sample_memberships(cfg), cfg)
    assert p_out == 0.0
    assert abs(2 * p.sum() / cfg.N - 5.0) <= 0.05


def test_target_unreachable():
    N = 30
    Z = np.zeros((N, 3))
    Z[:, 0] = 1.0
    with pytest.raises(TargetUnreachable):
        edge_probabilities(Z, SynthConfig(N=N, K_true=3, generator=BILINEAR, target_mean_degree=28.5))


def test_generate_graph_shape_check():
    cfg = SynthConfig(N=20, K_true=3, target_mean_degree=5.0)
    with pytest.raises(DimMismatch):
        generate_graph(np.full((20, 4), 0.25), cfg)


# recovery scoring


def test_recovery_identity_and_permutation():
    Z = sample_memberships(SynthConfig(N=200, K_true=5, seed=4))
    s = score_recovery(Z, Z)
    assert s.l1 == 0.0 and abs(s.cosine - 1.0) < 1e-12 and s.js == 0.0
    perm = [3, 0, 4, 1, 2]
    t = score_recovery(Z[:, perm], Z)
    assert (t.l1, t.cosine, t.js) == (s.l1, s.cosine, s.js)
    np.testing.assert_array_equal(Z[:, perm][:, list(t.permutation)], Z)


def test_recovery_single_row_closed_form():
    eps = 1e-6
    truth = np.array([[1 - 3 * eps, eps, eps, eps]])
    learned = np.full((1, 4), 0.25)
    s = score_recovery(learned, truth)
    assert abs(s.l1 - (1.5 - 6 * eps)) < 1e-12
    assert abs(s.l1 - 1.5) < 1e-5
    assert abs(s.js - js_direct(learned[0], truth[0])) < 1e-12
    cos = truth[0].sum() * 0.25 / (np.linalg.norm(truth[0]) * 0.5)
    assert abs(s.cosine - cos) < 1e-12


def test_recovery_shape_mismatch():
    with pytest.raises(DimMismatch):
        score_recovery(np.full((3, 2), 0.5), np.full((3, 3), 1 / 3))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 7))
def test_recovery_alignment_invariance(seed, K):
    rng = np.random.default_rng(seed)
    A = rng.dirichlet(np.ones(K), 30)
    B = rng.dirichlet(np.ones(K), 30)
    base = score_recovery(A, B)
    p, q = rng.permutation(K), rng.permutation(K)
    for L, T in ((A[:, p], B), (A, B[:, q]), (A[:, p], B[:, p])):
        s = score_recovery(L, T)
        assert abs(s.l1 - base.l1) < 1e-12
        assert abs(s.js - base.js) < 1e-12
        assert abs(s.cosine - base.cosine) < 1e-12
    assert 0.0 <= base.js <= np.log(2)
    assert -1.0 <= base.cosine <= 1.0


def test_run_recovery_experiment_small(tmp_path):
    cfg = SynthConfig(N=120, K_true=3, target_mean_degree=10.0, seed=1)
    rep = run_recovery_experiment(cfg, TrainConfig(K=99, iterations=300))
    assert rep.config_echo["train"]["K"] == 3
    assert {"l1", "cosine", "js", "entropy_mean"} <= set(rep.metrics)
    assert "truth_interiority" in rep.details
    assert 0.0 <= rep.metrics["l1"] <= 2.0
    write_memberships_csv(tmp_path / "truth.csv", sample_memberships(cfg))
    rows = list(csv.reader(open(tmp_path / "truth.csv")))
    assert rows[0] == ["node", "z0", "z1", "z2"] and len(rows) == 121
