import io

import networkx as nx
import numpy as np
import pytest
from scipy.special import expit

from compograph.errors import CompographError, KTooSmall, ShapeMismatch
from compograph.graphio import Graph
from compograph.model import init_state, log_odds, nll_exact, state_to_dict
from compograph.train import AdamState, TrainConfig, adam_step, fit


def test_adam_first_step():
    p = {"theta": np.zeros(1)}
    adam_step(p, {"theta": np.ones(1)}, opt := AdamState(lr=0.01))
    np.testing.assert_allclose(p["theta"], [-0.01], atol=1e-9)
    assert opt.step_count == 1


def test_adam_zero_gradient_leaves_params():
    p = {"theta": np.array([0.3, -2.0])}
    adam_step(p, {"theta": np.zeros(2)}, AdamState())
    np.testing.assert_array_equal(p["theta"], [0.3, -2.0])


def test_adam_equal_gradients_equal_updates():
    p = {"a": np.zeros(3), "b": np.zeros(3)}
    opt = AdamState()
    for g in (0.5, -1.2, 3.0):
        adam_step(p, {"a": np.full(3, g), "b": np.full(3, g)}, opt)
    np.testing.assert_array_equal(p["a"], p["b"])


def test_adam_against_hand_recursion():
    rng = np.random.default_rng(0)
    grads = rng.normal(size=(10, 4))
    p = {"w": np.zeros(4)}
    opt = AdamState(lr=0.05)
    theta, m, v = np.zeros(4), np.zeros(4), np.zeros(4)
    for t, g in enumerate(grads, 1):
        adam_step(p, {"w": g}, opt)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        theta = theta - 0.05 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    np.testing.assert_allclose(p["w"], theta, rtol=1e-12)


def test_adam_shape_errors():
    with pytest.raises(ShapeMismatch):
        adam_step({"a": np.zeros(2)}, {"a": np.zeros(3)}, AdamState())
    with pytest.raises(ShapeMismatch):
        adam_step({"a": np.zeros(2)}, {"b": np.zeros(2)}, AdamState())


def test_config_validation():
    with pytest.raises(KTooSmall):
        TrainConfig(K=1).validate()
    for bad in (dict(iterations=0), dict(lr=0.0), dict(neg_ratio=-1.0), dict(basis_mode="x")):
        with pytest.raises(CompographError):
            TrainConfig(**bad).validate()


def test_two_node_edge_is_learned():
    state = fit(Graph(2, [[0, 1]]), TrainConfig(K=2, iterations=500))
    assert expit(log_odds(state, 0, 1)) > 0.9
    assert state.iterations == 500


def test_fit_is_deterministic():
    G = nx.karate_club_graph()
    g = Graph.from_pairs(34, list(G.edges()))
    cfg = TrainConfig(K=4, iterations=200, seed=3)
    a = state_to_dict(fit(g, cfg))
    b = state_to_dict(fit(g, cfg))
    assert a == b
    c = state_to_dict(fit(g, TrainConfig(K=4, iterations=200, seed=4)))
    assert c != a


@pytest.mark.parametrize("mode", ["helmert", "learned"])
def test_karate_nll_decreases(mode):
    G = nx.karate_club_graph()
    g = Graph.from_pairs(34, list(G.edges()))
    cfg = TrainConfig(K=5, iterations=500, basis_mode=mode)
    start = nll_exact(init_state(34, 5, mode, cfg.seed), g)
    end = nll_exact(fit(g, cfg), g)
    assert end < start


def test_small_graphs_nll_decreases():
    for seed in range(3):
        G = nx.gnp_random_graph(40, 0.15, seed=seed)
        g = Graph.from_pairs(40, list(G.edges()))
        cfg = TrainConfig(K=4, iterations=500, seed=seed)
        assert nll_exact(fit(g, cfg), g) < nll_exact(init_state(40, 4, seed=seed), g)


def test_progress_lines():
    buf = io.StringIO()
    fit(Graph(3, [[0, 1], [1, 2]]), TrainConfig(K=2, iterations=10, log_every=4), log=buf)
    lines = buf.getvalue().splitlines()
    assert [ln.split()[0] for ln in lines] == ["iter=4", "iter=8", "iter=10"]
    assert all(ln.split()[1].startswith("nll_est=") for ln in lines)


def test_fit_rejects_edgeless_graph():
    with pytest.raises(CompographError):
        fit(Graph(3, []), TrainConfig(K=2, iterations=5))


def test_complete_graph_has_no_negatives():
    g = Graph(3, [[0, 1], [0, 2], [1, 2]])
    state = fit(g, TrainConfig(K=2, iterations=100))
    assert np.all(expit([log_odds(state, 0, 1), log_odds(state, 1, 2)]) > 0.5)
