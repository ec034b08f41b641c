# curvature/tests/tests_orc_curvature.py
from __future__ import annotations

import networkx as nx
import numpy as np
import pytest
from scipy.optimize import linprog

from core.exceptions import (
    DegreeZeroError,
    DimensionMismatch,
    InvalidInput,
    UnreachableSupport,
    UnsupportedMethod,
)
from curvature.orc import (
    HopDistances,
    Measure,
    OrcConfig,
    OrcResult,
    compute_all,
    edge_orc,
    histogram,
    node_measure,
    orc_bounds,
    wasserstein_exact,
    wasserstein_sinkhorn,
)
from graphs import generators
from graphs.graph import Graph


def _transport_lp(mu: Measure, nu: Measure, dist: np.ndarray) -> float:
    """Brute-force transport plan LP: min <P, M> with P 1 = mu, P^T 1 = nu."""
    k, l = dist.shape
    A_eq = np.zeros((k + l, k * l))
    for i in range(k):
        A_eq[i, i * l:(i + 1) * l] = 1.0
    for j in range(l):
        A_eq[k + j, j::l] = 1.0
    b_eq = np.concatenate([mu.mass, nu.mass])
    res = linprog(dist.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    assert res.success
    return float(res.fun)


# -----------------------------
# Measures
# -----------------------------
def test_node_measure_is_lazy_walk(star5):
    mu = node_measure(star5, 0, 0.5)
    assert mu.as_dict() == {0: 0.5, 1: 0.125, 2: 0.125, 3: 0.125, 4: 0.125}


def test_node_measure_drops_zero_mass_atoms(triangle):
    assert node_measure(triangle, 0, 0.0).support == (1, 2)
    assert node_measure(triangle, 0, 1.0).support == (0,)


def test_node_measure_isolated_node_raises():
    g = Graph.from_edges(3, [(0, 1)])
    with pytest.raises(DegreeZeroError):
        node_measure(g, 2, 0.5)


@pytest.mark.parametrize("support,mass", [
    ((0, 1), [0.5, 0.6]),
    ((0, 0), [0.5, 0.5]),
    ((0, 1), [1.5, -0.5]),
])
def test_measure_invariants(support, mass):
    with pytest.raises(InvalidInput):
        Measure(support, np.array(mass))


def test_wasserstein_checks_cost_shape_and_reachability():
    mu = Measure((0, 1), np.array([0.5, 0.5]))
    nu = Measure((2,), np.array([1.0]))
    with pytest.raises(DimensionMismatch):
        wasserstein_exact(mu, nu, np.zeros((1, 2)))
    with pytest.raises(UnreachableSupport):
        wasserstein_exact(mu, nu, np.array([[1.0], [np.inf]]))


def test_hop_distances_between_components():
    g = Graph.from_edges(4, [(0, 1), (2, 3)])
    with pytest.raises(UnreachableSupport):
        HopDistances(g).matrix([0], [3])


# -----------------------------
# Analytic values
# -----------------------------
def test_triangle_curvature_lazy_and_plain(triangle):
    assert edge_orc(triangle, 0, 1, OrcConfig(delta=0.5)) == pytest.approx(0.75, abs=1e-12)
    assert edge_orc(triangle, 0, 1, OrcConfig(delta=0.0)) == pytest.approx(0.5, abs=1e-12)
    assert orc_bounds(triangle, 0, 1) == pytest.approx((0.5, 0.5, 0.5))


def test_edge_orc_is_symmetric(weighted_square):
    cfg = OrcConfig(delta=0.3)
    assert edge_orc(weighted_square, 2, 1, cfg) == edge_orc(weighted_square, 1, 2, cfg)


def test_edge_orc_non_edge_raises(path4):
    with pytest.raises(InvalidInput):
        edge_orc(path4, 0, 2, OrcConfig())


def test_compute_all_node_means(triangle):
    result = compute_all(triangle, OrcConfig(delta=0.5))
    assert result.node_values(3) == pytest.approx([0.75] * 3)
    assert result.edge_values(triangle) == pytest.approx([0.75] * 3)
    assert result.unconverged == ()


def test_tree_edges_are_negatively_curved():
    g = generators.tree(3, 3)
    values = compute_all(g, OrcConfig(delta=0.0)).edge_values(g)
    inner = [k for (u, v, _), k in zip(g.edges, values) if g.degree[u] > 1 and g.degree[v] > 1]
    assert inner and max(inner) < 0


# -----------------------------
# Oracles and bounds
# -----------------------------
def test_exact_matches_transport_lp_on_random_graphs():
    rng = np.random.default_rng(0)
    for seed in range(200):
        n = int(rng.integers(3, 9))
        g = generators.random_connected(n, 0.5, seed=seed)
        hops = HopDistances(g)
        delta = float(rng.uniform(0.0, 1.0))
        for u, v, _ in g.edges:
            mu, nu = node_measure(g, u, delta), node_measure(g, v, delta)
            dist = hops.matrix(mu.support, nu.support)
            assert wasserstein_exact(mu, nu, dist) == pytest.approx(_transport_lp(mu, nu, dist), abs=1e-9)


def test_plain_walk_curvature_lies_within_bounds():
    rng = np.random.default_rng(1)
    for seed in range(60):
        n = int(rng.integers(4, 31))
        g = generators.random_connected(n, min(1.0, 4.0 / n), seed=seed)
        result = compute_all(g, OrcConfig(delta=0.0, normalize=False))
        for u, v, _ in g.edges:
            lower, upper, _ = orc_bounds(g, u, v)
            k = result.edge(u, v)
            assert lower - 1e-9 <= k <= upper + 1e-9


def test_bounds_need_unweighted_graph(weighted_square):
    with pytest.raises(UnsupportedMethod):
        orc_bounds(weighted_square, 0, 1)


def test_bounds_method_uses_estimate(triangle):
    result = compute_all(triangle, OrcConfig(method="bounds"))
    assert result.edge_values(triangle) == pytest.approx([0.5] * 3)


# -----------------------------
# Sinkhorn
# -----------------------------
def test_sinkhorn_close_to_exact(make_random_graph):
    g = make_random_graph(n=8, p=0.5, seed=3)
    hops = HopDistances(g)
    cfg = OrcConfig(method="sinkhorn", sinkhorn_max_iters=5000)
    for u, v, _ in g.edges:
        mu, nu = node_measure(g, u, 0.5), node_measure(g, v, 0.5)
        dist = hops.matrix(mu.support, nu.support)
        result = wasserstein_sinkhorn(mu, nu, dist, cfg)
        assert result.value == pytest.approx(wasserstein_exact(mu, nu, dist), abs=2e-2)


def test_sinkhorn_non_convergence_is_flagged(make_random_graph, caplog):
    g = make_random_graph(n=8, p=0.5, seed=3)
    cfg = OrcConfig(method="sinkhorn", sinkhorn_eps=0.5, sinkhorn_max_iters=1, sinkhorn_tol=1e-15)
    result = compute_all(g, cfg)
    assert len(result.unconverged) == g.m
    assert "did not converge" in caplog.text


# -----------------------------
# Config and whole-graph checks
# -----------------------------
@pytest.mark.parametrize("kwargs,exc", [
    ({"delta": 1.5}, InvalidInput),
    ({"method": "greedy"}, UnsupportedMethod),
    ({"sinkhorn_eps": -1.0}, InvalidInput),
    ({"workers": 0}, InvalidInput),
])
def test_orc_config_validation(kwargs, exc):
    with pytest.raises(exc):
        OrcConfig(**kwargs)


def test_compute_all_rejects_isolated_node():
    g = Graph.from_edges(3, [(0, 1)])
    with pytest.raises(DegreeZeroError):
        compute_all(g, OrcConfig())


def test_compute_all_worker_pool_matches_inline(make_random_graph):
    g = make_random_graph(n=12, p=0.4, seed=5)
    inline = compute_all(g, OrcConfig(workers=1)).edge_values(g)
    pooled = compute_all(g, OrcConfig(workers=2)).edge_values(g)
    assert np.array_equal(inline, pooled)


def test_from_edge_values_normalizes_and_checks_length(path4):
    result = OrcResult.from_edge_values(path4, [-2.0, 0.0, 0.5], normalized=True)
    assert result.edge(0, 1) == -1.0
    assert result.node_orc[1] == pytest.approx(-0.5)
    with pytest.raises(DimensionMismatch):
        OrcResult.from_edge_values(path4, [0.0])


def test_histogram_default_range():
    counts, edges = histogram(np.array([-1.0, 0.0, 0.99, 1.0]))
    assert counts.size == 40 and counts.sum() == 4
    assert edges[0] == -1.0 and edges[-1] == 1.0


def test_compute_all_matches_networkx_distances_on_cycle():
    g = generators.cycle(6)
    G = g.to_networkx()
    assert nx.diameter(G) == 3
    values = compute_all(g, OrcConfig(delta=0.0)).edge_values(g)
    # plain walk on a long cycle is flat
    assert values == pytest.approx([0.0] * 6, abs=1e-12)
