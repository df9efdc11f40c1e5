"""Graph generation, spectra, and graph-to-interaction plumbing."""

import math

import numpy as np
import pytest

from stein_ising.graphs import (
    SimpleGraph,
    abs_operator_norm,
    complete_graph,
    disjoint_cliques,
    interaction_from_graph,
    load_graph,
    operator_norm,
    random_regular,
    save_graph,
    spectral_deviation,
    spectral_report,
)
from stein_ising.ising import curie_weiss


def _degrees(graph):
    counts = np.zeros(graph.n, dtype=int)
    for i, j in graph.edges:
        counts[i] += 1
        counts[j] += 1
    return counts


# -- constructions -------------------------------------------------------------


def test_complete_graph_shape():
    g = complete_graph(6)
    assert g.num_edges == 15
    assert g.degree == 5
    assert np.all(_degrees(g) == 5)
    assert g.is_connected()


def test_complete_graph_epsilon_is_inverse_degree():
    # adjacency spectrum is {n-1, -1, ...}; second max / degree = 1/(n-1)
    rep = spectral_report(complete_graph(8))
    assert rep.epsilon == pytest.approx(1.0 / 7.0, abs=1e-9)


def test_disjoint_cliques_are_regular_non_expanders():
    g = disjoint_cliques(12, 4)
    assert g.degree == 3
    assert g.num_edges == 3 * 6
    assert np.all(_degrees(g) == 3)
    assert not g.is_connected()
    rep = spectral_report(g)
    # each block contributes an eigenvalue at the full degree
    assert rep.epsilon == pytest.approx(1.0, abs=1e-9)


def test_disjoint_cliques_requires_divisibility():
    with pytest.raises(ValueError):
        disjoint_cliques(10, 4)


def test_random_regular_is_simple_regular_and_seeded():
    g = random_regular(64, 6, seed=11)
    deg = _degrees(g)
    assert np.all(deg == 6)
    edges = {tuple(e) for e in np.sort(g.edges, axis=1).tolist()}
    assert len(edges) == g.num_edges == 64 * 6 // 2
    assert all(i != j for i, j in edges)
    again = random_regular(64, 6, seed=11)
    assert np.array_equal(g.edges, again.edges)
    other = random_regular(64, 6, seed=12)
    assert not np.array_equal(g.edges, other.edges)


def test_random_regular_rejects_odd_total_degree():
    with pytest.raises(ValueError):
        random_regular(7, 3, seed=0)


def test_random_regular_rejects_degree_at_least_n():
    with pytest.raises(ValueError):
        random_regular(6, 6, seed=0)


def test_random_regular_moderate_degree_is_connected_expander():
    g = random_regular(256, 8, seed=21)
    assert g.is_connected()
    rep = spectral_report(g)
    ramanujan = 2.0 * math.sqrt(7.0) / 8.0
    # near-Ramanujan above, Alon-Boppana-ish below
    assert 0.5 * ramanujan <= rep.epsilon <= 1.5 * ramanujan


# -- spectra -------------------------------------------------------------------


def test_operator_norm_matches_dense_eigensolve(rng):
    A = rng.normal(size=(30, 30))
    A = A + A.T
    expected = float(np.max(np.abs(np.linalg.eigvalsh(A))))
    assert operator_norm(A) == pytest.approx(expected, rel=1e-8)


def test_abs_operator_norm_uses_entrywise_absolute_values(rng):
    from stein_ising.ising import random_interaction

    J = random_interaction(12, 0.4, rng)
    expected = float(np.max(np.abs(np.linalg.eigvalsh(np.abs(J.dense())))))
    assert abs_operator_norm(J) == pytest.approx(expected, rel=1e-8)


def test_spectral_report_fields():
    rep = spectral_report(random_regular(128, 6, seed=4))
    assert rep.n == 128
    assert rep.degree == 6
    assert rep.second_max_abs == pytest.approx(rep.epsilon * 6)
    assert rep.is_connected
    assert rep.eigenvalues[0] == pytest.approx(6.0, abs=1e-8)


def test_spectral_deviation_bounded_by_epsilon_rate():
    # complete-graph vs regular-graph coupling matrices differ in operator
    # norm by at most beta * (epsilon + 1/n)
    beta = 1.2
    for d, seed in ((6, 1), (8, 2)):
        graph = random_regular(128, d, seed=seed)
        eps = spectral_report(graph).epsilon
        dev = spectral_deviation(curie_weiss(128, beta),
                                 interaction_from_graph(graph, beta))
        assert dev <= beta * (eps + 1.0 / 128) + 1e-8


def test_interaction_from_graph_per_degree_scale():
    g = random_regular(16, 4, seed=9)
    J = interaction_from_graph(g, 1.2, scale="per-d")
    dense = J.dense()
    assert np.all(np.diag(dense) == 0.0)
    nz = dense[dense != 0.0]
    assert np.allclose(nz, 1.2 / 4)
    assert np.count_nonzero(dense) == 2 * g.num_edges


def test_graph_file_round_trip(tmp_path):
    g = random_regular(20, 4, seed=3)
    path = tmp_path / "graph.txt"
    save_graph(g, path)
    back = load_graph(path)
    assert back.n == g.n
    assert back.degree == g.degree
    assert np.array_equal(np.sort(back.edges, axis=1),
                          np.sort(g.edges, axis=1))


def test_load_graph_rejects_malformed_file(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("4 2\n0 9\n")
    with pytest.raises(ValueError):
        load_graph(path)


def test_simple_graph_adjacency_consistency():
    g = disjoint_cliques(8, 4)
    dense = g.adjacency(sparse=False)
    sparse = g.adjacency(sparse=True).toarray()
    assert np.array_equal(dense, sparse)
    assert np.array_equal(dense, dense.T)
    assert dense.sum() == 2 * g.num_edges
