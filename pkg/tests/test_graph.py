import numpy as np
import pytest

from capflow.errors import GraphError
from capflow.graph import DirectedGraph, from_directed_edges, from_undirected_edge_list


def test_pair_layout_and_orientation(path4):
    g = path4
    assert g.n_vertices == 4
    assert g.n_edges == 6
    assert g.paired
    assert g.n_pairs == 3
    # pair j occupies rows 2j (forward) and 2j+1 (reverse)
    assert g.edges[0] == (0, 1)
    assert g.edges[1] == (1, 0)
    assert g.edges[4] == (2, 3)
    assert g.edges[5] == (3, 2)


def test_incidence_signs(path4):
    D = path4.incidence.toarray()
    for e, (a, b) in enumerate(path4.edges):
        row = np.zeros(path4.n_vertices)
        row[a] = -1.0
        row[b] = 1.0
        assert np.array_equal(D[e], row)


def test_gradient_is_head_minus_tail(diamond, rng):
    x = rng.normal(size=diamond.n_vertices)
    gx = diamond.gradient(x)
    for e, (a, b) in enumerate(diamond.edges):
        assert gx[e] == pytest.approx(x[b] - x[a], abs=1e-15)


def test_divergence_is_net_inflow(diamond, rng):
    m = rng.normal(size=diamond.n_edges)
    div = diamond.divergence(m)
    expect = np.zeros(diamond.n_vertices)
    for e, (a, b) in enumerate(diamond.edges):
        expect[a] -= m[e]
        expect[b] += m[e]
    assert np.allclose(div, expect, atol=1e-14)


def test_adjointness(diamond, rng):
    # <D x, m> == <x, D.T m> for random vectors
    for _ in range(50):
        x = rng.normal(size=diamond.n_vertices)
        m = rng.normal(size=diamond.n_edges)
        lhs = float(diamond.gradient(x) @ m)
        rhs = float(x @ diamond.divergence(m))
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_divergence_sums_to_zero(diamond, rng):
    # each edge moves mass between two vertices, so the total is conserved
    m = rng.normal(size=diamond.n_edges)
    assert float(np.sum(diamond.divergence(m))) == pytest.approx(0.0, abs=1e-12)


def test_edge_laplacian_matches_product(diamond):
    L = diamond.edge_laplacian().toarray()
    D = diamond.incidence.toarray()
    assert np.allclose(L, D @ D.T, atol=1e-14)


def test_shape_checks(path4):
    with pytest.raises(GraphError):
        path4.gradient(np.zeros(3))
    with pytest.raises(GraphError):
        path4.divergence(np.zeros(5))


def test_rejects_self_loop():
    with pytest.raises(GraphError):
        from_undirected_edge_list([(0, 0)], 2)


def test_rejects_duplicate_pair():
    with pytest.raises(GraphError):
        from_undirected_edge_list([(0, 1), (1, 0)], 2)


def test_rejects_out_of_range():
    with pytest.raises(GraphError):
        from_undirected_edge_list([(0, 2)], 2)
    with pytest.raises(GraphError):
        from_undirected_edge_list([(-1, 0)], 2)


def test_rejects_disconnected_by_default():
    with pytest.raises(GraphError):
        from_undirected_edge_list([(0, 1), (2, 3)], 4)
    g = from_undirected_edge_list([(0, 1), (2, 3)], 4, allow_disconnected=True)
    assert g.n_edges == 4
    assert not g.is_connected()


def test_from_directed_edges_unpaired():
    g = from_directed_edges([(0, 1), (1, 2), (2, 0)], 3)
    assert g.n_edges == 3
    assert not g.paired
    assert g.is_connected()


def test_immutable():
    g = from_undirected_edge_list([(0, 1)], 2)
    with pytest.raises(AttributeError):
        g.n_vertices = 5
