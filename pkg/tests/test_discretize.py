import numpy as np
import pytest

from capflow.discretize import (
    TimeGrid,
    action,
    continuity_residual,
    delta_rho,
    kinetic_weight,
    kinetic_weights,
    midpoint_densities,
    midpoint_density,
)
from capflow.errors import CapflowError, DensityFloorError


def random_rho(rng, k, n):
    return rng.uniform(0.05, 1.0, size=(k + 1, n))


def test_time_grid():
    grid = TimeGrid(4)
    assert np.allclose(grid.snapshot_times(), [0.0, 0.25, 0.5, 0.75, 1.0])
    assert np.allclose(grid.midpoint_times(), [0.125, 0.375, 0.625, 0.875])
    with pytest.raises(CapflowError):
        TimeGrid(0)


def test_midpoint_densities_staggered(diamond, rng):
    k = 3
    rho = random_rho(rng, k, diamond.n_vertices)
    rb = midpoint_densities(rho, diamond)
    assert rb.shape == (k, diamond.n_edges)
    for i in range(1, k + 1):
        for e, (a, b) in enumerate(diamond.edges):
            # previous snapshot at the tail, current at the head
            expect = 0.5 * (rho[i - 1, a] + rho[i, b])
            assert rb[i - 1, e] == pytest.approx(expect, abs=1e-15)
            assert midpoint_density(rho, (a, b), i) == pytest.approx(expect, abs=1e-15)


def test_kinetic_weights_formula(diamond, rng):
    k = 3
    rho = random_rho(rng, k, diamond.n_vertices)
    w = kinetic_weights(rho, diamond)
    for i in range(1, k + 1):
        for e, (a, b) in enumerate(diamond.edges):
            expect = k * (0.5 / rho[i - 1, a] + 0.5 / rho[i, b])
            assert w[i - 1, e] == pytest.approx(expect, rel=1e-13)
            assert kinetic_weight(rho, (a, b), i, k) == pytest.approx(expect, rel=1e-13)


def test_action_matches_direct_sum(diamond, rng):
    k = 3
    rho = random_rho(rng, k, diamond.n_vertices)
    m = rng.uniform(0.0, 0.5, size=(k, diamond.n_edges))
    w = kinetic_weights(rho, diamond)
    expect = 0.5 * float(np.sum(w * m * m))
    assert action(rho, m, diamond) == pytest.approx(expect, rel=1e-12)


def test_action_quadratic_in_momentum(diamond, rng):
    rho = random_rho(rng, 3, diamond.n_vertices)
    m = rng.uniform(0.0, 0.5, size=(3, diamond.n_edges))
    base = action(rho, m, diamond)
    assert action(rho, 2.0 * m, diamond) == pytest.approx(4.0 * base, rel=1e-12)


def test_floor_guard(diamond, rng):
    rho = random_rho(rng, 3, diamond.n_vertices)
    rho[1, 0] = 1e-12
    with pytest.raises(DensityFloorError):
        kinetic_weights(rho, diamond, floor=1e-9)
    with pytest.raises(DensityFloorError):
        kinetic_weight(rho, (0, 1), 2, 3, floor=1e-9)


def test_delta_rho(diamond, rng):
    rho = random_rho(rng, 4, diamond.n_vertices)
    d = delta_rho(rho)
    assert d.shape == (4, diamond.n_vertices)
    assert np.allclose(d, rho[1:] - rho[:-1], atol=1e-15)


def test_continuity_residual_zero_on_consistent_pair(diamond, rng):
    # build rho from a random momentum so the relation holds exactly
    k = 3
    m = rng.uniform(0.0, 0.3, size=(k, diamond.n_edges))
    rho = np.empty((k + 1, diamond.n_vertices))
    rho[0] = rng.uniform(0.5, 1.0, size=diamond.n_vertices)
    for i in range(k):
        rho[i + 1] = rho[i] + diamond.divergence(m[i])
    res = continuity_residual(rho, m, diamond)
    assert np.max(np.abs(res)) < 1e-13


def test_continuity_residual_detects_imbalance(diamond, rng):
    k = 3
    rho = random_rho(rng, k, diamond.n_vertices)
    m = np.zeros((k, diamond.n_edges))
    res = continuity_residual(rho, m, diamond)
    assert np.allclose(res, -delta_rho(rho), atol=1e-14)


def test_shape_validation(diamond):
    with pytest.raises(CapflowError):
        action(np.ones((4, 3)), np.ones((3, diamond.n_edges)), diamond)
    with pytest.raises(CapflowError):
        continuity_residual(
            np.ones((4, diamond.n_vertices)), np.ones((2, diamond.n_edges)), diamond
        )
    with pytest.raises(CapflowError):
        midpoint_density(np.ones((4, 4)), (0, 1), 5)
