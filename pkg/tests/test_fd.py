import numpy as np
import pytest

from capflow.errors import CapflowError
from capflow.fd import (
    ENFORCE_ALL,
    ENFORCE_INTERIOR,
    FdParams,
    capacity,
    project_box,
    project_fd_set,
)


def build(k=4, ne=6, **kw):
    kw.setdefault("v0", 2.0)
    kw.setdefault("rho_hat", 0.1)
    return FdParams.build(kw.pop("v0"), kw.pop("rho_hat"), k, ne, **kw)


def test_curve_values():
    p = build()
    # peak at half the jam density is v0 * rho_hat / 4
    assert capacity(p, 0, 2, 0.05) == pytest.approx(2.0 * 0.1 / 4.0)
    assert capacity(p, 0, 2, 0.0) == 0.0
    assert capacity(p, 0, 2, 0.1) == 0.0
    # saturated, not negative, above jam
    assert capacity(p, 0, 2, 0.2) == 0.0


def test_caps_match_formula(rng):
    p = build(enforcement=ENFORCE_ALL)
    rho_bar = rng.uniform(0.0, 0.2, size=(4, 6))
    caps = p.caps(rho_bar)
    expect = np.maximum(2.0 * rho_bar * (1.0 - rho_bar / 0.1), 0.0)
    assert np.allclose(caps, expect, atol=1e-14)


def test_interior_enforcement_window():
    p = build(k=5, enforcement=ENFORCE_INTERIOR)
    mask = p.step_mask()
    assert mask.tolist() == [False, True, True, True, False]
    caps = p.caps(np.full((5, 6), 0.05))
    assert np.all(np.isinf(caps[0]))
    assert np.all(np.isinf(caps[-1]))
    assert np.all(np.isfinite(caps[1:-1]))


def test_disabled_drops_upper_bound():
    p = build(enabled=False)
    assert not p.step_mask().any()
    caps = p.caps(np.full((4, 6), 0.05))
    assert np.all(np.isinf(caps))


def test_broadcast_shapes():
    per_edge = np.linspace(1.0, 2.0, 6)
    p = FdParams.build(per_edge, 0.1, 4, 6)
    assert p.v0.shape == (4, 6)
    assert np.allclose(p.v0[2], per_edge)
    per_step = np.linspace(1.0, 2.0, 4)
    p = FdParams.build(2.0, per_step, 4, 6)
    assert p.rho_hat.shape == (4, 6)
    assert np.allclose(p.rho_hat[:, 3], per_step)


def test_bad_params_rejected():
    with pytest.raises(CapflowError):
        FdParams.build(0.0, 0.1, 4, 6)
    with pytest.raises(CapflowError):
        FdParams.build(1.0, -0.1, 4, 6)
    with pytest.raises(CapflowError):
        FdParams.build(np.ones(5), 0.1, 4, 6)
    with pytest.raises(CapflowError):
        build(enforcement="sometimes")


def test_project_box(rng):
    x = rng.normal(size=100)
    upper = rng.uniform(0.1, 1.0, size=100)
    y = project_box(x, upper)
    assert np.all(y >= 0.0)
    assert np.all(y <= upper)
    inside = (x >= 0.0) & (x <= upper)
    assert np.array_equal(y[inside], x[inside])


def test_projection_lands_in_set(rng):
    p = build(enforcement=ENFORCE_ALL)
    rho_bar = rng.uniform(0.0, 0.2, size=(4, 6))
    caps = p.caps(rho_bar)
    x = rng.normal(scale=0.5, size=(4, 6))
    y = project_fd_set(x, rho_bar, p)
    assert np.all(y >= 0.0)
    assert np.all(y <= caps + 1e-15)


def test_projection_idempotent_and_nonexpansive(rng):
    p = build(enforcement=ENFORCE_ALL)
    for _ in range(200):
        rho_bar = rng.uniform(0.0, 0.2, size=(4, 6))
        x = rng.normal(scale=0.5, size=(4, 6))
        y = rng.normal(scale=0.5, size=(4, 6))
        px = project_fd_set(x, rho_bar, p)
        py = project_fd_set(y, rho_bar, p)
        assert np.array_equal(project_fd_set(px, rho_bar, p), px)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12


def test_curve_concavity(rng):
    # midpoint above the chord for the raw parabola on the physical range
    p = build()
    for _ in range(1000):
        a, b = rng.uniform(0.0, 0.1, size=2)
        qa = capacity(p, 1, 2, a)
        qb = capacity(p, 1, 2, b)
        qm = capacity(p, 1, 2, 0.5 * (a + b))
        assert qm >= 0.5 * (qa + qb) - 1e-12


def test_step_out_of_range():
    p = build()
    with pytest.raises(CapflowError):
        capacity(p, 0, 0, 0.05)
    with pytest.raises(CapflowError):
        capacity(p, 0, 5, 0.05)
    with pytest.raises(CapflowError):
        capacity(p, 0, 2, -0.01)


def test_projection_shape_check(rng):
    p = build()
    with pytest.raises(CapflowError):
        project_fd_set(np.zeros((3, 6)), np.zeros((4, 6)), p)
    with pytest.raises(CapflowError):
        p.caps(np.zeros((4, 5)))
