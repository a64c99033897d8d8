import numpy as np
import pytest

from capflow.kernels import _fallback

_core = pytest.importorskip("capflow.kernels._core")


@pytest.fixture
def krng():
    return np.random.default_rng(991)


def test_greenshields_caps_parity(krng):
    rb = krng.uniform(0.0, 0.3, size=(5, 8))
    v0 = krng.uniform(0.5, 3.0, size=(5, 8))
    rh = krng.uniform(0.05, 0.2, size=(5, 8))
    a = _core.greenshields_caps(rb, v0, rh)
    b = _fallback.greenshields_caps(rb, v0, rh)
    assert np.allclose(a, b, rtol=1e-15, atol=1e-15)
    assert np.all(a >= 0.0)


def test_clamp_parity(krng):
    x = krng.normal(size=(5, 8))
    caps = krng.uniform(0.0, 0.5, size=(5, 8))
    caps[0, :] = np.inf
    a = _core.clamp_with_caps(x, caps)
    b = _fallback.clamp_with_caps(x, caps)
    assert np.array_equal(a, b)


def test_kinetic_weights_parity(krng):
    rt = krng.uniform(0.01, 1.0, size=(5, 8))
    rh = krng.uniform(0.01, 1.0, size=(5, 8))
    a = _core.kinetic_weights(rt, rh, 5.0)
    b = _fallback.kinetic_weights(rt, rh, 5.0)
    assert np.allclose(a, b, rtol=1e-15)


def test_weighted_energy_parity(krng):
    w = krng.uniform(0.1, 10.0, size=(5, 8))
    m = krng.normal(size=(5, 8))
    a = _core.weighted_energy(w, m)
    b = _fallback.weighted_energy(w, m)
    assert a == pytest.approx(b, rel=1e-13)


def test_tridiag_solve_against_dense(krng):
    B, K = 7, 9
    off = -3.0
    diag = krng.uniform(8.0, 20.0, size=(B, K))
    rhs = krng.normal(size=(B, K))
    for impl in (_core, _fallback):
        x = impl.solve_symmetric_tridiag(diag.copy(), off, rhs.copy())
        for b in range(B):
            T = np.diag(diag[b]) + off * (np.eye(K, k=1) + np.eye(K, k=-1))
            assert np.allclose(T @ x[b], rhs[b], atol=1e-10)


def test_tridiag_parity(krng):
    diag = krng.uniform(8.0, 20.0, size=(4, 6))
    rhs = krng.normal(size=(4, 6))
    a = _core.solve_symmetric_tridiag(diag, -2.5, rhs)
    b = _fallback.solve_symmetric_tridiag(diag, -2.5, rhs)
    assert np.allclose(a, b, rtol=1e-13)


def test_scatter_kinetic_parity(krng):
    k, ne, n = 5, 12, 7
    msq = krng.uniform(0.0, 1.0, size=(k, ne))
    tails = krng.integers(0, n, size=ne)
    heads = krng.integers(0, n, size=ne)
    a = _core.scatter_kinetic_coeff(msq, tails, heads, n, float(k))
    b = _fallback.scatter_kinetic_coeff(msq, tails, heads, n, float(k))
    assert np.allclose(a, b, rtol=1e-13)
    # row j aggregates msq[j+1] at tails and msq[j] at heads, times k/4
    expect = np.zeros((k - 1, n))
    for j in range(k - 1):
        for e in range(ne):
            expect[j, tails[e]] += msq[j + 1, e]
            expect[j, heads[e]] += msq[j, e]
    expect *= 0.25 * k
    assert np.allclose(a, expect, rtol=1e-13)


def _newton_inputs(krng, km1=4, n=9):
    k = km1 + 1
    R = krng.uniform(0.05, 0.5, size=(km1, n))
    s = krng.uniform(0.0, 0.01, size=(km1, n))
    lam = krng.normal(scale=0.1, size=(k, n))
    dtm = krng.normal(scale=0.05, size=(k, n))
    rho0 = krng.uniform(0.05, 0.5, size=n)
    rhok = krng.uniform(0.05, 0.5, size=n)
    return R, s, lam, dtm, rho0, rhok


def test_density_newton_reaches_stationarity(krng):
    R, s, lam, dtm, rho0, rhok = _newton_inputs(krng)
    beta, floor, tol = 40.0, 1e-9, 1e-11
    steps, warn = _core.density_newton(
        R, s, lam, dtm, rho0, rhok, beta, floor, tol, 60, 1e-4, 0.5
    )
    assert steps > 0
    # projected gradient of the subproblem at the result
    k = R.shape[0] + 1
    rho_full = np.vstack([rho0, R, rhok])
    r = dtm - np.diff(rho_full, axis=0)
    g = -s / R**2 + np.diff(lam, axis=0) + beta * np.diff(r, axis=0)
    free = ~((R <= floor * (1.0 + 1e-9)) & (g > 0.0))
    assert np.max(np.abs(g[free])) < tol


def test_density_newton_parity(krng):
    args = _newton_inputs(krng)
    Ra = args[0].copy()
    Rb = args[0].copy()
    rest = args[1:]
    sa, wa = _core.density_newton(Ra, *rest, 40.0, 1e-9, 1e-11, 60, 1e-4, 0.5)
    sb, wb = _fallback.density_newton(Rb, *rest, 40.0, 1e-9, 1e-11, 60, 1e-4, 0.5)
    assert wa == wb
    # both stop at the same constrained minimizer; allow rounding drift
    assert np.allclose(Ra, Rb, rtol=1e-8, atol=1e-10)


def test_density_newton_respects_floor(krng):
    R, s, lam, dtm, rho0, rhok = _newton_inputs(krng)
    # push hard toward zero with a large negative drift
    lam = np.abs(lam) * 50.0
    floor = 1e-6
    _core.density_newton(R, s, lam, dtm, rho0, rhok, 40.0, floor, 1e-11, 60, 1e-4, 0.5)
    assert np.all(R >= floor)
