import numpy as np
import pytest

from capflow.errors import OracleInfeasibleError, OracleSizeError
from capflow.oracle import (
    BARRIER_MAX_STEPS,
    BARRIER_MAX_VERTICES,
    _Problem,
    solve_barrier,
    solve_exhaustive,
)
from capflow.scenario import FLOOR_SCALE, generate_line, parse_scenario
from capflow.solver import solve

MICRO_EPS = FLOOR_SCALE / 2.0


@pytest.fixture(scope="module")
def micro():
    eps = MICRO_EPS
    return parse_scenario(
        {
            "graph": {"n_vertices": 2, "edges": [[0, 1]]},
            "marginals": {"rho0": [1.0 - eps, eps], "rhok": [eps, 1.0 - eps]},
            "k": 1,
        }
    )


def micro_exact():
    # net flow 1 - 2*eps over one forward edge with weight 1/(1 - eps)
    eps = MICRO_EPS
    return (1.0 - 2.0 * eps) ** 2 / (2.0 * (1.0 - eps))


def test_barrier_micro(micro):
    res = solve_barrier(micro)
    assert res.method == "barrier"
    assert res.objective == pytest.approx(micro_exact(), rel=1e-8)
    assert res.continuity_residual < 1e-9
    assert res.kkt_residual < 1e-4
    assert res.gap < 1e-8


def test_exhaustive_micro(micro):
    res = solve_exhaustive(micro)
    assert res.method == "exhaustive"
    assert res.objective == pytest.approx(micro_exact(), rel=1e-8)
    # one forward edge carries the whole net flow
    assert res.m[0, 0] == pytest.approx(1.0 - 2.0 * MICRO_EPS, abs=1e-7)
    assert res.m[0, 1] == pytest.approx(0.0, abs=1e-7)


def test_barrier_matches_solver_without_fd():
    sc = parse_scenario(generate_line(8, 3, fd_enabled=False))
    res = solve_barrier(sc)
    traj = solve(sc, settings=sc.settings.with_overrides(beta=200.0, gamma=50.0))
    assert traj.converged
    gap = abs(traj.objective - res.objective) / max(1.0, abs(res.objective))
    assert gap < 1e-6


def test_barrier_matches_solver_with_inactive_caps():
    # generous jam density: the caps never bind, both formulations coincide
    sc = parse_scenario(generate_line(8, 3, rho_hat=5.0, v0=3.0))
    res = solve_barrier(sc)
    traj = solve(sc, settings=sc.settings.with_overrides(beta=200.0, gamma=50.0))
    assert traj.converged
    gap = abs(traj.objective - res.objective) / max(1.0, abs(res.objective))
    assert gap < 1e-6


def test_jammed_instance_ordering():
    # peaked marginals far above jam density: the smooth-curve reference
    # restricts harder than the saturating projection, so its optimum
    # dominates the splitting objective
    sc = parse_scenario(generate_line(8, 3, rho_hat=0.15, v0=3.0, width=0.05, base_mass=1e-3))
    res = solve_barrier(sc)
    traj = solve(sc, settings=sc.settings.with_overrides(beta=200.0, gamma=50.0))
    assert traj.converged
    assert res.objective >= traj.objective - 1e-6


def test_infeasible_cap_detected():
    n = 6
    rho0 = np.full(n, 0.02)
    rho0[0] = 0.9
    rhok = np.full(n, 0.02)
    rhok[-1] = 0.9
    doc = {
        "graph": {"n_vertices": n, "edges": [[i, i + 1] for i in range(n - 1)]},
        "marginals": {"rho0": (rho0 / rho0.sum()).tolist(), "rhok": (rhok / rhok.sum()).tolist()},
        "k": 4,
        "fd": {"enabled": True, "v0": 1.0, "rho_hat": 0.1, "enforcement": "all"},
    }
    with pytest.raises(OracleInfeasibleError):
        solve_barrier(parse_scenario(doc))


def test_size_refusals():
    big = parse_scenario(generate_line(BARRIER_MAX_VERTICES + 1, 3))
    with pytest.raises(OracleSizeError):
        solve_barrier(big)
    long = parse_scenario(generate_line(8, BARRIER_MAX_STEPS + 1))
    with pytest.raises(OracleSizeError):
        solve_barrier(long)
    wide = parse_scenario(generate_line(10, 3))
    with pytest.raises(OracleSizeError):
        solve_exhaustive(wide)


def test_feasible_starts_satisfy_equalities():
    sc = parse_scenario(generate_line(8, 3))
    p = _Problem(sc)
    for z in (p.interpolation_start(), p.uniform_start()):
        assert np.max(np.abs(p.A @ z - p.b)) < 1e-10
    # generous speed and jam density: interpolation already strictly feasible
    mild = _Problem(parse_scenario(generate_line(8, 3, v0=50.0, rho_hat=5.0)))
    assert float(np.min(mild.slacks(mild.interpolation_start()))) > 0.0


def test_uniform_start_clears_peaked_interpolation():
    # marginals peak far above jam density; interpolated interiors violate
    # the cap rows but the uniform interior does not
    sc = parse_scenario(generate_line(8, 3, rho_hat=0.15, v0=3.0, width=0.05, base_mass=1e-3))
    p = _Problem(sc)
    assert float(np.min(p.slacks(p.interpolation_start()))) <= 0.0
    assert float(np.min(p.slacks(p.uniform_start()))) > 0.0


def test_barrier_certificates_on_fd_active_run():
    sc = parse_scenario(generate_line(8, 3, rho_hat=5.0))
    res = solve_barrier(sc)
    assert res.continuity_residual < 1e-8
    assert np.all(res.m >= -1e-12)
    masses = res.rho.sum(axis=1)
    assert np.max(np.abs(masses - 1.0)) < 1e-8
