"""Time the compiled kernels against the pure-Python fallback.

Per-kernel timings run both backends in one process; the end-to-end solve
comparison (--solve) spawns subprocesses because the backend is fixed at
import time via CAPFLOW_PURE_PYTHON.

Usage: python3 benchmarks/bench_kernels.py [--repeats 5] [--solve]
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from capflow.kernels import _fallback

try:
    from capflow.kernels import _core
except ImportError:
    _core = None


def build_inputs(rng, k=7, n=291, ne=614):
    """Planar-scale arrays shared by both backends."""
    rho_bar = rng.uniform(0.01, 0.08, size=(k, ne))
    v0 = np.full(ne, 2.0)
    rho_hat = np.full(ne, 0.05)
    caps = _fallback.greenshields_caps(rho_bar, v0, rho_hat)
    m = rng.uniform(0.0, 0.05, size=(k, ne))
    w = rng.uniform(1.0, 50.0, size=(k, ne))
    diag = rng.uniform(2.0, 8.0, size=(n, k - 1))
    rhs = rng.standard_normal((n, k - 1))
    tails = rng.integers(0, n, size=ne)
    heads = (tails + 1 + rng.integers(0, n - 1, size=ne)) % n

    R = rng.uniform(0.002, 0.05, size=(k - 1, n))
    s = rng.uniform(1e-8, 1e-4, size=(k - 1, n))
    lam = rng.standard_normal((k, n)) * 0.1
    dtm = rng.standard_normal((k, n)) * 1e-3
    rho0 = rng.uniform(0.002, 0.05, size=n)
    rhok = rng.uniform(0.002, 0.05, size=n)
    return {
        "caps": (rho_bar, v0, rho_hat),
        "clamp": (m, caps),
        "weights": (rho_bar + 0.01, rho_bar + 0.02, float(k)),
        "energy": (w, m),
        "tridiag": (diag, -1.0, rhs),
        "scatter": (m * m, tails, heads, n, float(k)),
        "newton": (R, s, lam, dtm, rho0, rhok, 100.0, 1e-10, 1e-10, 30,
                   1e-4, 0.5),
    }


def run_kernel(mod, name, args):
    if name == "caps":
        return mod.greenshields_caps(*args)
    if name == "clamp":
        return mod.clamp_with_caps(*args)
    if name == "weights":
        return mod.kinetic_weights(*args)
    if name == "energy":
        return mod.weighted_energy(*args)
    if name == "tridiag":
        return mod.solve_symmetric_tridiag(*args)
    if name == "scatter":
        return mod.scatter_kinetic_coeff(*args)
    if name == "newton":
        # density_newton mutates its first argument; hand it a copy
        R = args[0].copy()
        return mod.density_newton(R, *args[1:])
    raise ValueError(name)


def best_ms(mod, name, args, repeats):
    t = timeit.repeat(
        lambda: run_kernel(mod, name, args), number=10, repeat=repeats
    )
    return 1000.0 * min(t) / 10.0


def bench_solve(pure):
    code = (
        "import time, numpy as np\n"
        "from capflow.scenario import generate_line, parse_scenario\n"
        "from capflow.solver import SolverSettings, solve\n"
        "from capflow.kernels import BACKEND\n"
        "scn = parse_scenario(generate_line(30, 7))\n"
        "s = SolverSettings(beta=600.0, gamma=150.0, max_iters=2000,\n"
        "                   tol_primal=0.0)\n"
        "solve(scn, SolverSettings(beta=600.0, gamma=150.0, max_iters=50))\n"
        "t0 = time.time()\n"
        "traj = solve(scn, s)\n"
        "dt = time.time() - t0\n"
        "print(f'{BACKEND}: {1000.0 * dt / traj.iterations:.3f} ms/iteration "
        "({traj.iterations} iterations)')\n"
    )
    env = dict(os.environ)
    if pure:
        env["CAPFLOW_PURE_PYTHON"] = "1"
    else:
        env.pop("CAPFLOW_PURE_PYTHON", None)
    subprocess.run([sys.executable, "-c", code], env=env, check=True)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5,
                        help="timeit repetitions per kernel")
    parser.add_argument("--solve", action="store_true",
                        help="also time a 30-vertex end-to-end solve per backend")
    args = parser.parse_args(argv)

    rng = np.random.default_rng(20240817)
    inputs = build_inputs(rng)

    print(f"{'kernel':<10} {'python ms':>10} {'compiled ms':>12} {'speedup':>8}")
    for name in ["caps", "clamp", "weights", "energy", "tridiag", "scatter",
                 "newton"]:
        py = best_ms(_fallback, name, inputs[name], args.repeats)
        if _core is None:
            print(f"{name:<10} {py:>10.3f} {'n/a':>12} {'n/a':>8}")
            continue
        cy = best_ms(_core, name, inputs[name], args.repeats)
        print(f"{name:<10} {py:>10.3f} {cy:>12.3f} {py / cy:>7.1f}x")
    if _core is None:
        print("compiled backend unavailable; build with pip install -e .")

    if args.solve:
        print()
        bench_solve(pure=False)
        bench_solve(pure=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
