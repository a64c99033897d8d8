"""Command-line front end.

Subcommands: solve (scenario -> artifact directory), check (cross-validate
against the reference solvers), render (trajectory -> SVG snapshots),
convergence (history -> SVG plot), generate (emit line/planar scenario
JSON). Flag values override scenario-file settings, which override the
built-in defaults; the effective settings land in summary.json. Exit codes
follow the contract in each command's docstring. ``CAPFLOW_LOG`` selects
the log level (DEBUG, INFO, WARNING, ...).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace as _replace
from typing import Optional

import numpy as np

from . import __version__
from .errors import CapflowError, OracleInfeasibleError, OracleSizeError
from .fd import ENFORCE_ALL, ENFORCE_INTERIOR, FdParams
from .oracle import solve_barrier
from .output import (
    CONVERGENCE_FILE,
    SCENARIO_FILE,
    load_convergence,
    load_trajectory,
    save_trajectory,
)
from .render import RenderSpec, render_convergence, render_trajectory
from .scenario import (
    Scenario,
    generate_line,
    generate_planar,
    load_scenario,
    parse_scenario,
    save_scenario,
)
from .solver import SolverSettings, solve

__all__ = ["main"]

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MAX_ITERS = 2
EXIT_ORACLE_DISAGREES = 3

CHECK_GAP_LIMIT = 1e-5


def _solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--beta", type=float, help="continuity penalty weight")
    parser.add_argument("--gamma", type=float, help="capacity-consensus penalty weight")
    parser.add_argument("--tol", type=float, help="primal residual tolerance")
    parser.add_argument("--max-iters", type=int, help="iteration budget")
    parser.add_argument(
        "--no-fd", action="store_true",
        help="drop capacity upper bounds (keeps momentum nonnegativity)",
    )
    parser.add_argument(
        "--fd-steps", choices=[ENFORCE_ALL, ENFORCE_INTERIOR],
        help="which time steps get capacity bounds",
    )
    parser.add_argument("--seed", type=int, help="seed for randomized initialization")
    parser.add_argument("--threads", type=int, help="worker threads for the momentum block")


def _apply_flags(scenario: Scenario, args: argparse.Namespace) -> Scenario:
    """Fold command-line overrides into the scenario (flags beat file)."""
    overrides = {}
    for flag, field in [("beta", "beta"), ("gamma", "gamma"), ("tol", "tol_primal"),
                        ("max_iters", "max_iters"), ("threads", "threads")]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    settings = scenario.settings.with_overrides(**overrides) if overrides else scenario.settings
    fd = scenario.fd
    if getattr(args, "no_fd", False):
        fd = FdParams.build(1.0, 1.0, fd.k, fd.n_edges, enabled=False)
    elif getattr(args, "fd_steps", None) and fd.enabled:
        fd = FdParams.build(
            fd.v0, fd.rho_hat, fd.k, fd.n_edges,
            enforcement=args.fd_steps, enabled=True,
        )
    if settings is scenario.settings and fd is scenario.fd:
        return scenario
    return _replace(scenario, settings=settings, fd=fd)


def cmd_solve(args: argparse.Namespace) -> int:
    """Exit 0 on convergence, 2 on exhausted iteration budget, 1 on bad
    input."""
    scenario = _apply_flags(load_scenario(args.scenario), args)
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    traj = solve(scenario, rng=rng)
    save_trajectory(traj, args.outdir, scenario=scenario)
    status = "converged" if traj.converged else "max-iters"
    print(
        f"{scenario.name}: {status} after {traj.iterations} iterations, "
        f"objective {traj.objective:.12g}, residuals "
        f"{traj.residual_continuity:.3e}/{traj.residual_consensus:.3e}"
    )
    print(f"wrote {os.path.abspath(args.outdir)}")
    return EXIT_OK if traj.converged else EXIT_MAX_ITERS


def cmd_check(args: argparse.Namespace) -> int:
    """Exit 0 when ADMM and the barrier reference agree (relative gap below
    1e-5), 3 when the reference declares the scenario infeasible but ADMM
    claimed convergence, 1 on refusal or bad input."""
    scenario = _apply_flags(load_scenario(args.scenario), args)
    traj = solve(scenario)
    try:
        ref = solve_barrier(scenario)
    except OracleSizeError as exc:
        print(f"refusing: {exc}", file=sys.stderr)
        print(
            "use a scenario small enough for the reference solver "
            "(see capflow.oracle size limits)", file=sys.stderr,
        )
        return EXIT_ERROR
    except OracleInfeasibleError as exc:
        if traj.converged:
            print(
                f"reference reports infeasible ({exc}) but the solver "
                f"converged; this indicates a solver bug", file=sys.stderr,
            )
            return EXIT_ORACLE_DISAGREES
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_ERROR
    gap = abs(traj.objective - ref.objective) / max(1.0, abs(ref.objective))
    print(f"solver objective     {traj.objective:.12g}")
    print(f"reference objective  {ref.objective:.12g}")
    print(f"relative gap         {gap:.3e}")
    print(
        f"solver residuals     {traj.residual_continuity:.3e}/"
        f"{traj.residual_consensus:.3e}"
    )
    print(f"reference gap bound  {ref.gap:.3e} (kkt {ref.kkt_residual:.3e})")
    return EXIT_OK if gap < CHECK_GAP_LIMIT else EXIT_MAX_ITERS


def cmd_render(args: argparse.Namespace) -> int:
    traj = load_trajectory(args.rundir)
    spath = os.path.join(args.rundir, SCENARIO_FILE)
    coords = None
    if os.path.exists(spath):
        coords = parse_scenario(json.load(open(spath))).coordinates
    if coords is None:
        raise CapflowError(
            "no vertex coordinates available; add graph.coordinates to the "
            "scenario and re-run solve"
        )
    frames = None
    if args.snapshots:
        frames = tuple(int(s) for s in args.snapshots.split(","))
    spec = RenderSpec(snapshots=frames, filmstrip=not args.no_filmstrip)
    outdir = args.outdir or args.rundir
    written = render_trajectory(traj, coords, outdir, spec)
    print(f"wrote {len(written)} SVG files to {os.path.abspath(outdir)}")
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace) -> int:
    cpath = os.path.join(args.rundir, CONVERGENCE_FILE)
    if not os.path.exists(cpath):
        raise CapflowError(f"{cpath} not found; run solve first")
    history = load_convergence(cpath)
    out = args.output or os.path.join(args.rundir, "convergence.svg")
    render_convergence(history, out, reference=args.reference)
    print(f"wrote {os.path.abspath(out)}")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    if args.kind == "line":
        data = generate_line(args.n, args.k, fd_enabled=not args.no_fd)
    else:
        data = generate_planar(args.n, args.seed if args.seed is not None else 0,
                               k=args.k, fd_enabled=not args.no_fd)
    parse_scenario(data)  # validate before writing
    save_scenario(data, args.output)
    print(f"wrote {os.path.abspath(args.output)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capflow",
        description="capacity-constrained dynamic transport on graphs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a scenario and write artifacts")
    p.add_argument("scenario", help="scenario JSON path")
    p.add_argument("outdir", help="artifact directory to create")
    _solver_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="cross-validate against the reference solver")
    p.add_argument("scenario", help="scenario JSON path")
    _solver_flags(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("render", help="draw snapshot SVGs from a solve directory")
    p.add_argument("rundir", help="directory written by solve")
    p.add_argument("--outdir", help="where to put SVGs (default: rundir)")
    p.add_argument("--snapshots", help="comma-separated snapshot indices")
    p.add_argument("--no-filmstrip", action="store_true", help="skip the combined strip")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("convergence", help="plot objective vs iteration")
    p.add_argument("rundir", help="directory written by solve")
    p.add_argument("--output", help="SVG path (default: rundir/convergence.svg)")
    p.add_argument("--reference", type=float, help="dashed line at this objective")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("generate", help="write a synthetic scenario")
    p.add_argument("kind", choices=["line", "planar"])
    p.add_argument("output", help="scenario JSON path to write")
    p.add_argument("--n", type=int, default=30, help="vertex count")
    p.add_argument("--k", type=int, default=7, help="time steps")
    p.add_argument("--seed", type=int, help="planar layout seed")
    p.add_argument("--no-fd", action="store_true", help="generate without capacity bounds")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(
        level=os.environ.get("CAPFLOW_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
