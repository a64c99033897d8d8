"""Congestion-aware dynamic mass transport on directed graphs.

Densities live on vertices at k+1 evenly spaced snapshots, momenta on
directed edges at the k interval midpoints. The solver minimizes the
discrete kinetic action subject to the continuity equation and, when
enabled, fundamental-diagram capacity bounds on each edge flux.
"""

__version__ = "0.1.0"

from .discretize import TimeGrid, action, continuity_residual, midpoint_densities
from .errors import (
    CapflowError,
    DensityFloorError,
    GraphError,
    OracleInfeasibleError,
    OracleSizeError,
    ScenarioError,
    SolverBreakdownError,
)
from .fd import ENFORCE_ALL, ENFORCE_INTERIOR, FdParams, capacity, project_fd_set
from .graph import DirectedGraph, from_directed_edges, from_undirected_edge_list
from .oracle import OracleResult, solve_barrier, solve_exhaustive
from .output import load_trajectory, save_convergence, save_trajectory
from .scenario import (
    Scenario,
    generate_line,
    generate_planar,
    load_scenario,
    parse_scenario,
    save_scenario,
)
from .solver import SolverSettings, Trajectory, solve

__all__ = [
    "CapflowError",
    "DensityFloorError",
    "DirectedGraph",
    "ENFORCE_ALL",
    "ENFORCE_INTERIOR",
    "FdParams",
    "GraphError",
    "OracleInfeasibleError",
    "OracleResult",
    "OracleSizeError",
    "Scenario",
    "ScenarioError",
    "SolverBreakdownError",
    "SolverSettings",
    "TimeGrid",
    "Trajectory",
    "action",
    "capacity",
    "continuity_residual",
    "from_directed_edges",
    "from_undirected_edge_list",
    "generate_line",
    "generate_planar",
    "load_scenario",
    "load_trajectory",
    "midpoint_densities",
    "parse_scenario",
    "project_fd_set",
    "save_convergence",
    "save_scenario",
    "save_trajectory",
    "solve",
    "solve_barrier",
    "solve_exhaustive",
    "__version__",
]
