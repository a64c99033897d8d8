"""Scenario files: parsing, validation, and the two experiment generators.

A scenario file is JSON with four blocks (``graph``, ``marginals``, ``k``,
``fd``) plus an optional ``solver`` block of setting overrides and an
optional ``name``. Unknown keys anywhere are errors; see docs/scenario.md
for the schema. Loaded scenarios are normalized to unit mass, their
marginals lifted to a strictly positive floor, and every such adjustment is
recorded in a provenance block.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import CapflowError, GraphError, ScenarioError
from .fd import ENFORCE_ALL, ENFORCE_INTERIOR, FdParams
from .graph import DirectedGraph, from_undirected_edge_list
from .solver import SolverSettings

__all__ = [
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "scenario_to_dict",
    "save_scenario",
    "generate_line",
    "generate_planar",
]

logger = logging.getLogger(__name__)

FLOOR_SCALE = 1e-8
MASS_MISMATCH_LIMIT = 1e-6
_SOLVER_KEYS = {f.name for f in dataclasses.fields(SolverSettings)}


@dataclass(frozen=True)
class Scenario:
    """A validated problem instance, immutable after loading."""

    name: str
    graph: DirectedGraph
    rho0: np.ndarray
    rhok: np.ndarray
    k: int
    fd: FdParams
    settings: SolverSettings
    floor: float
    coordinates: Optional[np.ndarray]
    provenance: dict


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    scn = parse_scenario(raw, name=path.stem)
    scn.provenance["source"] = str(path)
    return scn


def _require(block: dict, key: str, where: str):
    if key not in block:
        raise ScenarioError(f"missing required field {where}.{key}" if where else f"missing required field {key}")
    return block[key]


def _reject_unknown(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        names = ", ".join(sorted(unknown))
        raise ScenarioError(f"unknown field(s) in {where or 'scenario'}: {names}")


def _as_float_array(value, length: int, field: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.shape != (length,):
        raise ScenarioError(f"{field} must be a flat array of length {length}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ScenarioError(f"{field} contains non-finite entries")
    return arr


def _parse_graph(block, coordinates_out: list) -> DirectedGraph:
    if not isinstance(block, dict):
        raise ScenarioError("graph must be an object")
    _reject_unknown(block, {"n_vertices", "edges", "coordinates"}, "graph")
    n = _require(block, "n_vertices", "graph")
    if not isinstance(n, int) or n < 2:
        raise ScenarioError(f"graph.n_vertices must be an integer >= 2, got {n!r}")
    edges = _require(block, "edges", "graph")
    try:
        g = from_undirected_edge_list(edges, n)
    except GraphError as exc:
        raise ScenarioError(f"graph.edges: {exc}") from exc
    coords = block.get("coordinates")
    if coords is not None:
        arr = np.asarray(coords, dtype=float)
        if arr.shape != (n, 2):
            raise ScenarioError(
                f"graph.coordinates must have shape ({n}, 2), got {arr.shape}"
            )
        coordinates_out.append(arr)
    return g


def _parse_fd_value(value, k: int, n_edges: int, field: str) -> np.ndarray | float:
    """Scalar, per-edge (n_edges), per-step (k), or nested (k, n_edges)."""
    if isinstance(value, (int, float)):
        return float(value)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        if k == n_edges and arr.shape[0] == k:
            raise ScenarioError(
                f"fd.{field}: ambiguous flat array (k == n_edges == {k}); "
                "use a nested per-step, per-edge array"
            )
        if arr.shape[0] not in (k, n_edges):
            raise ScenarioError(
                f"fd.{field}: flat array must have length k={k} (per step) "
                f"or n_edges={n_edges} (per directed edge), got {arr.shape[0]}"
            )
        return arr
    if arr.shape == (k, n_edges):
        return arr
    raise ScenarioError(
        f"fd.{field}: expected scalar, flat array, or shape ({k}, {n_edges}), got {arr.shape}"
    )


def _parse_fd(block, k: int, n_edges: int) -> FdParams:
    if block is None:
        return FdParams.build(1.0, 1.0, k, n_edges, enabled=False)
    if not isinstance(block, dict):
        raise ScenarioError("fd must be an object")
    _reject_unknown(block, {"enabled", "v0", "rho_hat", "enforcement"}, "fd")
    enabled = block.get("enabled", True)
    if not isinstance(enabled, bool):
        raise ScenarioError("fd.enabled must be a boolean")
    enforcement = block.get("enforcement", ENFORCE_INTERIOR)
    if enforcement not in (ENFORCE_INTERIOR, ENFORCE_ALL):
        raise ScenarioError(
            f"fd.enforcement must be {ENFORCE_INTERIOR!r} or {ENFORCE_ALL!r}, got {enforcement!r}"
        )
    if not enabled:
        return FdParams.build(1.0, 1.0, k, n_edges, enforcement=enforcement, enabled=False)
    v0 = _parse_fd_value(_require(block, "v0", "fd"), k, n_edges, "v0")
    rho_hat = _parse_fd_value(_require(block, "rho_hat", "fd"), k, n_edges, "rho_hat")
    try:
        return FdParams.build(v0, rho_hat, k, n_edges, enforcement=enforcement)
    except CapflowError as exc:
        raise ScenarioError(f"fd: {exc}") from exc


def _parse_solver(block) -> SolverSettings:
    if block is None:
        return SolverSettings()
    if not isinstance(block, dict):
        raise ScenarioError("solver must be an object")
    _reject_unknown(block, _SOLVER_KEYS, "solver")
    try:
        return SolverSettings().with_overrides(**block)
    except (TypeError, ValueError, CapflowError) as exc:
        raise ScenarioError(f"solver: {exc}") from exc


def _normalize_marginals(rho0: np.ndarray, rhok: np.ndarray, provenance: dict) -> tuple:
    if rho0.min() < 0.0 or rhok.min() < 0.0:
        raise ScenarioError("marginals must be entrywise nonnegative")
    t0 = float(np.sum(rho0))
    tk = float(np.sum(rhok))
    if t0 <= 0.0 or tk <= 0.0:
        raise ScenarioError("marginal totals must be positive")
    provenance["mass_initial"] = t0
    provenance["mass_final"] = tk
    if abs(t0 - tk) > MASS_MISMATCH_LIMIT * max(t0, tk):
        raise ScenarioError(
            f"marginal masses differ beyond tolerance: {t0!r} vs {tk!r}"
        )
    normalized = abs(t0 - 1.0) > 1e-12 or abs(tk - 1.0) > 1e-12
    if normalized:
        logger.warning("normalizing marginal totals %.17g / %.17g to 1", t0, tk)
        rho0 = rho0 / t0
        rhok = rhok / tk
    provenance["normalized"] = normalized
    return rho0, rhok


def _apply_floor(rho: np.ndarray, floor: float) -> tuple[np.ndarray, float]:
    """Lift entries below the floor and rebalance to unit total. Returns the
    adjusted array and the largest entrywise change."""
    out = np.maximum(rho, floor)
    out = out / np.sum(out)
    np.maximum(out, floor, out=out)
    return out, float(np.max(np.abs(out - rho)))


def parse_scenario(raw: dict, name: str = "scenario") -> Scenario:
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a JSON object")
    _reject_unknown(raw, {"name", "graph", "marginals", "k", "fd", "solver"}, "")
    if "name" in raw:
        if not isinstance(raw["name"], str):
            raise ScenarioError("name must be a string")
        name = raw["name"]

    coords_box: list = []
    graph = _parse_graph(_require(raw, "graph", ""), coords_box)
    n = graph.n_vertices

    marginals = _require(raw, "marginals", "")
    if not isinstance(marginals, dict):
        raise ScenarioError("marginals must be an object")
    _reject_unknown(marginals, {"rho0", "rhok"}, "marginals")
    rho0 = _as_float_array(_require(marginals, "rho0", "marginals"), n, "marginals.rho0")
    rhok = _as_float_array(_require(marginals, "rhok", "marginals"), n, "marginals.rhok")

    k = _require(raw, "k", "")
    if not isinstance(k, int) or k < 1:
        raise ScenarioError(f"k must be an integer >= 1, got {k!r}")

    provenance: dict = {}
    rho0, rhok = _normalize_marginals(rho0, rhok, provenance)
    floor = FLOOR_SCALE / n
    rho0, shift0 = _apply_floor(rho0, floor)
    rhok, shiftk = _apply_floor(rhok, floor)
    provenance["floor"] = floor
    provenance["floor_shift"] = max(shift0, shiftk)

    fd = _parse_fd(raw.get("fd"), k, graph.n_edges)
    settings = _parse_solver(raw.get("solver"))

    return Scenario(
        name=name,
        graph=graph,
        rho0=rho0,
        rhok=rhok,
        k=k,
        fd=fd,
        settings=settings,
        floor=floor,
        coordinates=coords_box[0] if coords_box else None,
        provenance=provenance,
    )


def scenario_to_dict(scn: Scenario) -> dict:
    """Inverse of parse_scenario up to normalization (already applied)."""
    pairs = [[int(scn.graph.tails[2 * j]), int(scn.graph.heads[2 * j])] for j in range(scn.graph.n_pairs)]
    out: dict = {
        "name": scn.name,
        "graph": {"n_vertices": scn.graph.n_vertices, "edges": pairs},
        "marginals": {"rho0": scn.rho0.tolist(), "rhok": scn.rhok.tolist()},
        "k": scn.k,
    }
    if scn.coordinates is not None:
        out["graph"]["coordinates"] = scn.coordinates.tolist()
    if scn.fd.enabled:
        out["fd"] = {
            "enabled": True,
            "v0": scn.fd.v0.tolist(),
            "rho_hat": scn.fd.rho_hat.tolist(),
            "enforcement": scn.fd.enforcement,
        }
    defaults = SolverSettings()
    overrides = {
        f.name: getattr(scn.settings, f.name)
        for f in dataclasses.fields(SolverSettings)
        if getattr(scn.settings, f.name) != getattr(defaults, f.name)
    }
    if overrides:
        out["solver"] = overrides
    return out


def save_scenario(data: dict, path) -> None:
    """Write a scenario dict (e.g. from a generator) as canonical JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")


def _exact_unit_mass(x: np.ndarray) -> np.ndarray:
    x = x / np.sum(x)
    for _ in range(5):
        err = 1.0 - float(np.sum(x))
        if err == 0.0:
            break
        x[int(np.argmax(x))] += err
    return x


def _gaussian_bump(dist_sq: np.ndarray, width: float, base_mass: float) -> np.ndarray:
    return np.exp(-dist_sq / (2.0 * width * width)) + base_mass


def generate_line(
    n: int,
    k: int,
    *,
    center0: float = 0.15,
    centerk: float = 0.85,
    width: float = 0.08,
    base_mass: float = 1e-2,
    v0: float = 3.0,
    rho_hat: float = 0.15,
    fd_enabled: bool = True,
    enforcement: str = ENFORCE_INTERIOR,
    solver: Optional[dict] = None,
    name: Optional[str] = None,
) -> dict:
    """Path graph 0-1-...-(n-1) with a density bump near each end.

    The uniform ``base_mass`` component keeps every vertex comfortably above
    the density floor, which keeps the kinetic weights well conditioned.
    Returns a scenario dict ready for save_scenario or parse_scenario.
    """
    if n < 2:
        raise ScenarioError(f"line scenario needs n >= 2, got {n}")
    if k < 1:
        raise ScenarioError(f"k must be >= 1, got {k}")
    x = np.linspace(0.0, 1.0, n)
    rho0 = _exact_unit_mass(_gaussian_bump((x - center0) ** 2, width, base_mass))
    rhok = _exact_unit_mass(_gaussian_bump((x - centerk) ** 2, width, base_mass))
    data: dict = {
        "name": name or f"line{n}",
        "graph": {
            "n_vertices": n,
            "edges": [[i, i + 1] for i in range(n - 1)],
            "coordinates": [[float(xi), 0.0] for xi in x],
        },
        "marginals": {"rho0": rho0.tolist(), "rhok": rhok.tolist()},
        "k": k,
    }
    if fd_enabled:
        data["fd"] = {
            "enabled": True,
            "v0": v0,
            "rho_hat": rho_hat,
            "enforcement": enforcement,
        }
    if solver:
        data["solver"] = dict(solver)
    return data


DEGREE_TARGET = 614.0 / 291.0  # directed edges per vertex


def _delaunay_pairs(points: np.ndarray) -> list[tuple[int, int]]:
    from scipy.spatial import Delaunay

    tri = Delaunay(points)
    pairs = set()
    for simplex in tri.simplices:
        for a in range(3):
            u, v = int(simplex[a]), int(simplex[(a + 1) % 3])
            pairs.add((min(u, v), max(u, v)))
    return sorted(pairs)


def _prune_to_target(pairs: list, n: int, target_pairs: int, rng: np.random.Generator) -> list:
    """Drop random edges while the graph stays connected."""
    adj = {v: set() for v in range(n)}
    for u, v in pairs:
        adj[u].add(v)
        adj[v].add(u)

    def connected_without(u: int, v: int) -> bool:
        seen = {u}
        stack = [u]
        while stack:
            w = stack.pop()
            if w == v:
                return True
            for x in adj[w]:
                if (w, x) != (u, v) and (x, w) != (v, u) and x not in seen:
                    seen.add(x)
                    stack.append(x)
        return False

    current = list(pairs)
    remaining = len(current)
    changed = True
    while remaining > target_pairs and changed:
        changed = False
        order = rng.permutation(len(current))
        for idx in order:
            if remaining <= target_pairs:
                break
            entry = current[idx]
            if entry is None:
                continue
            u, v = entry
            if len(adj[u]) > 1 and len(adj[v]) > 1 and connected_without(u, v):
                adj[u].discard(v)
                adj[v].discard(u)
                current[idx] = None
                remaining -= 1
                changed = True
        current = [p for p in current if p is not None]
    return sorted(current)


def generate_planar(
    n_target: int,
    seed: int,
    *,
    k: int = 7,
    source_center: tuple[float, float] = (0.8, 0.8),
    target_center: tuple[float, float] = (0.5, 0.1),
    width: float = 0.15,
    base_mass: float = 1e-2,
    v0: float = 2.0,
    rho_hat: float = 0.05,
    fd_enabled: bool = True,
    enforcement: str = ENFORCE_INTERIOR,
    solver: Optional[dict] = None,
    name: Optional[str] = None,
) -> dict:
    """Connected random planar graph at a road-network edge density.

    Delaunay triangulation of seeded uniform points, pruned toward
    ``DEGREE_TARGET`` directed edges per vertex while preserving
    connectivity. Marginals are distance bumps: mass starts near
    ``source_center`` (upper right by default) and ends near
    ``target_center`` (bottom center). Pure function of (parameters, seed).
    """
    if n_target < 10:
        raise ScenarioError(f"planar scenario needs n_target >= 10, got {n_target}")
    rng = np.random.default_rng(seed)
    points = rng.random((n_target, 2))
    pairs = _delaunay_pairs(points)
    target_pairs = max(n_target - 1, int(round(n_target * DEGREE_TARGET / 2.0)))
    pairs = _prune_to_target(pairs, n_target, target_pairs, rng)

    d0 = np.sum((points - np.asarray(source_center)) ** 2, axis=1)
    dk = np.sum((points - np.asarray(target_center)) ** 2, axis=1)
    rho0 = _exact_unit_mass(_gaussian_bump(d0, width, base_mass))
    rhok = _exact_unit_mass(_gaussian_bump(dk, width, base_mass))

    data: dict = {
        "name": name or f"planar{n_target}-s{seed}",
        "graph": {
            "n_vertices": n_target,
            "edges": [[int(u), int(v)] for u, v in pairs],
            "coordinates": [[float(px), float(py)] for px, py in points],
        },
        "marginals": {"rho0": rho0.tolist(), "rhok": rhok.tolist()},
        "k": k,
    }
    if fd_enabled:
        data["fd"] = {
            "enabled": True,
            "v0": v0,
            "rho_hat": rho_hat,
            "enforcement": enforcement,
        }
    if solver:
        data["solver"] = dict(solver)
    return data
