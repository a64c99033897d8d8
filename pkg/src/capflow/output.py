"""Trajectory, summary, and convergence-report files.

A solve's artifact directory holds density.csv (`step,vertex,density`,
snapshots 0..k), momentum.csv (`step,tail,head,momentum`, steps 1..k),
convergence.csv (per-iteration progress), summary.json (objective,
residuals, effective settings and their hash), and a copy of the scenario
for downstream rendering. All floats are written with 17 significant
digits, so parse-and-rewrite is byte identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import asdict
from typing import Optional

import numpy as np

from . import __version__
from .errors import CapflowError
from .solver import IterationRecord, SolverSettings, Trajectory

__all__ = [
    "save_trajectory",
    "load_trajectory",
    "save_convergence",
    "load_convergence",
    "settings_digest",
    "summary_dict",
]

FLOAT_FMT = "%.17g"

DENSITY_FILE = "density.csv"
MOMENTUM_FILE = "momentum.csv"
CONVERGENCE_FILE = "convergence.csv"
SUMMARY_FILE = "summary.json"
SCENARIO_FILE = "scenario.json"


def _fmt(x: float) -> str:
    return FLOAT_FMT % float(x)


def settings_digest(settings: SolverSettings) -> str:
    """sha256 over the canonical JSON encoding of the settings."""
    payload = json.dumps(asdict(settings), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("ascii")).hexdigest()


def summary_dict(traj: Trajectory, scenario=None) -> dict:
    """JSON-ready run summary with the effective settings echoed back."""
    settings = traj.settings or SolverSettings()
    out = {
        "capflow_version": __version__,
        "objective": float(traj.objective),
        "converged": bool(traj.converged),
        "iterations": int(traj.iterations),
        "residual_continuity": float(traj.residual_continuity),
        "residual_consensus": float(traj.residual_consensus),
        "snapshots": int(traj.rho.shape[0]),
        "n_vertices": int(traj.rho.shape[1]),
        "n_edges": int(traj.momentum.shape[1]),
        "settings": asdict(settings),
        "settings_sha256": settings_digest(settings),
        "diagnostics": {
            key: val for key, val in sorted(traj.diagnostics.items())
            if isinstance(val, (str, int, float, bool))
        },
    }
    if scenario is not None:
        out["scenario_name"] = scenario.name
        out["provenance"] = dict(scenario.provenance)
    return out


def save_trajectory(traj: Trajectory, outdir: str, scenario=None) -> None:
    """Write the artifact directory; see module docstring for the layout.

    ``scenario`` enriches summary.json and is copied alongside so render
    commands can find vertex coordinates without the original path.
    """
    if traj.graph is None:
        raise CapflowError("trajectory has no graph attached; cannot serialize")
    os.makedirs(outdir, exist_ok=True)
    k = traj.momentum.shape[0]
    n = traj.rho.shape[1]
    tails, heads = traj.graph.tails, traj.graph.heads

    with open(os.path.join(outdir, DENSITY_FILE), "w", newline="") as fh:
        fh.write("step,vertex,density\n")
        for i in range(k + 1):
            row = traj.rho[i]
            for v in range(n):
                fh.write(f"{i},{v},{_fmt(row[v])}\n")

    with open(os.path.join(outdir, MOMENTUM_FILE), "w", newline="") as fh:
        fh.write("step,tail,head,momentum\n")
        for i in range(k):
            row = traj.momentum[i]
            for e in range(tails.size):
                fh.write(f"{i + 1},{tails[e]},{heads[e]},{_fmt(row[e])}\n")

    if traj.history:
        save_convergence(traj.history, os.path.join(outdir, CONVERGENCE_FILE))

    summary = summary_dict(traj, scenario)
    with open(os.path.join(outdir, SUMMARY_FILE), "w", newline="") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")

    if scenario is not None:
        from .scenario import save_scenario, scenario_to_dict

        save_scenario(scenario_to_dict(scenario), os.path.join(outdir, SCENARIO_FILE))


def load_trajectory(outdir: str) -> Trajectory:
    """Rebuild a Trajectory from an artifact directory.

    The graph is reconstructed from the momentum rows' (tail, head) pairs;
    history comes from convergence.csv when present.
    """
    from .graph import from_directed_edges

    spath = os.path.join(outdir, SUMMARY_FILE)
    try:
        with open(spath) as fh:
            summary = json.load(fh)
    except OSError as exc:
        raise CapflowError(f"cannot read {spath}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CapflowError(f"{spath} is not valid JSON: {exc}") from exc

    k = summary["snapshots"] - 1
    n = summary["n_vertices"]
    n_edges = summary["n_edges"]

    rho = np.zeros((k + 1, n))
    with open(os.path.join(outdir, DENSITY_FILE), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["step", "vertex", "density"]:
            raise CapflowError(f"unexpected density.csv header: {header}")
        for step, vertex, value in reader:
            rho[int(step), int(vertex)] = float(value)

    momentum = np.zeros((k, n_edges))
    tails = np.zeros(n_edges, dtype=np.int64)
    heads = np.zeros(n_edges, dtype=np.int64)
    with open(os.path.join(outdir, MOMENTUM_FILE), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["step", "tail", "head", "momentum"]:
            raise CapflowError(f"unexpected momentum.csv header: {header}")
        for idx, (step, tail, head, value) in enumerate(reader):
            i = int(step) - 1
            e = idx % n_edges
            momentum[i, e] = float(value)
            if i == 0:
                tails[e] = int(tail)
                heads[e] = int(head)

    graph = from_directed_edges(
        [(int(t), int(h)) for t, h in zip(tails, heads)], n,
        allow_disconnected=True,
    )
    cpath = os.path.join(outdir, CONVERGENCE_FILE)
    history = load_convergence(cpath) if os.path.exists(cpath) else []
    settings = SolverSettings(**summary["settings"])
    return Trajectory(
        rho=rho,
        momentum=momentum,
        objective=summary["objective"],
        converged=summary["converged"],
        iterations=summary["iterations"],
        residual_continuity=summary["residual_continuity"],
        residual_consensus=summary["residual_consensus"],
        graph=graph,
        settings=settings,
        history=history,
        diagnostics=dict(summary.get("diagnostics", {})),
    )


def save_convergence(history: list[IterationRecord], path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("iteration,objective,residual_continuity,residual_consensus,newton_steps\n")
        for rec in history:
            fh.write(
                f"{rec.iteration},{_fmt(rec.objective)},{_fmt(rec.residual_continuity)},"
                f"{_fmt(rec.residual_consensus)},{rec.newton_steps}\n"
            )


def load_convergence(path: str) -> list[IterationRecord]:
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["iteration", "objective", "residual_continuity",
                    "residual_consensus", "newton_steps"]
        if header != expected:
            raise CapflowError(f"unexpected convergence.csv header: {header}")
        for it, obj, rc, rq, ns in reader:
            records.append(IterationRecord(int(it), float(obj), float(rc), float(rq), int(ns)))
    return records
