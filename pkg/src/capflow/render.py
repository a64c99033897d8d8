"""SVG snapshot and convergence-report rendering.

Snapshots draw vertices as circles colored blue (empty) through red (full
relative to the densest snapshot) with marker area proportional to mass,
and edges as translucent bars whose width tracks the net momentum through
the underlying undirected pair, averaged centered in time. Color, size,
and width scales are computed once per trajectory so frames compare
directly. Everything is written as plain SVG text; no plotting library.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import CapflowError
from .solver import IterationRecord, Trajectory

__all__ = [
    "RenderSpec",
    "net_momentum",
    "render_trajectory",
    "render_convergence",
]


@dataclass(frozen=True)
class RenderSpec:
    """Layout knobs for snapshot rendering."""

    snapshots: Optional[tuple[int, ...]] = None  # None draws every snapshot
    width: int = 640
    height: int = 640
    margin: float = 48.0
    node_radius_max: float = 13.0
    node_radius_min: float = 1.5
    edge_width_max: float = 7.0
    edge_width_min: float = 0.4
    filmstrip: bool = True

    def frame_list(self, n_snapshots: int) -> list[int]:
        if self.snapshots is None:
            return list(range(n_snapshots))
        frames = []
        for s in self.snapshots:
            if not 0 <= s < n_snapshots:
                raise CapflowError(
                    f"snapshot {s} out of range 0..{n_snapshots - 1}"
                )
            frames.append(int(s))
        return frames


def _opposing_pairs(graph) -> Optional[np.ndarray]:
    """Indices (n_pairs, 2) of forward/reverse rows when the edge list is
    the two-orientations-per-pair layout, else None."""
    t, h = graph.tails, graph.heads
    if t.size == 0 or t.size % 2 != 0:
        return None
    fwd = np.arange(0, t.size, 2)
    rev = fwd + 1
    if np.array_equal(t[fwd], h[rev]) and np.array_equal(h[fwd], t[rev]):
        return np.stack([fwd, rev], axis=1)
    return None


def net_momentum(traj: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-snapshot net momentum for drawing.

    Momentum rows live at interval midpoints, so snapshot i gets the
    average of the two adjacent rows (single sided at the endpoints).
    Opposing orientations of one undirected pair are netted against each
    other; a general directed edge list is left unpaired. Returns
    (net (k+1, n_drawn), tails, heads) with net signed along tail->head.
    """
    m = traj.momentum
    k = m.shape[0]
    avg = np.empty((k + 1, m.shape[1]))
    avg[0] = m[0]
    avg[k] = m[k - 1]
    for i in range(1, k):
        avg[i] = 0.5 * (m[i - 1] + m[i])
    pairs = _opposing_pairs(traj.graph)
    if pairs is None:
        return avg, traj.graph.tails, traj.graph.heads
    net = avg[:, pairs[:, 0]] - avg[:, pairs[:, 1]]
    return net, traj.graph.tails[pairs[:, 0]], traj.graph.heads[pairs[:, 0]]


def _color(density: float, dmax: float) -> str:
    x = 0.0 if dmax <= 0.0 else min(max(density / dmax, 0.0), 1.0)
    r = int(round(255 * x))
    b = int(round(255 * (1.0 - x)))
    return f"#{r:02x}30{b:02x}"


def _project(coords: np.ndarray, spec: RenderSpec) -> np.ndarray:
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.where(hi - lo > 1e-12, hi - lo, 1.0)
    unit = (coords - lo) / span
    x = spec.margin + unit[:, 0] * (spec.width - 2.0 * spec.margin)
    # SVG y grows downward
    y = spec.height - spec.margin - unit[:, 1] * (spec.height - 2.0 * spec.margin)
    return np.stack([x, y], axis=1)


def _snapshot_body(
    rho_row: np.ndarray,
    net_row: np.ndarray,
    tails: np.ndarray,
    heads: np.ndarray,
    pos: np.ndarray,
    rho_max: float,
    net_max: float,
    spec: RenderSpec,
    x0: float = 0.0,
) -> list[str]:
    parts = []
    for e in range(tails.size):
        a, b = pos[tails[e]], pos[heads[e]]
        mag = abs(float(net_row[e]))
        w = spec.edge_width_min
        if net_max > 0.0:
            w += (spec.edge_width_max - spec.edge_width_min) * mag / net_max
        parts.append(
            f'<line x1="{x0 + a[0]:.2f}" y1="{a[1]:.2f}" x2="{x0 + b[0]:.2f}" '
            f'y2="{b[1]:.2f}" stroke="#2060b0" stroke-opacity="0.55" '
            f'stroke-width="{w:.2f}" stroke-linecap="round"/>'
        )
    for v in range(rho_row.size):
        frac = 0.0 if rho_max <= 0.0 else float(rho_row[v]) / rho_max
        r = spec.node_radius_min + (
            spec.node_radius_max - spec.node_radius_min
        ) * np.sqrt(min(max(frac, 0.0), 1.0))
        parts.append(
            f'<circle cx="{x0 + pos[v][0]:.2f}" cy="{pos[v][1]:.2f}" r="{r:.2f}" '
            f'fill="{_color(float(rho_row[v]), rho_max)}" fill-opacity="0.9"/>'
        )
    return parts


def _svg(width: float, height: float, body: list[str], title: str) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f"<!-- capflow {__version__} -->",
        f'<title>{title}</title>',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def render_trajectory(
    traj: Trajectory,
    coordinates: Sequence[Sequence[float]],
    outdir: str,
    spec: Optional[RenderSpec] = None,
) -> list[str]:
    """Write one SVG per requested snapshot plus a filmstrip; returns the
    paths written. Vertex coordinates are required; scenarios without them
    must add a graph.coordinates block before rendering."""
    if coordinates is None:
        raise CapflowError(
            "no vertex coordinates available; add graph.coordinates to the "
            "scenario to render it"
        )
    spec = spec or RenderSpec()
    coords = np.asarray(coordinates, dtype=float)
    n = traj.rho.shape[1]
    if coords.shape != (n, 2):
        raise CapflowError(
            f"coordinates shape {coords.shape} does not match {n} vertices"
        )
    net, tails, heads = net_momentum(traj)
    frames = spec.frame_list(traj.rho.shape[0])
    pos = _project(coords, spec)
    rho_max = float(traj.rho.max())
    net_max = float(np.max(np.abs(net))) if net.size else 0.0

    os.makedirs(outdir, exist_ok=True)
    written = []
    for s in frames:
        body = _snapshot_body(
            traj.rho[s], net[s], tails, heads, pos, rho_max, net_max, spec
        )
        body.append(
            f'<text x="{spec.margin:.0f}" y="{0.6 * spec.margin:.0f}" '
            f'font-family="monospace" font-size="14">snapshot {s}</text>'
        )
        path = os.path.join(outdir, f"snapshot_{s:03d}.svg")
        with open(path, "w", newline="") as fh:
            fh.write(_svg(spec.width, spec.height, body, f"snapshot {s}"))
        written.append(path)

    if spec.filmstrip and frames:
        body = []
        for idx, s in enumerate(frames):
            x0 = idx * spec.width
            body.extend(
                _snapshot_body(
                    traj.rho[s], net[s], tails, heads, pos, rho_max, net_max,
                    spec, x0=x0,
                )
            )
            body.append(
                f'<text x="{x0 + spec.margin:.0f}" y="{0.6 * spec.margin:.0f}" '
                f'font-family="monospace" font-size="14">t={s}</text>'
            )
            if idx:
                body.append(
                    f'<line x1="{x0:.1f}" y1="0" x2="{x0:.1f}" '
                    f'y2="{spec.height}" stroke="#cccccc" stroke-width="1"/>'
                )
        path = os.path.join(outdir, "filmstrip.svg")
        with open(path, "w", newline="") as fh:
            fh.write(
                _svg(spec.width * len(frames), spec.height, body, "filmstrip")
            )
        written.append(path)
    return written


def render_convergence(
    history: Sequence[IterationRecord],
    path: str,
    reference: Optional[float] = None,
    width: int = 720,
    height: int = 460,
) -> str:
    """Objective versus iteration as an SVG line plot, with an optional
    dashed horizontal line at a reference objective."""
    if not history:
        raise CapflowError("empty iteration history; nothing to plot")
    margin = 64.0
    its = np.array([rec.iteration for rec in history], dtype=float)
    objs = np.array([rec.objective for rec in history], dtype=float)
    finite = np.isfinite(objs)
    if not finite.any():
        raise CapflowError("iteration history has no finite objectives")
    ymin = float(objs[finite].min())
    ymax = float(objs[finite].max())
    if reference is not None:
        ymin = min(ymin, reference)
        ymax = max(ymax, reference)
    if ymax - ymin <= 0.0:
        ymax = ymin + 1.0
    pad = 0.05 * (ymax - ymin)
    ymin -= pad
    ymax += pad
    x0, x1 = float(its[0]), float(its[-1])
    if x1 <= x0:
        x1 = x0 + 1.0

    def X(i: float) -> float:
        return margin + (i - x0) / (x1 - x0) * (width - 2.0 * margin)

    def Y(o: float) -> float:
        return height - margin - (o - ymin) / (ymax - ymin) * (height - 2.0 * margin)

    body = [
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black" stroke-width="1"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black" stroke-width="1"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xi = x0 + frac * (x1 - x0)
        yi = ymin + pad + frac * (ymax - ymin - 2.0 * pad)
        body.append(
            f'<text x="{X(xi):.1f}" y="{height - margin + 18:.1f}" '
            f'font-family="monospace" font-size="11" text-anchor="middle">'
            f"{xi:.0f}</text>"
        )
        body.append(
            f'<text x="{margin - 8:.1f}" y="{Y(yi) + 4:.1f}" '
            f'font-family="monospace" font-size="11" text-anchor="end">'
            f"{yi:.4g}</text>"
        )
    if reference is not None:
        body.append(
            f'<line x1="{margin}" y1="{Y(reference):.2f}" '
            f'x2="{width - margin}" y2="{Y(reference):.2f}" stroke="#c03020" '
            f'stroke-width="1.2" stroke-dasharray="6,4"/>'
        )
    pts = " ".join(
        f"{X(i):.2f},{Y(o):.2f}" for i, o in zip(its[finite], objs[finite])
    )
    body.append(
        f'<polyline points="{pts}" fill="none" stroke="#2060b0" '
        'stroke-width="1.5"/>'
    )
    body.append(
        f'<text x="{0.5 * width:.0f}" y="{height - 16:.0f}" '
        'font-family="monospace" font-size="12" text-anchor="middle">'
        "iteration</text>"
    )
    body.append(
        f'<text x="{0.35 * margin:.0f}" y="{0.5 * height:.0f}" '
        'font-family="monospace" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 {0.35 * margin:.0f} {0.5 * height:.0f})">'
        "objective</text>"
    )
    svg = _svg(width, height, body, "convergence")
    with open(path, "w", newline="") as fh:
        fh.write(svg)
    return path
