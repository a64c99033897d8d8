"""Midpoint time discretization: staggered grids, action, and continuity.

Density snapshots live at times t_i = i/k for i = 0..k (arrays of shape
(k+1, n)); edge momentum lives at interval midpoints tau_i = (i - 1/2)/k for
i = 1..k (arrays of shape (k, n_edges)). Momentum row ``i-1`` moves mass
between snapshots ``i-1`` and ``i``: the discrete continuity relation is
rho_i - rho_{i-1} = D.T @ m_i.

The action weight on edge e = (a -> b) at step i pairs the tail density at
the previous snapshot with the head density at the current one:
w = k*(1/(2*rho_{i-1}(a)) + 1/(2*rho_i(b))). The capacity curve instead is
evaluated at the arithmetic midpoint of the same staggered pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapflowError, DensityFloorError
from .graph import DirectedGraph
from . import kernels

__all__ = [
    "TimeGrid",
    "midpoint_density",
    "midpoint_densities",
    "kinetic_weight",
    "kinetic_weights",
    "action",
    "continuity_residual",
    "delta_rho",
]


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid with k intervals on [0, 1]."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise CapflowError(f"k must be at least 1, got {self.k}")

    def snapshot_times(self) -> np.ndarray:
        return np.arange(self.k + 1) / self.k

    def midpoint_times(self) -> np.ndarray:
        return (np.arange(1, self.k + 1) - 0.5) / self.k


def _check_shapes(rho: np.ndarray, m: np.ndarray, g: DirectedGraph) -> int:
    if rho.ndim != 2 or rho.shape[1] != g.n_vertices:
        raise CapflowError(
            f"density trajectory has shape {rho.shape}, expected (k+1, {g.n_vertices})"
        )
    k = rho.shape[0] - 1
    if m.shape != (k, g.n_edges):
        raise CapflowError(
            f"momentum trajectory has shape {m.shape}, expected ({k}, {g.n_edges})"
        )
    return k


def midpoint_densities(rho: np.ndarray, g: DirectedGraph) -> np.ndarray:
    """Staggered midpoint densities for every (step, edge), shape (k, n_edges)."""
    return 0.5 * (rho[:-1, :][:, g.tails] + rho[1:, :][:, g.heads])


def midpoint_density(rho: np.ndarray, edge: tuple[int, int], step: int) -> float:
    """Midpoint density for one edge (tail, head) at step i in 1..k."""
    k = rho.shape[0] - 1
    if not 1 <= step <= k:
        raise CapflowError(f"step {step} out of range [1, {k}]")
    a, b = edge
    return 0.5 * (rho[step - 1, a] + rho[step, b])


def _gathered(rho: np.ndarray, g: DirectedGraph) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.ascontiguousarray(rho[:-1, :][:, g.tails]),
        np.ascontiguousarray(rho[1:, :][:, g.heads]),
    )


def kinetic_weights(
    rho: np.ndarray, g: DirectedGraph, floor: float = 0.0
) -> np.ndarray:
    """Diagonal action weights for every (step, edge), shape (k, n_edges)."""
    k = rho.shape[0] - 1
    if floor > 0.0 and rho.min() < floor * (1.0 - 1e-12):
        raise DensityFloorError(
            f"density {rho.min():.3e} fell below the floor {floor:.3e}"
        )
    rho_tail, rho_head = _gathered(rho, g)
    return kernels.kinetic_weights(rho_tail, rho_head, float(k))


def kinetic_weight(
    rho: np.ndarray, edge: tuple[int, int], step: int, k: int, floor: float = 0.0
) -> float:
    """Action weight for one edge (tail, head) at step i in 1..k."""
    a, b = edge
    if not 1 <= step <= k:
        raise CapflowError(f"step {step} out of range [1, {k}]")
    prev, cur = rho[step - 1, a], rho[step, b]
    if floor > 0.0 and min(prev, cur) < floor * (1.0 - 1e-12):
        raise DensityFloorError(
            f"density below floor at edge {edge}, step {step}"
        )
    return k * (0.5 / prev + 0.5 / cur)


def action(rho: np.ndarray, m: np.ndarray, g: DirectedGraph, floor: float = 0.0) -> float:
    """Discrete kinetic action 0.5 * sum over steps and edges of w * m**2."""
    _check_shapes(rho, m, g)
    w = kinetic_weights(rho, g, floor=floor)
    return kernels.weighted_energy(w, np.ascontiguousarray(m))


def delta_rho(rho: np.ndarray) -> np.ndarray:
    """Stacked snapshot differences rho_i - rho_{i-1}, shape (k, n)."""
    return np.diff(rho, axis=0)


def continuity_residual(rho: np.ndarray, m: np.ndarray, g: DirectedGraph) -> np.ndarray:
    """Blocks D.T @ m_i - (rho_i - rho_{i-1}) for i = 1..k, shape (k, n)."""
    k = _check_shapes(rho, m, g)
    out = np.empty((k, g.n_vertices))
    for i in range(k):
        out[i] = g.incidence_t @ m[i]
    out -= delta_rho(rho)
    return out
