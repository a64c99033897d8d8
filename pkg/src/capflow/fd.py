"""Concave flow-density capacity curves and the elementwise hypograph projection.

The shipped curve is the Greenshields parabola ``v0 * rho * (1 - rho/rho_hat)``,
zero at empty and at jam density and maximal at half the jam density. Above
jam density the curve is extended by zero so the projection stays well
defined for any intermediate iterate. Parameters may vary per edge and per
time step; enforcement of the upper bound can be restricted to the interior
time steps, leaving the first and last step with only the nonnegativity
bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapflowError
from . import kernels

__all__ = ["FdParams", "capacity", "project_box", "project_fd_set", "ENFORCE_ALL", "ENFORCE_INTERIOR"]

ENFORCE_ALL = "all"
ENFORCE_INTERIOR = "interior"


def _broadcast_param(value, k: int, n_edges: int, name: str) -> np.ndarray:
    """Accept a scalar, per-edge array, per-step list, or full (k, n_edges)
    array and return a dense (k, n_edges) float array."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        out = np.full((k, n_edges), float(arr))
    elif arr.ndim == 1 and arr.shape[0] == n_edges:
        out = np.tile(arr, (k, 1))
    elif arr.ndim == 1 and arr.shape[0] == k:
        out = np.tile(arr[:, None], (1, n_edges))
    elif arr.shape == (k, n_edges):
        out = arr.copy()
    else:
        raise CapflowError(
            f"{name} has shape {arr.shape}; expected scalar, ({n_edges},), "
            f"({k},), or ({k}, {n_edges})"
        )
    if not np.all(out > 0.0):
        raise CapflowError(f"{name} must be strictly positive everywhere")
    return out


@dataclass(frozen=True)
class FdParams:
    """Per-edge, per-step capacity curve parameters.

    ``v0`` and ``rho_hat`` are dense (k, n_edges) arrays (free-flow speed and
    jam density). ``enforcement`` selects which steps carry the upper bound;
    ``enabled=False`` drops the upper bound everywhere while keeping the
    nonnegativity bound.
    """

    v0: np.ndarray = field(repr=False)
    rho_hat: np.ndarray = field(repr=False)
    enforcement: str = ENFORCE_INTERIOR
    enabled: bool = True

    def __post_init__(self):
        if self.enforcement not in (ENFORCE_ALL, ENFORCE_INTERIOR):
            raise CapflowError(
                f"enforcement must be '{ENFORCE_ALL}' or '{ENFORCE_INTERIOR}', "
                f"got {self.enforcement!r}"
            )
        if self.v0.shape != self.rho_hat.shape:
            raise CapflowError("v0 and rho_hat shapes differ")

    @property
    def k(self) -> int:
        return self.v0.shape[0]

    @property
    def n_edges(self) -> int:
        return self.v0.shape[1]

    @classmethod
    def build(
        cls,
        v0,
        rho_hat,
        k: int,
        n_edges: int,
        enforcement: str = ENFORCE_INTERIOR,
        enabled: bool = True,
    ) -> "FdParams":
        return cls(
            v0=_broadcast_param(v0, k, n_edges, "v0"),
            rho_hat=_broadcast_param(rho_hat, k, n_edges, "rho_hat"),
            enforcement=enforcement,
            enabled=enabled,
        )

    def step_mask(self) -> np.ndarray:
        """Boolean mask over steps 1..k (index 0..k-1): True where the upper
        bound applies."""
        mask = np.ones(self.k, dtype=bool)
        if not self.enabled:
            mask[:] = False
        elif self.enforcement == ENFORCE_INTERIOR:
            # First and last step carry no cap; for k <= 2 nothing is capped.
            mask[0] = False
            mask[-1] = False
        return mask

    def caps(self, rho_bar: np.ndarray) -> np.ndarray:
        """Capacity surface evaluated at midpoint densities, shape (k, n_edges).

        Saturates at zero above jam density. Steps without enforcement get
        +inf so the array can be used directly as a clamp upper bound.
        """
        if rho_bar.shape != self.v0.shape:
            raise CapflowError(
                f"rho_bar has shape {rho_bar.shape}, expected {self.v0.shape}"
            )
        out = kernels.greenshields_caps(
            np.ascontiguousarray(rho_bar), self.v0, self.rho_hat
        )
        out[~self.step_mask(), :] = np.inf
        return out


def capacity(params: FdParams, edge: int, step: int, rho_bar: float) -> float:
    """Upper flux bound on one edge at one step (step is 1-based, 1..k).

    Returns the raw curve value regardless of the enforcement window;
    saturates at zero for densities at or above jam density.
    """
    if not 1 <= step <= params.k:
        raise CapflowError(f"step {step} out of range [1, {params.k}]")
    if rho_bar < 0:
        raise CapflowError(f"rho_bar must be nonnegative, got {rho_bar}")
    v0 = params.v0[step - 1, edge]
    rh = params.rho_hat[step - 1, edge]
    return float(max(0.0, v0 * rho_bar * (1.0 - rho_bar / rh)))


def project_box(x, upper):
    """Clamp to [0, upper] elementwise."""
    return np.minimum(np.maximum(x, 0.0), upper)


def project_fd_set(x: np.ndarray, rho_bar: np.ndarray, params: FdParams) -> np.ndarray:
    """Clamp a stacked (k, n_edges) flux array onto the capacity hypograph.

    Every cell is clamped below at zero; cells on enforced steps are also
    clamped above at the capacity evaluated at the given midpoint densities.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (params.k, params.n_edges):
        raise CapflowError(
            f"flux has shape {x.shape}, expected {(params.k, params.n_edges)}"
        )
    caps = params.caps(rho_bar)
    return kernels.clamp_with_caps(np.ascontiguousarray(x), caps)
