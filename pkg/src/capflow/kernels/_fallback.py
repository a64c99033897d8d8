"""Pure numpy implementations of the hot kernels.

Mirrors the compiled extension in ``_core.pyx``; signatures and accumulation
order match so both backends agree to rounding error. Reductions use a fixed
order so results are deterministic for a given input.
"""

from __future__ import annotations

import numpy as np


def greenshields_caps(rho_bar: np.ndarray, v0: np.ndarray, rho_hat: np.ndarray) -> np.ndarray:
    """Capacity curve v0*rho*(1 - rho/rho_hat), saturated at zero above jam."""
    out = v0 * rho_bar * (1.0 - rho_bar / rho_hat)
    np.maximum(out, 0.0, out=out)
    return out


def clamp_with_caps(x: np.ndarray, caps: np.ndarray) -> np.ndarray:
    """Elementwise clamp of x onto [0, caps]; caps may contain +inf."""
    return np.minimum(np.maximum(x, 0.0), caps)


def kinetic_weights(rho_tail: np.ndarray, rho_head: np.ndarray, k_steps: float) -> np.ndarray:
    """Diagonal action weights k*(1/(2*rho_tail) + 1/(2*rho_head)).

    ``rho_tail`` holds previous-snapshot densities gathered at edge tails,
    ``rho_head`` current-snapshot densities gathered at edge heads.
    """
    return (0.5 * k_steps) * (1.0 / rho_tail + 1.0 / rho_head)


def weighted_energy(w: np.ndarray, m: np.ndarray) -> float:
    """0.5 * sum(w * m**2) over all cells."""
    return 0.5 * float(np.sum(w * m * m))


def solve_symmetric_tridiag(diag: np.ndarray, off: float, rhs: np.ndarray) -> np.ndarray:
    """Thomas solve of B independent symmetric tridiagonal systems.

    Each batch row solves T x = rhs with T = tridiag(off, diag[j], off).
    Requires the systems to be diagonally dominant enough for the plain
    recurrence (true here: diag >= 2*beta > 2*|off|).
    """
    B, K = diag.shape
    c = np.empty_like(diag)
    d = np.empty_like(diag)
    c[:, 0] = off / diag[:, 0]
    d[:, 0] = rhs[:, 0] / diag[:, 0]
    for j in range(1, K):
        denom = diag[:, j] - off * c[:, j - 1]
        c[:, j] = off / denom
        d[:, j] = (rhs[:, j] - off * d[:, j - 1]) / denom
    x = np.empty_like(diag)
    x[:, K - 1] = d[:, K - 1]
    for j in range(K - 2, -1, -1):
        x[:, j] = d[:, j] - c[:, j] * x[:, j + 1]
    return x


def density_newton(
    R: np.ndarray,
    s: np.ndarray,
    lam: np.ndarray,
    dtm: np.ndarray,
    rho0: np.ndarray,
    rhok: np.ndarray,
    beta: float,
    floor: float,
    newton_tol: float,
    max_steps: int,
    armijo: float,
    backtrack: float,
) -> tuple[int, bool]:
    """Projected Newton on the interior-density subproblem, updating R
    (shape (k-1, n)) in place.

    Minimizes sum(s/R) - sum(lam*d(R)) + (beta/2)*||dtm - d(R)||^2 over
    R >= floor, where d(R) stacks the snapshot differences with the fixed
    endpoint rows rho0/rhok. Entries pinned at the floor with the objective
    pushing further down are at their constrained optimum; optimality is the
    projected gradient, and pinned rows get a huge diagonal so the
    tridiagonal solve is the Newton system of the free subspace. The line
    search projects each trial point, so degenerate near-floor coordinates
    cannot throttle the rest.

    Returns (newton steps taken, line-search-failed flag)."""
    km1, n = R.shape
    k = km1 + 1
    lam_diff = np.diff(lam, axis=0)

    def drho_of(Rc: np.ndarray) -> np.ndarray:
        d = np.empty((k, n))
        d[0] = Rc[0] - rho0
        d[k - 1] = rhok - Rc[k - 2]
        if k >= 3:
            d[1 : k - 1] = Rc[1:] - Rc[:-1]
        return d

    def objective_of(Rc: np.ndarray) -> float:
        d = drho_of(Rc)
        r = dtm - d
        return float(np.sum(s / Rc) - np.sum(lam * d) + 0.5 * beta * np.sum(r * r))

    obj = objective_of(R)
    steps = 0
    warn = False
    for _ in range(max_steps):
        r = dtm - drho_of(R)
        g = -s / R**2 + lam_diff + beta * np.diff(r, axis=0)
        pinned = (R <= floor * (1.0 + 1e-9)) & (g > 0.0)
        if np.max(np.abs(np.where(pinned, 0.0, g))) < newton_tol:
            break
        hdiag = 2.0 * beta + 2.0 * s / R**3
        rhs = -g
        if pinned.any():
            hdiag = np.where(pinned, 1e30, hdiag)
            rhs = np.where(pinned, 0.0, rhs)
        d = solve_symmetric_tridiag(
            np.ascontiguousarray(hdiag.T), -beta, np.ascontiguousarray(rhs.T)
        ).T
        alpha = 1.0
        ok = False
        gfull = 0.0
        for trial in range(60):
            Rn = np.maximum(R + alpha * d, floor)
            gstep = float(np.sum(g * (Rn - R)))
            if trial == 0:
                gfull = gstep
            if gstep >= 0.0:
                break
            objn = objective_of(Rn)
            if objn <= obj + armijo * gstep:
                ok = True
                break
            alpha *= backtrack
        if not ok:
            # No predicted decrease beyond fp resolution means the
            # subproblem is solved, not that the line search failed.
            warn = gfull < -1e-11 * (1.0 + abs(obj))
            break
        R[:] = Rn
        obj = objn
        steps += 1
    return steps, warn


def scatter_kinetic_coeff(
    msq: np.ndarray,
    tails: np.ndarray,
    heads: np.ndarray,
    n_vertices: int,
    k_steps: float,
) -> np.ndarray:
    """Per-vertex kinetic coefficients for the interior density subproblem.

    Row j (interior snapshot j+1) gets (k/4) * (sum of msq[j+1] over edges
    tailed at v + sum of msq[j] over edges headed at v). ``msq`` is the
    squared momentum, shape (k, n_edges); the result has shape (k-1, n).
    """
    k = msq.shape[0]
    s = np.empty((k - 1, n_vertices))
    for j in range(k - 1):
        s[j] = np.bincount(tails, weights=msq[j + 1], minlength=n_vertices)
        s[j] += np.bincount(heads, weights=msq[j], minlength=n_vertices)
    s *= 0.25 * k_steps
    return s
