"""Independent small-instance reference solvers.

Two deliberately different algorithm families validate the main solver:
a log-barrier interior method with dense KKT solves (small instances) and
an exhaustive search over the null space of the continuity constraints
(tiny instances). Both operate on the stacked variable z = (interior
densities, momenta) and share nothing with the splitting solver beyond the
graph and the action definition.

Conventions: interior density snapshot i (1..k-1) occupies rows of z before
the k momentum blocks; the capacity bound uses the raw concave curve
v0*rho*(1 - rho/rho_hat), which coincides with the saturating curve on the
strict interior of the feasible set (a positive flux forces the midpoint
density below jam).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as la
from scipy.optimize import lsq_linear

from .errors import OracleInfeasibleError, OracleSizeError
from .graph import DirectedGraph

__all__ = ["OracleResult", "solve_barrier", "solve_exhaustive"]

BARRIER_MAX_VERTICES = 50
BARRIER_MAX_STEPS = 10
EXHAUSTIVE_MAX_FREE = 6

GAP_TARGET = 1e-9
T_INIT = 1.0
T_FACTOR = 10.0
NEWTON_MAX = 80
NEWTON_DECREMENT_TOL = 1e-13
GRID_RESOLUTION = 1e-3
GRID_BUDGET = 200_000
POLISH_TOL = 1e-8


@dataclass
class OracleResult:
    """A solution with feasibility and stationarity certificates."""

    objective: float
    rho: np.ndarray
    m: np.ndarray
    gap: float
    kkt_residual: float
    continuity_residual: float
    method: str
    iterations: int
    details: dict = field(default_factory=dict, repr=False)


class _Problem:
    """Dense view of one scenario: index maps, constraints, and the action.

    z = [rho_1 ... rho_{k-1} (n each), m_1 ... m_k (n_edges each)].
    """

    def __init__(self, scenario):
        g: DirectedGraph = scenario.graph
        self.graph = g
        self.k = scenario.k
        self.n = g.n_vertices
        self.n_edges = g.n_edges
        self.rho0 = scenario.rho0
        self.rhok = scenario.rhok
        self.fd = scenario.fd
        k, n, ne = self.k, self.n, self.n_edges
        self.n_rho = (k - 1) * n
        self.dim = self.n_rho + k * ne
        self.kinetic_scale = 0.25 * k

        # rho_var[i, v]: z-index of rho_i(v) for 1 <= i <= k-1; m_var[i, e]
        # for 1-based step i.
        self.rho_var = lambda i, v: (i - 1) * n + v
        self.m_var = lambda i, e: self.n_rho + (i - 1) * ne + e

        self._build_equalities()
        self._build_terms()
        self._build_inequalities()

    # -- continuity: rho_i - rho_{i-1} - D^T m_i = 0, one redundant row --

    def _build_equalities(self) -> None:
        k, n, ne = self.k, self.n, self.n_edges
        g = self.graph
        A = np.zeros((k * n, self.dim))
        b = np.zeros(k * n)
        dt_dense = g.incidence_t.toarray()
        for i in range(1, k + 1):
            rows = slice((i - 1) * n, i * n)
            A[rows, self.n_rho + (i - 1) * ne : self.n_rho + i * ne] = -dt_dense
            if i >= 2:
                A[rows, (i - 2) * n : (i - 1) * n] -= np.eye(n)
            else:
                b[rows] += self.rho0
            if i <= k - 1:
                A[rows, (i - 1) * n : i * n] += np.eye(n)
            else:
                b[rows] -= self.rhok
        # Connected graph: the rows sum to a mass-balance identity, drop one.
        self.A_full = A
        self.b_full = b
        self.A = A[:-1]
        self.b = b[:-1]

    # -- the action as a sum of c*m^2/rho terms ---------------------------

    def _build_terms(self) -> None:
        """Each momentum cell contributes two quadratic-over-linear terms,
        one against the previous-snapshot tail density and one against the
        current-snapshot head density; endpoint densities are constants."""
        k, ne = self.k, self.n_edges
        g = self.graph
        m_idx: list[int] = []
        r_idx: list[int] = []  # z-index of the density variable, -1 if fixed
        r_const: list[float] = []
        for i in range(1, k + 1):
            for e in range(ne):
                tail, head = int(g.tails[e]), int(g.heads[e])
                for snap, vertex in ((i - 1, tail), (i, head)):
                    m_idx.append(self.m_var(i, e))
                    if 1 <= snap <= k - 1:
                        r_idx.append(self.rho_var(snap, vertex))
                        r_const.append(0.0)
                    else:
                        r_idx.append(-1)
                        r_const.append(self.rho0[vertex] if snap == 0 else self.rhok[vertex])
        self.t_m = np.array(m_idx, dtype=np.int64)
        self.t_r = np.array(r_idx, dtype=np.int64)
        self.t_rc = np.array(r_const)
        self.t_free = self.t_r >= 0

    def _rho_of_terms(self, z: np.ndarray) -> np.ndarray:
        rho = self.t_rc.copy()
        rho[self.t_free] = z[self.t_r[self.t_free]]
        return rho

    def objective(self, z: np.ndarray) -> float:
        c = self.kinetic_scale
        mv = z[self.t_m]
        rho = self._rho_of_terms(z)
        if np.any(rho <= 0.0):
            bad = (rho <= 0.0) & (np.abs(mv) > 0.0)
            if np.any(bad):
                return np.inf
            ok = rho > 0.0
            return c * float(np.sum(mv[ok] ** 2 / rho[ok]))
        return c * float(np.sum(mv * mv / rho))

    def objective_grad(self, z: np.ndarray) -> np.ndarray:
        c = self.kinetic_scale
        mv = z[self.t_m]
        rho = self._rho_of_terms(z)
        grad = np.zeros(self.dim)
        np.add.at(grad, self.t_m, 2.0 * c * mv / rho)
        free = self.t_free
        np.add.at(grad, self.t_r[free], -c * (mv[free] / rho[free]) ** 2)
        return grad

    def objective_hess(self, z: np.ndarray) -> np.ndarray:
        c = self.kinetic_scale
        mv = z[self.t_m]
        rho = self._rho_of_terms(z)
        H = np.zeros((self.dim, self.dim))
        np.add.at(H, (self.t_m, self.t_m), 2.0 * c / rho)
        free = self.t_free
        tm, tr = self.t_m[free], self.t_r[free]
        mf, rf = mv[free], rho[free]
        np.add.at(H, (tr, tr), 2.0 * c * mf * mf / rf**3)
        cross = -2.0 * c * mf / rf**2
        np.add.at(H, (tm, tr), cross)
        np.add.at(H, (tr, tm), cross)
        return H

    # -- inequalities: m >= 0, interior rho >= 0, capacity bounds ---------

    def _build_inequalities(self) -> None:
        k, ne = self.k, self.n_edges
        g, fd = self.graph, self.fd
        self.cap_rows: list[tuple[int, int, int, float, float, float]] = []
        # (m_index, rho_a index or -1, rho_b index or -1, const part, v0, rho_hat)
        if fd.enabled:
            mask = fd.step_mask()
            for i in range(1, k + 1):
                if not mask[i - 1]:
                    continue
                for e in range(ne):
                    tail, head = int(g.tails[e]), int(g.heads[e])
                    ia = -1
                    const = 0.0
                    if 1 <= i - 1 <= k - 1:
                        ia = self.rho_var(i - 1, tail)
                    else:
                        const += self.rho0[tail] if i - 1 == 0 else self.rhok[tail]
                    ib = -1
                    if 1 <= i <= k - 1:
                        ib = self.rho_var(i, head)
                    else:
                        const += self.rhok[head] if i == k else self.rho0[head]
                    self.cap_rows.append(
                        (
                            self.m_var(i, e),
                            ia,
                            ib,
                            const,
                            float(fd.v0[i - 1, e]),
                            float(fd.rho_hat[i - 1, e]),
                        )
                    )
        self.n_bounds = self.dim  # every z entry is bounded below by zero
        self.n_ineq = self.n_bounds + len(self.cap_rows)

    def cap_midpoint(self, z: np.ndarray, row) -> float:
        _, ia, ib, const, _, _ = row
        rb = const
        if ia >= 0:
            rb += z[ia]
        if ib >= 0:
            rb += z[ib]
        return 0.5 * rb

    def slacks(self, z: np.ndarray) -> np.ndarray:
        """All inequality slacks h_j(z): first the z >= 0 bounds, then the
        capacity rows v0*rb*(1 - rb/rho_hat) - m."""
        out = np.empty(self.n_ineq)
        out[: self.dim] = z
        for j, row in enumerate(self.cap_rows):
            mi, _, _, _, v0, rho_hat = row
            rb = self.cap_midpoint(z, row)
            out[self.dim + j] = v0 * rb * (1.0 - rb / rho_hat) - z[mi]
        return out

    def slack_grad(self, j: int) -> np.ndarray:
        """Gradient of h_j for bound rows (constant); capacity rows vary
        with z and are handled by cap_grad."""
        grad = np.zeros(self.dim)
        grad[j] = 1.0
        return grad

    def cap_grad(self, z: np.ndarray, row) -> np.ndarray:
        mi, ia, ib, _, v0, rho_hat = row
        grad = np.zeros(self.dim)
        rb = self.cap_midpoint(z, row)
        coeff = 0.5 * v0 * (1.0 - 2.0 * rb / rho_hat)
        if ia >= 0:
            grad[ia] += coeff
        if ib >= 0:
            grad[ib] += coeff
        grad[mi] = -1.0
        return grad

    def continuity_residual(self, z: np.ndarray) -> float:
        return float(np.max(np.abs(self.A_full @ z - self.b_full)))

    def unpack(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k, n, ne = self.k, self.n, self.n_edges
        rho = np.empty((k + 1, n))
        rho[0] = self.rho0
        rho[-1] = self.rhok
        if k >= 2:
            rho[1:-1] = z[: self.n_rho].reshape(k - 1, n)
        m = z[self.n_rho :].reshape(k, ne)
        return rho, m

    def _start_from_interior(self, interior: np.ndarray) -> np.ndarray:
        """Assemble a point on {A z = b} from given interior density rows.

        Per-step momenta come from a least-squares continuity solve, then a
        pairwise shift onto the positive orthant (the shift lies in the null
        space of D^T)."""
        k, ne = self.k, self.n_edges
        g = self.graph
        z = np.zeros(self.dim)
        z[: self.n_rho] = interior.reshape(-1)
        rho_full = np.vstack([self.rho0, interior, self.rhok]) if k >= 2 else np.vstack([self.rho0, self.rhok])
        dt_dense = g.incidence_t.toarray()
        for i in range(1, k + 1):
            target = rho_full[i] - rho_full[i - 1]
            m_i, *_ = np.linalg.lstsq(dt_dense, target, rcond=None)
            delta = 1e-3
            for j in range(ne // 2):
                f, r = m_i[2 * j], m_i[2 * j + 1]
                net = f - r
                m_i[2 * j] = max(net, 0.0) + delta
                m_i[2 * j + 1] = max(-net, 0.0) + delta
            z[self.n_rho + (i - 1) * ne : self.n_rho + i * ne] = m_i
        return z

    def interpolation_start(self) -> np.ndarray:
        """A z with A z = b, strictly positive m, positive interior rho,
        interior densities by linear interpolation in time."""
        k = self.k
        t = np.arange(1, k)[:, None] / k
        interior = (1.0 - t) * self.rho0[None, :] + t * self.rhok[None, :]
        return self._start_from_interior(interior)

    def uniform_start(self) -> np.ndarray:
        """A z with A z = b whose interior rows spread the total mass evenly
        over the vertices; often clears the capacity rows when the endpoint
        marginals are too peaked for interpolation to stay feasible."""
        level = float(np.sum(self.rho0)) / self.n
        interior = np.full((self.k - 1, self.n), level)
        return self._start_from_interior(interior)


# -- equality-constrained Newton with a feasible start ----------------------


def _solve_kkt(KKT: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve a symmetric indefinite KKT system by diagonally equilibrated LU
    with two rounds of iterative refinement; late barrier rounds make these
    systems ill conditioned enough that a plain solve loses the digits the
    certificates need."""
    d = np.abs(np.diag(KKT))
    s = 1.0 / np.sqrt(np.where(d > 0.0, d, 1.0))
    M = KKT * s[:, None] * s[None, :]
    b = rhs * s
    try:
        lu, piv = la.lu_factor(M, check_finite=False)
        y = la.lu_solve((lu, piv), b, check_finite=False)
        for _ in range(2):
            r = b - M @ y
            y += la.lu_solve((lu, piv), r, check_finite=False)
    except (la.LinAlgError, ValueError):
        y, *_ = np.linalg.lstsq(M, b, rcond=None)
    return y * s


def _newton_equality(
    z0: np.ndarray,
    A: np.ndarray,
    value: Callable[[np.ndarray], float],
    grad_hess: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    domain_ok: Callable[[np.ndarray], bool],
) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Minimize a smooth strictly convex function over {A z = b} starting
    from a feasible z0.

    Returns (z, equality multipliers, iterations, centered); centered means
    the Newton decrement dropped below tolerance rather than the loop running
    out of iterations or the line search failing."""
    z = z0.copy()
    p = A.shape[0]
    nu = np.zeros(p)
    centered = False
    for it in range(1, NEWTON_MAX + 1):
        g, H = grad_hess(z)
        KKT = np.zeros((z.size + p, z.size + p))
        KKT[: z.size, : z.size] = H
        KKT[: z.size, z.size :] = A.T
        KKT[z.size :, : z.size] = A
        rhs = np.concatenate([-g, np.zeros(p)])
        sol = _solve_kkt(KKT, rhs)
        dz = sol[: z.size]
        nu = sol[z.size :]
        decrement = -0.5 * float(g @ dz)
        if np.isfinite(decrement) and decrement < NEWTON_DECREMENT_TOL:
            centered = True
            break
        if not np.isfinite(decrement):
            break
        f0 = value(z)
        alpha = 1.0
        for _ in range(80):
            zn = z + alpha * dz
            if domain_ok(zn):
                fn = value(zn)
                if fn <= f0 - 1e-4 * alpha * 2.0 * decrement:
                    break
            alpha *= 0.5
        else:
            break
        z = zn
    return z, nu, it, centered


def _barrier_rounds(
    problem: _Problem,
    z: np.ndarray,
    t_extra_dim: int = 0,
) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Phase-2 barrier loop on the transport objective. Returns the point,
    the scaled equality multipliers, the final gap bound, and total Newton
    iterations."""
    A = problem.A
    n_ineq = problem.n_ineq
    t = T_INIT
    total_newton = 0
    nu_scaled = np.zeros(A.shape[0])
    while True:
        def value(zz: np.ndarray) -> float:
            s = problem.slacks(zz)
            if np.min(s) <= 0.0:
                return np.inf
            return t * problem.objective(zz) - float(np.sum(np.log(s)))

        def grad_hess(zz: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            s = problem.slacks(zz)
            g = t * problem.objective_grad(zz)
            H = t * problem.objective_hess(zz)
            inv = 1.0 / s[: problem.dim]
            g -= inv
            H[np.arange(problem.dim), np.arange(problem.dim)] += inv**2
            for j, row in enumerate(problem.cap_rows):
                hj = s[problem.dim + j]
                gj = problem.cap_grad(zz, row)
                g -= gj / hj
                H += np.outer(gj, gj) / hj**2
                # -(1/h) * Hess(h): Hess(h) has -v0/(2*rho_hat) on the
                # density block of this row.
                mi, ia, ib, _, v0, rho_hat = row
                curv = v0 / (2.0 * rho_hat * hj)
                for a in (ia, ib):
                    if a < 0:
                        continue
                    for b_ in (ia, ib):
                        if b_ >= 0:
                            H[a, b_] += curv
            return g, H

        def domain_ok(zz: np.ndarray) -> bool:
            return float(np.min(problem.slacks(zz))) > 0.0

        z, nu, its, _ = _newton_equality(z, A, value, grad_hess, domain_ok)
        total_newton += its
        gap = n_ineq / t
        nu_scaled = nu / t
        if gap < GAP_TARGET:
            return z, nu_scaled, gap, total_newton
        t *= T_FACTOR


def _phase_one(problem: _Problem, z0: np.ndarray) -> np.ndarray:
    """Max-min-slack barrier: maximize s subject to h_j(z) >= s, A z = b.

    Returns a strictly feasible z or raises OracleInfeasibleError."""
    dim = problem.dim
    A1 = np.hstack([problem.A, np.zeros((problem.A.shape[0], 1))])
    s0 = float(np.min(problem.slacks(z0))) - 1.0
    w = np.concatenate([z0, [s0]])
    n_ineq = problem.n_ineq
    t = T_INIT
    best_slack = -np.inf
    while True:
        def value(ww: np.ndarray) -> float:
            h = problem.slacks(ww[:dim]) - ww[dim]
            if np.min(h) <= 0.0:
                return np.inf
            return -t * ww[dim] - float(np.sum(np.log(h)))

        def grad_hess(ww: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
            zz, s = ww[:dim], ww[dim]
            h = problem.slacks(zz) - s
            g = np.zeros(dim + 1)
            H = np.zeros((dim + 1, dim + 1))
            g[dim] = -t
            inv = 1.0 / h[:dim]
            g[:dim] -= inv
            g[dim] += float(np.sum(inv))
            idx = np.arange(dim)
            H[idx, idx] += inv**2
            H[idx, dim] -= inv**2
            H[dim, idx] -= inv**2
            H[dim, dim] += float(np.sum(inv**2))
            for j, row in enumerate(problem.cap_rows):
                hj = h[dim + j]
                gj_z = problem.cap_grad(zz, row)
                gj = np.concatenate([gj_z, [-1.0]])
                g -= gj / hj
                H += np.outer(gj, gj) / hj**2
                mi, ia, ib, _, v0, rho_hat = row
                curv = v0 / (2.0 * rho_hat * hj)
                for a in (ia, ib):
                    if a < 0:
                        continue
                    for b_ in (ia, ib):
                        if b_ >= 0:
                            H[a, b_] += curv
            return g, H

        def domain_ok(ww: np.ndarray) -> bool:
            return float(np.min(problem.slacks(ww[:dim]) - ww[dim])) > 0.0

        w, _, _, centered = _newton_equality(w, A1, value, grad_hess, domain_ok)
        z, s = w[:dim], w[dim]
        true_slack = float(np.min(problem.slacks(z)))
        best_slack = max(best_slack, true_slack)
        if true_slack > 0.0:
            return z
        upper = s + n_ineq / t
        # The gap bound only certifies infeasibility at a centered point; an
        # uncentered s can sit far below the true max-min slack.
        if centered and upper <= 0.0:
            raise OracleInfeasibleError(
                f"no strictly feasible point: max-min slack bounded above by {upper:.3e}"
            )
        if n_ineq / t < 1e-12:
            raise OracleInfeasibleError(
                f"phase-1 stalled with min slack {best_slack:.3e}"
            )
        t *= T_FACTOR


def _kkt_residual_barrier(problem: _Problem, z: np.ndarray, nu_scaled: np.ndarray, t_used: float) -> float:
    s = problem.slacks(z)
    lam = 1.0 / (t_used * s)
    grad = problem.objective_grad(z)
    grad[: problem.dim] -= lam[: problem.dim]
    for j, row in enumerate(problem.cap_rows):
        grad -= lam[problem.dim + j] * problem.cap_grad(z, row)
    res_barrier = float(np.max(np.abs(grad + problem.A.T @ nu_scaled)))
    # The central-path multipliers degrade when z is re-projected onto the
    # equality manifold; refit the equality block by least squares and report
    # the better certificate.
    nu_fit, *_ = np.linalg.lstsq(problem.A.T, -grad, rcond=None)
    res_fit = float(np.max(np.abs(grad + problem.A.T @ nu_fit)))
    return min(res_barrier, res_fit)


def _project_equality(problem: _Problem, z: np.ndarray) -> np.ndarray:
    """Snap z back onto {A z = b} (least-squares correction)."""
    r = problem.b - problem.A @ z
    corr, *_ = np.linalg.lstsq(problem.A, r, rcond=None)
    return z + corr


def solve_barrier(scenario) -> OracleResult:
    """Interior-point reference solve; see module docstring."""
    g = scenario.graph
    if g.n_vertices > BARRIER_MAX_VERTICES or scenario.k > BARRIER_MAX_STEPS:
        raise OracleSizeError(
            f"barrier oracle limited to n <= {BARRIER_MAX_VERTICES}, "
            f"k <= {BARRIER_MAX_STEPS}; got n={g.n_vertices}, k={scenario.k}"
        )
    problem = _Problem(scenario)
    starts = [problem.interpolation_start(), problem.uniform_start()]
    z = max(starts, key=lambda zz: float(np.min(problem.slacks(zz))))
    if float(np.min(problem.slacks(z))) <= 0.0:
        z = _phase_one(problem, z)

    z, nu_scaled, gap, newton_total = _barrier_rounds(problem, z)
    t_used = problem.n_ineq / gap
    z = _project_equality(problem, z)
    kkt = _kkt_residual_barrier(problem, z, nu_scaled, t_used)
    rho, m = problem.unpack(z)
    return OracleResult(
        objective=problem.objective(z),
        rho=rho,
        m=m,
        gap=gap,
        kkt_residual=kkt,
        continuity_residual=problem.continuity_residual(z),
        method="barrier",
        iterations=newton_total,
    )


# -- exhaustive oracle ------------------------------------------------------


def _feasible_interval(problem: _Problem, z: np.ndarray, direction: np.ndarray) -> tuple[float, float]:
    """Feasible range of alpha for z + alpha*direction.

    Bound rows are linear; capacity rows are concave quadratics in alpha,
    feasible on the interval between their roots."""
    lo, hi = -np.inf, np.inf
    # z_j + alpha*d_j >= 0
    d = direction
    neg = d < -1e-15
    pos = d > 1e-15
    if np.any(neg):
        hi = min(hi, float(np.min(z[neg] / -d[neg])))
    if np.any(pos):
        lo = max(lo, float(np.max(-z[pos] / d[pos])))
    for row in problem.cap_rows:
        mi, ia, ib, const, v0, rho_hat = row
        rb0 = problem.cap_midpoint(z, row)
        drb = 0.5 * ((d[ia] if ia >= 0 else 0.0) + (d[ib] if ib >= 0 else 0.0))
        m0, dm = z[mi], d[mi]
        # h(alpha) = v0*(rb0+a*drb)*(1-(rb0+a*drb)/rho_hat) - (m0+a*dm) >= 0
        c2 = -v0 * drb * drb / rho_hat
        c1 = v0 * drb - 2.0 * v0 * rb0 * drb / rho_hat - dm
        c0 = v0 * rb0 * (1.0 - rb0 / rho_hat) - m0
        if abs(c2) < 1e-300:
            if abs(c1) < 1e-300:
                if c0 < 0.0:
                    return 1.0, -1.0  # empty
                continue
            root = -c0 / c1
            if c1 > 0.0:
                lo = max(lo, root)
            else:
                hi = min(hi, root)
            continue
        disc = c1 * c1 - 4.0 * c2 * c0
        if disc < 0.0:
            return 1.0, -1.0  # concave, never nonnegative
        sq = np.sqrt(disc)
        r1 = (-c1 + sq) / (2.0 * c2)
        r2 = (-c1 - sq) / (2.0 * c2)
        lo = max(lo, min(r1, r2))
        hi = min(hi, max(r1, r2))
    return lo, hi


def _golden_min(f: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    """Golden-section minimum of a unimodal f on [lo, hi].

    Minima that sit exactly on a constraint boundary would otherwise be
    missed by half a bracket width, so the endpoints stay in the running."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    best = 0.5 * (a + b)
    fbest = f(best)
    for cand in (lo, hi):
        fcand = f(cand)
        if fcand < fbest:
            best, fbest = cand, fcand
    return best


def _kkt_residual_active(problem: _Problem, z: np.ndarray, tol: float = 1e-7) -> float:
    """Stationarity residual with multipliers fitted over the active set."""
    grad = problem.objective_grad(z)
    s = problem.slacks(z)
    cols = [problem.A.T]
    scale = max(1.0, float(np.max(np.abs(z))))
    for j in range(problem.n_ineq):
        if s[j] > tol * scale:
            continue
        if j < problem.dim:
            gj = problem.slack_grad(j)
        else:
            gj = problem.cap_grad(z, problem.cap_rows[j - problem.dim])
        cols.append(-gj[:, None])
    G = np.hstack(cols)
    n_eq = problem.A.shape[0]
    lb = np.concatenate([np.full(n_eq, -np.inf), np.zeros(G.shape[1] - n_eq)])
    ub = np.full(G.shape[1], np.inf)
    fit = lsq_linear(G, -grad, bounds=(lb, ub))
    return float(np.max(np.abs(G @ fit.x + grad)))


def solve_exhaustive(scenario) -> OracleResult:
    """Null-space grid search plus coordinate-descent polish; tiny cases."""
    problem = _Problem(scenario)
    N = la.null_space(problem.A)
    n_free = N.shape[1]
    if n_free > EXHAUSTIVE_MAX_FREE:
        raise OracleSizeError(
            f"exhaustive oracle limited to {EXHAUSTIVE_MAX_FREE} free "
            f"dimensions, got {n_free}"
        )
    x_p, *_ = np.linalg.lstsq(problem.A, problem.b, rcond=None)

    def z_of(c: np.ndarray) -> np.ndarray:
        return x_p + N @ c

    def feasible(z: np.ndarray, margin: float = 0.0) -> bool:
        return float(np.min(problem.slacks(z))) >= margin

    # Candidate basin centers: a bounded grid in null-space coordinates plus
    # the interpolation-based feasible construction.
    radius = float(np.linalg.norm(x_p)) + 1.0
    span = 2.0 * radius
    per_dim = int(np.ceil(span / GRID_RESOLUTION)) + 1
    while per_dim**n_free > GRID_BUDGET and per_dim > 3:
        per_dim = max(3, int(per_dim * 0.7))
    axes = [np.linspace(-radius, radius, per_dim) for _ in range(n_free)]
    best_c = None
    best_val = np.inf
    mesh = np.meshgrid(*axes, indexing="ij") if n_free else []
    if n_free:
        coords = np.stack([m.reshape(-1) for m in mesh], axis=1)
        for c in coords:
            z = z_of(c)
            if feasible(z):
                val = problem.objective(z)
                if val < best_val:
                    best_val, best_c = val, c.copy()
    else:
        z = z_of(np.zeros(0))
        if feasible(z):
            best_val, best_c = problem.objective(z), np.zeros(0)

    z_interp = problem.interpolation_start()
    c_interp = N.T @ (z_interp - x_p)
    if feasible(z_of(c_interp)):
        val = problem.objective(z_of(c_interp))
        if val < best_val:
            best_val, best_c = val, c_interp

    if best_c is None:
        best_c = _max_slack_search(problem, N, x_p, c_interp, n_free)

    # Polish: cyclic coordinate descent with exact interval bounds.
    c = best_c.copy()
    z = z_of(c)
    sweeps = 0
    for sweep in range(400):
        sweeps = sweep + 1
        moved = 0.0
        for j in range(n_free):
            direction = N[:, j]
            lo, hi = _feasible_interval(problem, z, direction)
            if lo > hi:
                continue
            lo, hi = max(lo, -span), min(hi, span)
            alpha = _golden_min(
                lambda a: problem.objective(z + a * direction), lo, hi, POLISH_TOL
            )
            if alpha != 0.0:
                z = z + alpha * direction
                moved = max(moved, abs(alpha))
        if moved < POLISH_TOL:
            break

    if not feasible(z, margin=-1e-9):
        raise OracleInfeasibleError(
            f"exhaustive search ended infeasible (min slack {np.min(problem.slacks(z)):.3e})"
        )
    z = np.maximum(z, 0.0)
    kkt = _kkt_residual_active(problem, z)
    rho, m = problem.unpack(z)
    return OracleResult(
        objective=problem.objective(z),
        rho=rho,
        m=m,
        gap=np.nan,
        kkt_residual=kkt,
        continuity_residual=problem.continuity_residual(z),
        method="exhaustive",
        iterations=sweeps,
        details={"free_dimensions": n_free},
    )


def _max_slack_search(
    problem: _Problem,
    N: np.ndarray,
    x_p: np.ndarray,
    c_start: np.ndarray,
    n_free: int,
) -> np.ndarray:
    """Coordinate ascent on the (concave) minimum slack; raises
    OracleInfeasibleError when the slack stays negative."""
    c = c_start.copy()

    def min_slack(cc: np.ndarray) -> float:
        return float(np.min(problem.slacks(x_p + N @ cc)))

    for _ in range(200):
        improved = False
        for j in range(n_free):
            base = c[j]

            def along(a: float) -> float:
                cc = c.copy()
                cc[j] = base + a
                return -min_slack(cc)

            alpha = _golden_min(along, -1.0, 1.0, 1e-10)
            if min_slack(_with(c, j, base + alpha)) > min_slack(c) + 1e-15:
                c[j] = base + alpha
                improved = True
        if min_slack(c) > 0.0:
            return c
        if not improved:
            break
    raise OracleInfeasibleError(
        f"no feasible point found: best min slack {min_slack(c):.3e}"
    )


def _with(c: np.ndarray, j: int, value: float) -> np.ndarray:
    out = c.copy()
    out[j] = value
    return out
