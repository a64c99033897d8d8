# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; the reference semantics live in _fallback.py.

Inputs are coerced to C-contiguous float64 before the typed loops, so any
array-like works. Accumulation order matches the fallback (edge order for
scatters, left-to-right sweeps for the tridiagonal solver); only pairwise
versus linear summation rounding separates the two backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def greenshields_caps(rho_bar, v0, rho_hat):
    """Capacity curve v0*rho*(1 - rho/rho_hat), saturated at zero above jam."""
    rb_arr = np.ascontiguousarray(rho_bar, dtype=np.float64)
    v_arr = np.ascontiguousarray(v0, dtype=np.float64)
    rh_arr = np.ascontiguousarray(rho_hat, dtype=np.float64)
    out_arr = np.empty_like(rb_arr)
    cdef double[::1] rb = rb_arr.reshape(-1)
    cdef double[::1] v = v_arr.reshape(-1)
    cdef double[::1] rh = rh_arr.reshape(-1)
    cdef double[::1] out = out_arr.reshape(-1)
    cdef Py_ssize_t i
    cdef double val
    for i in range(rb.shape[0]):
        val = v[i] * rb[i] * (1.0 - rb[i] / rh[i])
        out[i] = val if val > 0.0 else 0.0
    return out_arr


def clamp_with_caps(x, caps):
    """Elementwise clamp of x onto [0, caps]; caps may contain +inf."""
    x_arr = np.ascontiguousarray(x, dtype=np.float64)
    c_arr = np.ascontiguousarray(caps, dtype=np.float64)
    out_arr = np.empty_like(x_arr)
    cdef double[::1] xv = x_arr.reshape(-1)
    cdef double[::1] cv = c_arr.reshape(-1)
    cdef double[::1] out = out_arr.reshape(-1)
    cdef Py_ssize_t i
    cdef double val
    for i in range(xv.shape[0]):
        val = xv[i]
        if val < 0.0:
            val = 0.0
        if val > cv[i]:
            val = cv[i]
        out[i] = val
    return out_arr


def kinetic_weights(rho_tail, rho_head, double k_steps):
    """Diagonal action weights k*(1/(2*rho_tail) + 1/(2*rho_head))."""
    rt_arr = np.ascontiguousarray(rho_tail, dtype=np.float64)
    rh_arr = np.ascontiguousarray(rho_head, dtype=np.float64)
    out_arr = np.empty_like(rt_arr)
    cdef double[::1] rt = rt_arr.reshape(-1)
    cdef double[::1] rh = rh_arr.reshape(-1)
    cdef double[::1] out = out_arr.reshape(-1)
    cdef double half_k = 0.5 * k_steps
    cdef Py_ssize_t i
    for i in range(rt.shape[0]):
        out[i] = half_k * (1.0 / rt[i] + 1.0 / rh[i])
    return out_arr


def weighted_energy(w, m):
    """0.5 * sum(w * m**2) over all cells."""
    w_arr = np.ascontiguousarray(w, dtype=np.float64)
    m_arr = np.ascontiguousarray(m, dtype=np.float64)
    cdef double[::1] wv = w_arr.reshape(-1)
    cdef double[::1] mv = m_arr.reshape(-1)
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(wv.shape[0]):
        acc += wv[i] * mv[i] * mv[i]
    return 0.5 * acc


def solve_symmetric_tridiag(diag, double off, rhs):
    """Thomas solve of B independent symmetric tridiagonal systems."""
    d_arr = np.ascontiguousarray(diag, dtype=np.float64)
    r_arr = np.ascontiguousarray(rhs, dtype=np.float64)
    x_arr = np.empty_like(d_arr)
    cdef double[:, ::1] dg = d_arr
    cdef double[:, ::1] rh = r_arr
    cdef double[:, ::1] x = x_arr
    cdef Py_ssize_t B = dg.shape[0]
    cdef Py_ssize_t K = dg.shape[1]
    cdef Py_ssize_t b, j
    cdef double denom
    c_arr = np.empty_like(d_arr)
    cdef double[:, ::1] c = c_arr
    for b in range(B):
        c[b, 0] = off / dg[b, 0]
        x[b, 0] = rh[b, 0] / dg[b, 0]
        for j in range(1, K):
            denom = dg[b, j] - off * c[b, j - 1]
            c[b, j] = off / denom
            x[b, j] = (rh[b, j] - off * x[b, j - 1]) / denom
        for j in range(K - 2, -1, -1):
            x[b, j] = x[b, j] - c[b, j] * x[b, j + 1]
    return x_arr


cdef double _density_obj(
    double[:, ::1] R,
    double[:, ::1] s,
    double[:, ::1] lam,
    double[:, ::1] dtm,
    double[::1] rho0,
    double[::1] rhok,
    double beta,
):
    cdef Py_ssize_t km1 = R.shape[0]
    cdef Py_ssize_t n = R.shape[1]
    cdef Py_ssize_t k = km1 + 1
    cdef Py_ssize_t i, t, v
    cdef double acc = 0.0
    cdef double dval, rres
    for i in range(km1):
        for v in range(n):
            acc += s[i, v] / R[i, v]
    for t in range(k):
        for v in range(n):
            if t == 0:
                dval = R[0, v] - rho0[v]
            elif t == k - 1:
                dval = rhok[v] - R[k - 2, v]
            else:
                dval = R[t, v] - R[t - 1, v]
            rres = dtm[t, v] - dval
            acc += 0.5 * beta * rres * rres - lam[t, v] * dval
    return acc


def density_newton(
    R_arr,
    s,
    lam,
    dtm,
    rho0,
    rhok,
    double beta,
    double floor,
    double newton_tol,
    Py_ssize_t max_steps,
    double armijo,
    double backtrack,
):
    """Projected Newton on the interior-density subproblem, updating R_arr
    (shape (k-1, n)) in place; see the fallback for the reference semantics.
    Returns (newton steps taken, line-search-failed flag)."""
    cdef double[:, ::1] R = R_arr
    s_arr = np.ascontiguousarray(s, dtype=np.float64)
    lam_arr = np.ascontiguousarray(lam, dtype=np.float64)
    dtm_arr = np.ascontiguousarray(dtm, dtype=np.float64)
    rho0_arr = np.ascontiguousarray(rho0, dtype=np.float64)
    rhok_arr = np.ascontiguousarray(rhok, dtype=np.float64)
    cdef double[:, ::1] sv = s_arr
    cdef double[:, ::1] lamv = lam_arr
    cdef double[:, ::1] dtmv = dtm_arr
    cdef double[::1] r0 = rho0_arr
    cdef double[::1] rk = rhok_arr
    cdef Py_ssize_t km1 = R.shape[0]
    cdef Py_ssize_t n = R.shape[1]
    cdef Py_ssize_t k = km1 + 1
    rf_arr = np.empty((k, n))
    g_arr = np.empty((km1, n))
    hd_arr = np.empty((km1, n))
    rhs_arr = np.empty((km1, n))
    cw_arr = np.empty((km1, n))
    x_arr = np.empty((km1, n))
    rn_arr = np.empty((km1, n))
    pin_arr = np.empty((km1, n), dtype=np.uint8)
    cdef double[:, ::1] rf = rf_arr
    cdef double[:, ::1] g = g_arr
    cdef double[:, ::1] hd = hd_arr
    cdef double[:, ::1] rhs = rhs_arr
    cdef double[:, ::1] cw = cw_arr
    cdef double[:, ::1] x = x_arr
    cdef double[:, ::1] Rn = rn_arr
    cdef unsigned char[:, ::1] pin = pin_arr
    cdef double off = -beta
    cdef double pin_edge = floor * (1.0 + 1e-9)
    cdef Py_ssize_t steps = 0
    cdef Py_ssize_t outer, i, t, v, j, trial
    cdef bint warn = False, is_pin, ok
    cdef double obj, objn, dval, gv, a, gmax, denom, alpha, gstep, gfull, rnv
    obj = _density_obj(R, sv, lamv, dtmv, r0, rk, beta)
    objn = obj
    for outer in range(max_steps):
        for t in range(k):
            for v in range(n):
                if t == 0:
                    dval = R[0, v] - r0[v]
                elif t == k - 1:
                    dval = rk[v] - R[k - 2, v]
                else:
                    dval = R[t, v] - R[t - 1, v]
                rf[t, v] = dtmv[t, v] - dval
        gmax = 0.0
        for i in range(km1):
            for v in range(n):
                gv = (
                    -sv[i, v] / (R[i, v] * R[i, v])
                    + lamv[i + 1, v] - lamv[i, v]
                    + beta * (rf[i + 1, v] - rf[i, v])
                )
                g[i, v] = gv
                is_pin = R[i, v] <= pin_edge and gv > 0.0
                pin[i, v] = 1 if is_pin else 0
                if not is_pin:
                    a = fabs(gv)
                    if a > gmax:
                        gmax = a
        if gmax < newton_tol:
            break
        for i in range(km1):
            for v in range(n):
                if pin[i, v]:
                    hd[i, v] = 1e30
                    rhs[i, v] = 0.0
                else:
                    hd[i, v] = 2.0 * beta + 2.0 * sv[i, v] / (R[i, v] * R[i, v] * R[i, v])
                    rhs[i, v] = -g[i, v]
        for v in range(n):
            cw[0, v] = off / hd[0, v]
            x[0, v] = rhs[0, v] / hd[0, v]
            for j in range(1, km1):
                denom = hd[j, v] - off * cw[j - 1, v]
                cw[j, v] = off / denom
                x[j, v] = (rhs[j, v] - off * x[j - 1, v]) / denom
            for j in range(km1 - 2, -1, -1):
                x[j, v] = x[j, v] - cw[j, v] * x[j + 1, v]
        alpha = 1.0
        ok = False
        gfull = 0.0
        for trial in range(60):
            gstep = 0.0
            for i in range(km1):
                for v in range(n):
                    rnv = R[i, v] + alpha * x[i, v]
                    if rnv < floor:
                        rnv = floor
                    Rn[i, v] = rnv
                    gstep += g[i, v] * (rnv - R[i, v])
            if trial == 0:
                gfull = gstep
            if gstep >= 0.0:
                break
            objn = _density_obj(Rn, sv, lamv, dtmv, r0, rk, beta)
            if objn <= obj + armijo * gstep:
                ok = True
                break
            alpha *= backtrack
        if not ok:
            warn = gfull < -1e-11 * (1.0 + fabs(obj))
            break
        for i in range(km1):
            for v in range(n):
                R[i, v] = Rn[i, v]
        obj = objn
        steps += 1
    return steps, warn


def scatter_kinetic_coeff(msq, tails, heads, Py_ssize_t n_vertices, double k_steps):
    """Per-vertex kinetic coefficients for the interior density subproblem."""
    m_arr = np.ascontiguousarray(msq, dtype=np.float64)
    t_arr = np.ascontiguousarray(tails, dtype=np.int64)
    h_arr = np.ascontiguousarray(heads, dtype=np.int64)
    cdef double[:, ::1] mv = m_arr
    cdef cnp.int64_t[::1] tv = t_arr
    cdef cnp.int64_t[::1] hv = h_arr
    cdef Py_ssize_t k = mv.shape[0]
    cdef Py_ssize_t n_edges = mv.shape[1]
    s_arr = np.zeros((k - 1, n_vertices))
    cdef double[:, ::1] s = s_arr
    cdef double quarter_k = 0.25 * k_steps
    cdef Py_ssize_t j, e
    for j in range(k - 1):
        for e in range(n_edges):
            s[j, tv[e]] += mv[j + 1, e]
        for e in range(n_edges):
            s[j, hv[e]] += mv[j, e]
        for e in range(n_vertices):
            s[j, e] *= quarter_k
    return s_arr
