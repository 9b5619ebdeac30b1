"""Newton kernel for the nodal equations.

The network is compiled (see compiled.py) to flat arrays so the whole solve
runs inside one nopython-compatible function.  The unknown vector stacks the
interior node pressures first, then one signed flow per active element:

    x = [p_0 .. p_{ni-1}, q_0 .. q_{ne-1}]

Rows 0..ni-1 are Kirchhoff current balances (m3/s), rows ni..ni+ne-1 are the
element laws (Pa, except flow-type laws which are m3/s).  The system is
row/column scaled before each linear solve so resistances around 1e9 Pa s/m3
do not wreck conditioning, and steps are damped by backtracking on the scaled
residual norm.

The same functions double as the transient backward-Euler step: dt_inv > 0
adds channel inertance terms and switches compliance chambers from the
steady "no flow" law to volume (or gas-mass) balance against the previous
step, carried in q_prev / dp_prev / m_prev.
"""

import numpy as np

from ..backend import jit

# element kind codes
K_CHANNEL = 0
K_CONSTRICTION = 1
K_TESLA = 2
K_FLOW_SRC = 3
K_PRESSURE_SRC = 4
K_CHAMBER = 5

# chamber handling per solve
CHAMBER_STEADY = 0  # q = 0
CHAMBER_PIN = 1  # dp = dp_prev (consistent initialisation at t = 0)
CHAMBER_STEP = 2  # backward-Euler volume / mass balance

STATUS_OK = 0
STATUS_MAX_ITER = 1
STATUS_STALLED = 2


@jit
def _constriction_drop(q, k, q_smooth):
    if abs(q) >= q_smooth:
        return k * q * abs(q)
    return 0.5 * k * q_smooth * q + 0.5 * (k / q_smooth) * q * q * q


@jit
def _constriction_slope(q, k, q_smooth):
    if abs(q) >= q_smooth:
        return 2.0 * k * abs(q)
    return 0.5 * k * q_smooth + 1.5 * (k / q_smooth) * q * q


@jit
def _residual(x, n_i, kinds, fidx, tidx, ffix, tfix, pa, pb, pc,
              dt_inv, chamber_mode, q_prev, dp_prev, m_prev, p_atm, out):
    n_e = kinds.shape[0]
    for i in range(n_i):
        out[i] = 0.0
    for e in range(n_e):
        q = x[n_i + e]
        fi = fidx[e]
        ti = tidx[e]
        p_f = x[fi] if fi >= 0 else ffix[e]
        p_t = x[ti] if ti >= 0 else tfix[e]
        dp = p_f - p_t
        kind = kinds[e]
        if kind == K_CHANNEL:
            r = dp - pa[e] * q
            if dt_inv > 0.0:
                r -= pb[e] * dt_inv * (q - q_prev[e])
        elif kind == K_CONSTRICTION:
            r = dp - _constriction_drop(q, pa[e], pb[e])
        elif kind == K_TESLA:
            rr = pa[e] if q >= 0.0 else pb[e]
            r = dp - rr * q
        elif kind == K_FLOW_SRC:
            r = q - pa[e]
        elif kind == K_PRESSURE_SRC:
            r = (p_t - p_f) - pa[e]
        else:  # chamber
            if chamber_mode == CHAMBER_STEADY:
                r = q
            elif chamber_mode == CHAMBER_PIN:
                r = dp - dp_prev[e]
            else:
                if pc[e] > 0.0:  # ideal gas: pc = 1/(R_s T)
                    rho = pc[e] * (p_f + p_atm)
                    rho_floor = pc[e] * 1.0
                    if rho < rho_floor:
                        rho = rho_floor
                    vol = pb[e] + pa[e] * dp
                    r = q - dt_inv * (vol - m_prev[e] / rho)
                else:
                    r = q - pa[e] * dt_inv * (dp - dp_prev[e])
        out[n_i + e] = r
        if fi >= 0:
            out[fi] -= q
        if ti >= 0:
            out[ti] += q


@jit
def _jacobian(x, n_i, kinds, fidx, tidx, ffix, tfix, pa, pb, pc,
              dt_inv, chamber_mode, q_prev, dp_prev, m_prev, p_atm, out):
    n_e = kinds.shape[0]
    n = n_i + n_e
    for i in range(n):
        for j in range(n):
            out[i, j] = 0.0
    for e in range(n_e):
        q = x[n_i + e]
        fi = fidx[e]
        ti = tidx[e]
        p_f = x[fi] if fi >= 0 else ffix[e]
        row = n_i + e
        col_q = n_i + e
        kind = kinds[e]
        if kind == K_CHANNEL:
            dq = -pa[e]
            if dt_inv > 0.0:
                dq -= pb[e] * dt_inv
            dpf = 1.0
            dpt = -1.0
        elif kind == K_CONSTRICTION:
            dq = -_constriction_slope(q, pa[e], pb[e])
            dpf = 1.0
            dpt = -1.0
        elif kind == K_TESLA:
            rr = pa[e] if q >= 0.0 else pb[e]
            dq = -rr
            dpf = 1.0
            dpt = -1.0
        elif kind == K_FLOW_SRC:
            dq = 1.0
            dpf = 0.0
            dpt = 0.0
        elif kind == K_PRESSURE_SRC:
            dq = 0.0
            dpf = -1.0
            dpt = 1.0
        else:  # chamber
            if chamber_mode == CHAMBER_STEADY:
                dq = 1.0
                dpf = 0.0
                dpt = 0.0
            elif chamber_mode == CHAMBER_PIN:
                dq = 0.0
                dpf = 1.0
                dpt = -1.0
            else:
                dq = 1.0
                if pc[e] > 0.0:
                    rho = pc[e] * (p_f + p_atm)
                    rho_floor = pc[e] * 1.0
                    if rho < rho_floor:
                        rho = rho_floor
                    dpf = -dt_inv * (pa[e] + m_prev[e] * pc[e] / (rho * rho))
                    dpt = dt_inv * pa[e]
                else:
                    dpf = -pa[e] * dt_inv
                    dpt = pa[e] * dt_inv
        out[row, col_q] = dq
        if fi >= 0:
            out[row, fi] += dpf
        if ti >= 0:
            out[row, ti] += dpt
        if fi >= 0:
            out[fi, col_q] -= 1.0
        if ti >= 0:
            out[ti, col_q] += 1.0


@jit
def _residual_maxima(res, n_i, row_is_pa):
    """Max |residual| split into (kcl, pressure-law, flow-law) groups."""
    n = res.shape[0]
    kcl = 0.0
    law_p = 0.0
    law_q = 0.0
    for i in range(n_i):
        a = abs(res[i])
        if a > kcl:
            kcl = a
    for i in range(n_i, n):
        a = abs(res[i])
        if row_is_pa[i - n_i] == 1:
            if a > law_p:
                law_p = a
        else:
            if a > law_q:
                law_q = a
    return kcl, law_p, law_q


@jit
def newton_solve(n_i, kinds, fidx, tidx, ffix, tfix, pa, pb, pc,
                 dt_inv, chamber_mode, q_prev, dp_prev, m_prev, p_atm,
                 row_is_pa, p_scale, q_scale, x0,
                 tol_kcl, tol_law, max_iter):
    n_e = kinds.shape[0]
    n = n_i + n_e
    x = x0.copy()
    res = np.empty(n)
    res_try = np.empty(n)
    jac = np.empty((n, n))
    jac_s = np.empty((n, n))
    rhs = np.empty(n)

    row_w = np.empty(n)
    col_w = np.empty(n)
    for i in range(n_i):
        row_w[i] = 1.0 / q_scale
        col_w[i] = p_scale
    for e in range(n_e):
        row_w[n_i + e] = (1.0 / p_scale) if row_is_pa[e] == 1 else (1.0 / q_scale)
        col_w[n_i + e] = q_scale

    _residual(x, n_i, kinds, fidx, tidx, ffix, tfix, pa, pb, pc,
              dt_inv, chamber_mode, q_prev, dp_prev, m_prev, p_atm, res)
    merit = 0.0
    for i in range(n):
        merit += (res[i] * row_w[i]) ** 2
    merit = np.sqrt(merit)

    status = STATUS_MAX_ITER
    polish = 0
    iters = 0
    for _ in range(max_iter):
        kcl, law_p, law_q = _residual_maxima(res, n_i, row_is_pa)
        converged = kcl < tol_kcl and law_p < tol_law and law_q < tol_kcl
        tight = (kcl < tol_kcl * 1e-4 and law_p < tol_law * 1e-4
                 and law_q < tol_kcl * 1e-4)
        if converged and (tight or polish >= 2):
            status = STATUS_OK
            break
        if converged:
            polish += 1

        _jacobian(x, n_i, kinds, fidx, tidx, ffix, tfix, pa, pb, pc,
                  dt_inv, chamber_mode, q_prev, dp_prev, m_prev, p_atm, jac)
        for i in range(n):
            for j in range(n):
                jac_s[i, j] = jac[i, j] * row_w[i] * col_w[j]
            rhs[i] = -res[i] * row_w[i]
        dy = np.linalg.solve(jac_s, rhs)

        # clamp ridiculous first steps; backtracking handles the rest
        dmax = 0.0
        for i in range(n):
            a = abs(dy[i])
            if a > dmax:
                dmax = a
        if dmax > 1e4:
            for i in range(n):
                dy[i] *= 1e4 / dmax

        accepted = False
        t = 1.0
        x_try = x
        while t >= 1e-12:
            x_try = x + t * (dy * col_w)
            _residual(x_try, n_i, kinds, fidx, tidx, ffix, tfix, pa, pb, pc,
                      dt_inv, chamber_mode, q_prev, dp_prev, m_prev, p_atm, res_try)
            merit_t = 0.0
            for i in range(n):
                merit_t += (res_try[i] * row_w[i]) ** 2
            merit_t = np.sqrt(merit_t)
            if merit_t < merit * (1.0 - 1e-4 * t) or merit_t == 0.0:
                accepted = True
                break
            t *= 0.5
        iters += 1
        if not accepted:
            status = STATUS_OK if converged else STATUS_STALLED
            break
        x = x_try
        for i in range(n):
            res[i] = res_try[i]
        merit = merit_t

    kcl, law_p, law_q = _residual_maxima(res, n_i, row_is_pa)
    if status != STATUS_OK:
        if kcl < tol_kcl and law_p < tol_law and law_q < tol_kcl:
            status = STATUS_OK
    return x, status, iters, kcl, law_p, law_q
