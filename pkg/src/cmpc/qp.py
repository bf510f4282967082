"""Sparse convex QP solver: operator splitting with an active-set polish.

Canonical form:

    minimize   0.5 x' P x + q' x
    subject to l <= A x <= u

with P symmetric positive semidefinite and equality rows written as l == u.
The solver runs a relaxed ADMM iteration on Ruiz-equilibrated data, factoring
one quasi-definite KKT matrix per rho setting, then polishes the converged
iterate by re-solving on the detected active set with iterative refinement.
Everything is deterministic: repeated solves of the same data return
bit-identical results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import DimensionMismatchError, NonFiniteError

CONVERGED = "converged"
MAX_ITERATIONS = "max_iterations"
PRIMAL_INFEASIBLE = "primal_infeasible"
DUAL_INFEASIBLE = "dual_infeasible"

# ADMM constants. rho on equality rows is boosted so they bind hard.
_SIGMA = 1e-6
_ALPHA = 1.6
_RHO0 = 0.1
_RHO_EQ_BOOST = 1e3
_RHO_MIN, _RHO_MAX = 1e-6, 1e6
_CHECK_EVERY = 25
_RHO_UPDATE_EVERY = 100
_CERT_EVERY = 100
_RUIZ_ITERS = 10
_POLISH_REG = 1e-9
_POLISH_PROX = 1e-6
_POLISH_REFINE = 3
_POLISH_TARGET0 = 1e-3
_POLISH_ROUNDS = 100

# Interior-point constants.
_IPM_MAX_ITER = 60
_IPM_TAU = 0.995
_IPM_REG_P = 1e-9
_IPM_REG_D = 1e-9


@dataclass
class QpResult:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    status: str
    iterations: int
    objective: float
    residuals: dict[str, float] = field(default_factory=dict)
    polished: bool = False

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else np.inf


def kkt_residuals(P, q, A, l, u, x, y) -> dict[str, float]:
    """Scaled KKT residuals of a primal-dual pair on the original data.

    Four entries: stationarity, primal equality, primal inequality, and
    complementarity, each divided by a data-dependent scale so one tolerance
    reads uniformly across problems.
    """
    Px = P @ x
    Aty = A.T @ y if A.shape[0] else np.zeros_like(x)
    stat_raw = float(np.max(np.abs(Px + q + Aty)))
    stat_scale = max(
        1.0,
        float(np.max(np.abs(Px))),
        float(np.max(np.abs(q))) if q.size else 0.0,
        float(np.max(np.abs(Aty))),
    )
    out = {"stationarity": stat_raw / stat_scale}

    m = A.shape[0]
    if m == 0:
        out.update({"primal_eq": 0.0, "primal_ineq": 0.0, "complementarity": 0.0})
        return out

    Ax = A @ x
    ax_scale = max(1.0, float(np.max(np.abs(Ax))))
    eq = np.isfinite(l) & np.isfinite(u) & (l == u)

    if np.any(eq):
        eq_raw = float(np.max(np.abs(Ax[eq] - l[eq])))
        eq_scale = max(ax_scale, float(np.max(np.abs(l[eq]))))
    else:
        eq_raw, eq_scale = 0.0, 1.0
    out["primal_eq"] = eq_raw / eq_scale

    ineq = ~eq
    if np.any(ineq):
        over = np.maximum(Ax[ineq] - u[ineq], 0.0)
        under = np.maximum(l[ineq] - Ax[ineq], 0.0)
        ineq_raw = float(np.max(np.maximum(over, under)))
        bnd = np.concatenate(
            [u[ineq][np.isfinite(u[ineq])], l[ineq][np.isfinite(l[ineq])]]
        )
        ineq_scale = max(ax_scale, float(np.max(np.abs(bnd))) if bnd.size else 0.0)
    else:
        ineq_raw, ineq_scale = 0.0, 1.0
    out["primal_ineq"] = ineq_raw / ineq_scale

    # Complementarity: the multiplier's sign selects a bound and the residual
    # is |y| times the gap to that bound. A multiplier pushing on an infinite
    # bound has no gap to close and counts by its own magnitude.
    comp_raw = 0.0
    yi = y[ineq]
    if yi.size:
        ui, li, axi = u[ineq], l[ineq], Ax[ineq]
        up = yi > 0.0
        lo = yi < 0.0
        gap_up = np.where(np.isfinite(ui), np.maximum(ui - axi, 0.0), np.nan)
        gap_lo = np.where(np.isfinite(li), np.maximum(axi - li, 0.0), np.nan)
        vals = np.zeros_like(yi)
        vals[up] = np.where(
            np.isnan(gap_up[up]), np.abs(yi[up]) * ax_scale, yi[up] * gap_up[up]
        )
        vals[lo] = np.where(
            np.isnan(gap_lo[lo]), np.abs(yi[lo]) * ax_scale, -yi[lo] * gap_lo[lo]
        )
        comp_raw = float(np.max(np.abs(vals)))
    comp_scale = max(1.0, float(np.max(np.abs(y))) * ax_scale) if y.size else 1.0
    out["complementarity"] = comp_raw / comp_scale
    return out


def _ruiz_equilibrate(P, q, A, l, u):
    """Symmetric scaling of [P A'; A 0] plus cost normalization (modified Ruiz)."""
    n = P.shape[0]
    m = A.shape[0]
    d = np.ones(n)
    e = np.ones(m)
    c = 1.0
    Pw = P.copy().tocsc()
    Aw = A.copy().tocsc()
    qw = q.copy()
    lw = l.copy()
    uw = u.copy()
    for _ in range(_RUIZ_ITERS):
        cols_p = np.abs(Pw).max(axis=0).toarray().ravel() if Pw.nnz else np.zeros(n)
        cols_a = np.abs(Aw).max(axis=0).toarray().ravel() if m and Aw.nnz else np.zeros(n)
        col_norm = np.maximum(cols_p, cols_a)
        dd = np.where(col_norm > 0.0, 1.0 / np.sqrt(np.maximum(col_norm, 1e-12)), 1.0)
        dd = np.clip(dd, 1e-4, 1e4)
        Dd = sp.diags(dd)
        Pw = (Dd @ Pw @ Dd).tocsc()
        qw = qw * dd
        d = d * dd
        if m:
            row_norm = np.abs(Aw).max(axis=1).toarray().ravel() if Aw.nnz else np.zeros(m)
            de = np.where(row_norm > 0.0, 1.0 / np.sqrt(np.maximum(row_norm, 1e-12)), 1.0)
            de = np.clip(de, 1e-4, 1e4)
            De = sp.diags(de)
            Aw = (De @ Aw @ Dd).tocsc()
            lw = lw * de
            uw = uw * de
            e = e * de
        # Cost normalization keeps the quadratic and linear parts comparable.
        p_cols = np.abs(Pw).max(axis=0).toarray().ravel() if Pw.nnz else np.zeros(n)
        denom = max(
            float(np.mean(p_cols)) if n else 0.0,
            float(np.max(np.abs(qw))) if qw.size else 0.0,
        )
        if denom > 0.0:
            gamma = min(max(1.0 / denom, 1e-4), 1e4)
            Pw = Pw * gamma
            qw = qw * gamma
            c = c * gamma
    return Pw.tocsc(), qw, Aw.tocsc(), lw, uw, d, e, c


def _build_kkt(P, A, rho):
    n = P.shape[0]
    m = A.shape[0]
    if m:
        K = sp.bmat(
            [
                [P + _SIGMA * sp.eye(n, format="csc"), A.T],
                [A, sp.diags(-1.0 / rho)],
            ],
            format="csc",
        )
    else:
        K = (P + _SIGMA * sp.eye(n, format="csc")).tocsc()
    return splu(K)


def _direction_solve(P, q, A, l, u, x, act_lo, act_up, eq_mask):
    """Newton step for the working set: solve for (p, lam) with

        (P + prox*I) p + (P x + q) + A_W' lam = 0,   A_W (x + p) = b_W.

    The proximal damping keeps directions the working set leaves flat at
    zero; it multiplies p, so it vanishes at any fixed point and does not
    bias the returned multipliers. Returns (p, lam_full) or None.
    """
    n = P.shape[0]
    m = A.shape[0]
    g = P @ x + q
    rows = np.flatnonzero(eq_mask | act_lo | act_up)
    Pp = (P + _POLISH_PROX * sp.eye(n, format="csc")).tocsc()
    if rows.size:
        A_act = A.tocsr()[rows].tocsc()
        b = np.where(act_up, u, np.where(act_lo, l, np.where(eq_mask, l, 0.0)))[rows]
        K0 = sp.bmat([[Pp, A_act.T], [A_act, None]], format="csc")
        reg = sp.diags(
            np.concatenate([np.zeros(n), np.full(rows.size, -_POLISH_REG)])
        )
        rhs = np.concatenate([-g, b - A_act @ x])
    else:
        K0 = Pp
        reg = _POLISH_REG * sp.eye(n, format="csc")
        rhs = -g
    try:
        lu = splu((K0 + reg).tocsc())
    except RuntimeError:
        return None
    sol = lu.solve(rhs)
    res = rhs - K0 @ sol
    best, best_norm = sol, float(np.max(np.abs(res)))
    for _ in range(_POLISH_REFINE):
        sol = sol + lu.solve(res)
        res = rhs - K0 @ sol
        norm = float(np.max(np.abs(res)))
        if not np.isfinite(norm) or norm >= best_norm:
            break
        best, best_norm = sol, norm
    sol = best
    if not np.all(np.isfinite(sol)):
        return None
    p = sol[:n]
    lam = np.zeros(m)
    if rows.size:
        lam[rows] = sol[n:]
    return p, lam


def _polish(P, q, A, l, u, x, y, eq_mask, tol=1e-9):
    """Primal active-set refinement from the ADMM iterate.

    Walks from the (nearly feasible) iterate along damped Newton directions
    for the current working set. A ratio test stops each step at the first
    inactive row it would cross and pins that row; at a working-set optimum
    the walk returns as soon as the candidate meets tol, otherwise the
    single most wrong-signed multiplier is released. One change per step
    keeps every subproblem bounded: batched drops can free a linear-cost
    column entirely. Returns the best (x, y, Ax) seen by true KKT residual,
    or None.
    """
    m = A.shape[0]
    x = x.copy()
    if m == 0:
        out = _direction_solve(P, q, A, l, u, x, None, None, np.zeros(0, dtype=bool))
        if out is None:
            return None
        return x + out[0], out[1], np.zeros(0)

    # Initial working set from the rows at their bound AT the iterate, so
    # every pinned system the walk builds stays consistent: the current
    # point always witnesses a solution. Dual-seeded sets pin rows far from
    # their bounds and the first direction teleports. Duals only break the
    # tie when a narrow row sits at both bounds.
    fin_l = np.isfinite(l)
    fin_u = np.isfinite(u)
    Ax0 = A @ x
    eps_act = 1e-5 * np.maximum(
        1.0, np.maximum(np.abs(np.where(fin_l, l, 0.0)), np.abs(np.where(fin_u, u, 0.0)))
    )
    near_up = (~eq_mask) & fin_u & (u - Ax0 <= eps_act)
    near_lo = (~eq_mask) & fin_l & (Ax0 - l <= eps_act)
    both = near_up & near_lo
    act_up = (near_up & ~both) | (both & (y >= 0.0))
    act_lo = (near_lo & ~both) | (both & (y < 0.0))

    # A column with no curvature (zero P diagonal means a zero row for psd
    # P) and a linear cost needs some working row to lean on, or the damped
    # direction blows up to q_j/prox along it. Pin the row the descent ray
    # would hit first, once per uncovered column, before walking.
    pdiag = P.diagonal()
    lin_cols = np.flatnonzero((pdiag == 0.0) & (q != 0.0))
    if lin_cols.size:
        Acsc = A.tocsc()
        covered = eq_mask | act_lo | act_up
        for j in lin_cols:
            sl = slice(Acsc.indptr[j], Acsc.indptr[j + 1])
            rows_j = Acsc.indices[sl]
            if rows_j.size == 0 or np.any(covered[rows_j]):
                continue
            move = -np.sign(q[j]) * Acsc.data[sl]
            best_r, best_gap, best_up = -1, np.inf, False
            for rr, mv in zip(rows_j, move):
                if mv > 0.0 and fin_u[rr]:
                    gap = max(u[rr] - Ax0[rr], 0.0) / mv
                    if gap < best_gap:
                        best_r, best_gap, best_up = int(rr), gap, True
                elif mv < 0.0 and fin_l[rr]:
                    gap = max(Ax0[rr] - l[rr], 0.0) / (-mv)
                    if gap < best_gap:
                        best_r, best_gap, best_up = int(rr), gap, False
            if best_r >= 0:
                if best_up:
                    act_up[best_r] = True
                else:
                    act_lo[best_r] = True
                covered[best_r] = True

    best = None
    best_worst = np.inf
    stalled = 0
    for _ in range(_POLISH_ROUNDS):
        out = _direction_solve(P, q, A, l, u, x, act_lo, act_up, eq_mask)
        if out is None:
            break
        p, lam = out
        lam_max = float(np.max(np.abs(lam))) if m else 0.0
        if not np.isfinite(lam_max) or lam_max > 1e12:
            break

        # Ratio test: largest step along p that crosses no inactive row.
        Ap = A @ p
        Ax = A @ x
        inactive = ~(eq_mask | act_lo | act_up)
        cand_u = inactive & fin_u & (Ap > 1e-14)
        cand_l = inactive & fin_l & (Ap < -1e-14)
        t_u = np.where(cand_u, np.maximum(u - Ax, 0.0) / np.where(cand_u, Ap, 1.0), np.inf)
        t_l = np.where(cand_l, np.maximum(Ax - l, 0.0) / np.where(cand_l, -Ap, 1.0), np.inf)
        iu = int(np.argmin(t_u))
        il = int(np.argmin(t_l))
        t = 1.0
        blocker = -1
        block_up = False
        if t_u[iu] < t:
            t, blocker, block_up = float(t_u[iu]), iu, True
        if t_l[il] < t:
            t, blocker, block_up = float(t_l[il]), il, False
        x = x + t * p
        if blocker >= 0:
            if block_up:
                act_up[blocker] = True
            else:
                act_lo[blocker] = True
            continue

        # Full step taken: (x, lam) satisfies the working set's optimality
        # up to prox*|p|, so judge it by its true residuals. The step-size
        # test used by textbook implementations breaks down here: along
        # zero-curvature directions the damped solve turns gradient roundoff
        # into steps of roundoff/prox that never shrink.
        worst = max(kkt_residuals(P, q, A, l, u, x, lam).values())
        if worst < best_worst:
            best = (x.copy(), lam, A @ x)
            best_worst = worst
            stalled = 0
        else:
            stalled += 1
            if stalled >= 15:
                break
        if worst <= tol:
            return best
        eps_y = 1e-7 * max(1.0, float(np.max(np.abs(lam))))
        score = np.where(act_up, -lam, 0.0) + np.where(act_lo, lam, 0.0)
        worst_row = int(np.argmax(score))
        if score[worst_row] <= eps_y:
            return best
        act_up[worst_row] = False
        act_lo[worst_row] = False
    return best


def _ipm_solve(Ps, qs, As, ls, us, eq_mask, d, e, c, P, q, A, l, u, tol, xs0):
    """Predictor-corrector interior-point solve on the equilibrated data.

    Inequality rows get a slack and a multiplier per finite side; the Newton
    system is folded to the quasi-definite form

        [[Ps + A_I' Sigma A_I, A_E'], [A_E, -reg]]

    with Sigma = lam/s summed over sides, one factorization per iteration.
    Interior iterates keep Sigma strictly positive, so degenerate optimal
    faces (flat cost directions, weakly active rows) never produce the
    unbounded steps or multiplier blowups an active-set walk is exposed to.
    Infeasible starts are fine: bound defects fold into the residuals.

    Returns (worst, x, y, residuals, iterations) of the best iterate by the
    unscaled KKT gauge, or None when no step could be taken at all.
    """
    n = Ps.shape[0]
    m = As.shape[0]
    ineq = ~eq_mask
    A_I = As[ineq].tocsc() if m else sp.csc_matrix((0, n))
    A_E = As[eq_mask].tocsc() if m else sp.csc_matrix((0, n))
    b_E = ls[eq_mask] if m else np.zeros(0)
    lI = ls[ineq] if m else np.zeros(0)
    uI = us[ineq] if m else np.zeros(0)
    mI = A_I.shape[0]
    mE = A_E.shape[0]
    fl = np.isfinite(lI)
    fu = np.isfinite(uI)
    n_side = int(fl.sum() + fu.sum())

    x = xs0.copy()
    y_E = np.zeros(mE)
    Ax = A_I @ x
    s_l = np.where(fl, np.maximum(Ax - lI, 1.0), 1.0)
    s_u = np.where(fu, np.maximum(uI - Ax, 1.0), 1.0)
    lam_l = np.where(fl, 1.0, 0.0)
    lam_u = np.where(fu, 1.0, 0.0)

    ineq_idx = np.flatnonzero(ineq)
    eq_idx = np.flatnonzero(eq_mask)

    def gauge(xv, lam_uv, lam_lv, y_Ev):
        ys_full = np.zeros(m)
        if mI:
            ys_full[ineq_idx] = lam_uv - lam_lv
        if mE:
            ys_full[eq_idx] = y_Ev
        xu_ = d * xv
        yu_ = e * ys_full / c if m else ys_full
        res = kkt_residuals(P, q, A, l, u, xu_, yu_)
        return max(res.values()), xu_, yu_, res

    def steplen(v, dv, active):
        neg = active & (dv < 0.0)
        if not np.any(neg):
            return 1.0
        return min(1.0, _IPM_TAU * float(np.min(-v[neg] / dv[neg])))

    best = None
    reg_p, reg_d = _IPM_REG_P, _IPM_REG_D
    it = 0
    while it < _IPM_MAX_ITER:
        Ax = A_I @ x
        d_l = np.where(fl, Ax - lI - s_l, 0.0)
        d_u = np.where(fu, uI - Ax - s_u, 0.0)
        r_dual = Ps @ x + qs + (A_E.T @ y_E if mE else 0.0) + (
            A_I.T @ (lam_u - lam_l) if mI else 0.0
        )
        r_eq = (A_E @ x - b_E) if mE else np.zeros(0)

        worst, xu_, yu_, res = gauge(x, lam_u, lam_l, y_E)
        if best is None or worst < best[0]:
            best = (worst, xu_, yu_, res, it)
        if worst <= tol:
            return best
        if n_side == 0:
            # Pure equality problem: one Newton solve ends it.
            K = sp.bmat(
                [
                    [Ps + reg_p * sp.eye(n, format="csc"), A_E.T],
                    [A_E, -reg_d * sp.eye(mE, format="csc")],
                ],
                format="csc",
            ) if mE else (Ps + reg_p * sp.eye(n, format="csc")).tocsc()
            try:
                lu = splu(K)
            except RuntimeError:
                return best
            sol = lu.solve(np.concatenate([-r_dual, -r_eq]) if mE else -r_dual)
            x = x + sol[:n]
            if mE:
                y_E = y_E + sol[n:]
            it += 1
            worst, xu_, yu_, res = gauge(x, lam_u, lam_l, y_E)
            if best is None or worst < best[0]:
                best = (worst, xu_, yu_, res, it)
            return best

        mu = float(s_l @ lam_l + s_u @ lam_u) / n_side
        if it == 0:
            mu0 = mu
        elif mu > 1e8 * max(mu0, 1.0):
            # Complementarity blowing past its start is the interior-point
            # signature of an infeasible problem; the splitting fallback
            # holds the certificate machinery.
            return best
        sigma_diag = np.where(fl, lam_l / s_l, 0.0) + np.where(fu, lam_u / s_u, 0.0)
        H = (Ps + reg_p * sp.eye(n, format="csc") + A_I.T @ sp.diags(sigma_diag) @ A_I).tocsc()
        if mE:
            K = sp.bmat(
                [[H, A_E.T], [A_E, -reg_d * sp.eye(mE, format="csc")]], format="csc"
            )
        else:
            K = H
        try:
            lu = splu(K)
        except RuntimeError:
            reg_p, reg_d = reg_p * 100.0, reg_d * 100.0
            if reg_p > 1e-3:
                return best
            continue

        def direction(c_l, c_u):
            w = np.where(fu, c_u / s_u - lam_u - lam_u * d_u / s_u, 0.0) - np.where(
                fl, c_l / s_l - lam_l - lam_l * d_l / s_l, 0.0
            )
            top = -r_dual - (A_I.T @ w if mI else 0.0)
            rhs = np.concatenate([top, -r_eq]) if mE else top
            sol = lu.solve(rhs)
            dx = sol[:n]
            dy = sol[n:] if mE else np.zeros(0)
            Adx = A_I @ dx
            ds_l = np.where(fl, d_l + Adx, 0.0)
            ds_u = np.where(fu, d_u - Adx, 0.0)
            dlam_l = np.where(fl, (c_l - s_l * lam_l - lam_l * ds_l) / s_l, 0.0)
            dlam_u = np.where(fu, (c_u - s_u * lam_u - lam_u * ds_u) / s_u, 0.0)
            return dx, dy, ds_l, ds_u, dlam_l, dlam_u

        zero = np.zeros(mI)
        dxa, dya, dsla, dsua, dlla, dlua = direction(zero, zero)
        ap = min(steplen(s_l, dsla, fl), steplen(s_u, dsua, fu))
        ad = min(steplen(lam_l, dlla, fl), steplen(lam_u, dlua, fu))
        mu_aff = (
            float((s_l + ap * dsla) @ (lam_l + ad * dlla))
            + float((s_u + ap * dsua) @ (lam_u + ad * dlua))
        ) / n_side
        sig = min(max(mu_aff / max(mu, 1e-300), 0.0), 1.0) ** 3

        c_l = np.where(fl, sig * mu - dsla * dlla, 0.0)
        c_u = np.where(fu, sig * mu - dsua * dlua, 0.0)
        dx, dy, ds_l, ds_u, dlam_l, dlam_u = direction(c_l, c_u)
        ap = min(steplen(s_l, ds_l, fl), steplen(s_u, ds_u, fu))
        ad = min(steplen(lam_l, dlam_l, fl), steplen(lam_u, dlam_u, fu))
        if max(ap, ad) < 1e-12:
            return best
        x = x + ap * dx
        s_l = np.where(fl, s_l + ap * ds_l, 1.0)
        s_u = np.where(fu, s_u + ap * ds_u, 1.0)
        y_E = y_E + ad * dy
        lam_l = np.where(fl, lam_l + ad * dlam_l, 0.0)
        lam_u = np.where(fu, lam_u + ad * dlam_u, 0.0)
        it += 1

    return best


def solve_qp_core(
    P,
    q,
    A=None,
    l=None,
    u=None,
    *,
    tol: float = 1e-6,
    max_iter: int = 4000,
    warm_x: np.ndarray | None = None,
    warm_y: np.ndarray | None = None,
) -> QpResult:
    """Solve one QP. See the module docstring for the canonical form.

    Returns the best iterate with status MAX_ITERATIONS when the budget runs
    out; raises only on malformed data (shape mismatch, NaN input, l > u).
    """
    P = sp.csc_matrix(P)
    n = P.shape[0]
    q = np.asarray(q, dtype=float).ravel()
    if A is None:
        A = sp.csc_matrix((0, n))
        l = np.zeros(0)
        u = np.zeros(0)
    A = sp.csc_matrix(A)
    m = A.shape[0]
    l = np.asarray(l, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if P.shape != (n, n) or q.shape != (n,) or A.shape[1] != n:
        raise DimensionMismatchError(f"qp shapes: P {P.shape}, q {q.shape}, A {A.shape}")
    if l.shape != (m,) or u.shape != (m,):
        raise DimensionMismatchError(f"qp bounds: l {l.shape}, u {u.shape}, m = {m}")
    for name, arr in (("P", P.data), ("q", q), ("A", A.data)):
        if arr.size and not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"{name} contains non-finite entries")
    if np.any(np.isnan(l)) or np.any(np.isnan(u)):
        raise NonFiniteError("bounds contain NaN")
    if np.any(l > u):
        raise ValueError("infeasible bounds: l > u on some row")

    eq_mask = np.isfinite(l) & np.isfinite(u) & (l == u)

    Ps, qs, As, ls, us, d, e, c = _ruiz_equilibrate(P, q, A, l, u)

    rho = np.full(m, _RHO0)
    rho[eq_mask] = _RHO0 * _RHO_EQ_BOOST
    lu = _build_kkt(Ps, As, rho)

    if warm_x is not None and np.shape(warm_x) == (n,) and np.all(np.isfinite(warm_x)):
        xs = np.asarray(warm_x, dtype=float) / d
    else:
        xs = np.zeros(n)
    if (
        warm_y is not None
        and np.shape(warm_y) == (m,)
        and m
        and np.all(np.isfinite(warm_y))
    ):
        ys = c * np.asarray(warm_y, dtype=float) / e
    else:
        ys = np.zeros(m)
    zs = np.clip(As @ xs, ls, us) if m else np.zeros(0)

    def unscale(xv, yv, zv):
        if m:
            return d * xv, e * yv / c, zv / e
        return d * xv, yv, zv

    def objective(xv):
        return float(0.5 * xv @ (P @ xv) + q @ xv)

    best = None  # (worst_residual, x, y, z, residuals, polished)

    def consider(xv, yv, zv, polished):
        nonlocal best
        res = kkt_residuals(P, q, A, l, u, xv, yv)
        worst = max(res.values())
        if best is None or worst < best[0]:
            best = (worst, xv, yv, zv, res, polished)
        return worst

    # Interior-point first: it reaches full accuracy on degenerate data the
    # splitting iteration only creeps toward. The splitting loop below stays
    # as the fallback and the infeasibility classifier.
    ipm = _ipm_solve(Ps, qs, As, ls, us, eq_mask, d, e, c, P, q, A, l, u, tol, xs)
    if ipm is not None:
        worst_i, xi, yi, resi, iters_i = ipm
        zi = np.clip(A @ xi, l, u) if m else np.zeros(0)
        if best is None or worst_i < best[0]:
            best = (worst_i, xi, yi, zi, resi, True)
        if worst_i <= tol:
            return QpResult(
                x=xi,
                y=yi,
                z=zi,
                status=CONVERGED,
                iterations=iters_i,
                objective=objective(xi),
                residuals=resi,
                polished=True,
            )

    target = max(tol, _POLISH_TARGET0)
    it = 0
    next_rescue = 100
    x_prev = xs.copy()
    y_prev = ys.copy()
    status = MAX_ITERATIONS
    while it < max_iter:
        steps = min(_CHECK_EVERY, max_iter - it)
        for _ in range(steps):
            if m:
                rhs = np.concatenate([_SIGMA * xs - qs, zs - ys / rho])
                sol = lu.solve(rhs)
                xt = sol[:n]
                nu = sol[n:]
                zt = zs + (nu - ys) / rho
                xs = _ALPHA * xt + (1.0 - _ALPHA) * xs
                zc = _ALPHA * zt + (1.0 - _ALPHA) * zs + ys / rho
                znew = np.clip(zc, ls, us)
                ys = rho * (zc - znew)
                zs = znew
            else:
                xt = lu.solve(_SIGMA * xs - qs)
                xs = _ALPHA * xt + (1.0 - _ALPHA) * xs
        it += steps

        xu, yu, zu = unscale(xs, ys, zs)
        worst = consider(xu, yu, zu, False)
        if worst <= tol:
            status = CONVERGED
            break
        # Polish when the iterate looks good enough, and also at geometric
        # iteration milestones: ADMM can plateau above the attempt target on
        # badly conditioned data while its active-set estimate is already
        # usable.
        if worst <= target or it >= next_rescue:
            if it >= next_rescue:
                next_rescue *= 2
            pol = _polish(P, q, A, l, u, xu, yu, eq_mask, tol=tol)
            if pol is not None and consider(*pol, True) <= tol:
                status = CONVERGED
                break
            if worst <= target:
                target = max(worst / 10.0, tol)

        # Infeasibility certificates from the iterate deltas.
        if m and it % _CERT_EVERY == 0:
            dy = (ys - y_prev) * e / c
            dx = d * (xs - x_prev)
            ndy = float(np.max(np.abs(dy))) if dy.size else 0.0
            ndx = float(np.max(np.abs(dx)))
            if ndy > 1e-12:
                dyp = np.maximum(dy, 0.0)
                dyn = np.minimum(dy, 0.0)
                support_ok = not (
                    np.any(dyp[~np.isfinite(u)] > 1e-10 * ndy)
                    or np.any(dyn[~np.isfinite(l)] < -1e-10 * ndy)
                )
                if support_ok:
                    fin_u = np.isfinite(u)
                    fin_l = np.isfinite(l)
                    gap = float(np.sum(u[fin_u] * dyp[fin_u]) + np.sum(l[fin_l] * dyn[fin_l]))
                    if float(np.max(np.abs(A.T @ dy))) <= 1e-8 * ndy and gap < -1e-8 * ndy:
                        status = PRIMAL_INFEASIBLE
                        break
            if ndx > 1e-12:
                Adx = A @ dx
                fin_u = np.isfinite(u)
                fin_l = np.isfinite(l)
                if (
                    float(np.max(np.abs(P @ dx))) <= 1e-8 * ndx
                    and float(q @ dx) < -1e-8 * ndx
                    and np.all(Adx[fin_u] <= 1e-8 * ndx)
                    and np.all(Adx[fin_l] >= -1e-8 * ndx)
                ):
                    status = DUAL_INFEASIBLE
                    break
            x_prev = xs.copy()
            y_prev = ys.copy()

        if m and it % _RHO_UPDATE_EVERY == 0 and it < max_iter:
            rp = float(np.max(np.abs(As @ xs - zs)))
            rd = float(np.max(np.abs(Ps @ xs + qs + As.T @ ys)))
            sp_ = max(float(np.max(np.abs(As @ xs))), float(np.max(np.abs(zs))), 1e-10)
            sd_ = max(
                float(np.max(np.abs(Ps @ xs))),
                float(np.max(np.abs(As.T @ ys))),
                float(np.max(np.abs(qs))) if qs.size else 0.0,
                1e-10,
            )
            ratio = float(np.sqrt((rp / sp_) / max(rd / sd_, 1e-16)))
            if ratio > 5.0 or ratio < 0.2:
                rho = np.clip(rho * ratio, _RHO_MIN, _RHO_MAX)
                lu = _build_kkt(Ps, As, rho)

    if status in (PRIMAL_INFEASIBLE, DUAL_INFEASIBLE):
        xu, yu, zu = unscale(xs, ys, zs)
        return QpResult(
            x=xu,
            y=yu,
            z=zu,
            status=status,
            iterations=it,
            objective=objective(xu),
            residuals=kkt_residuals(P, q, A, l, u, xu, yu),
        )

    worst, xb, yb, zb, resb, polb = best
    return QpResult(
        x=xb,
        y=yb,
        z=zb,
        status=CONVERGED if worst <= tol else MAX_ITERATIONS,
        iterations=it,
        objective=objective(xb),
        residuals=resb,
        polished=polb,
    )
