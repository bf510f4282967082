"""Receding-horizon steering controller with a coupled emergency branch.

Each control tick solves one sparse QP over two predicted branches that share
the first steering command:

  * the nominal branch tracks the lane center under the expected surface
    friction and carries the tracking and steering-effort costs;
  * the contingency branch predicts the same horizon under a degraded
    friction hypothesis and must stay inside its own (tighter) stability
    envelope, but is otherwise free.

Because both branches are driven by the same first input, the deployed
command is feasible for the emergency hypothesis at every tick, so the plan
never has to be discovered from scratch on the tick the emergency becomes
real. Setting the contingency branch aside (`kind="dmpc"`) leaves a standard
single-horizon controller used as the comparison baseline.

Envelope constraints are soft: each (stage, branch, channel) gets one shared
slack with a linear penalty, so the QP stays feasible even when the vehicle
is pushed outside an envelope, and the penalty weights set a strict priority
of road bounds over handling limits over tracking.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .envelopes import (
    ENVIRONMENTAL,
    STABILITY,
    Envelope,
    environmental_envelope,
    stability_envelope,
)
from .errors import InfeasibleBoxError, OutOfRangeError
from .linearize import (
    NX,
    BranchPlan,
    HorizonModel,
    HorizonSpec,
    build_horizon_models,
)
from .qp import CONVERGED, QpResult, solve_qp_core
from .track import Path, SpeedProfile
from .vehicle import UX_MIN_DEFAULT, VehicleParams, VehicleState

NOMINAL = "nominal"
CONTINGENCY = "contingency"

CMPC = "cmpc"
DMPC = "dmpc"

OK = "ok"
SOLVER_FAILURE = "solver_failure"

_CHANNELS = (STABILITY, ENVIRONMENTAL)

# Quadratic price on the shared slip trust-region relaxation. Sized so the
# ~0.02 rad a crisis tick needs costs about a thousand (cheap next to an
# infeasible QP) while the ~0.3 rad that would re-admit fictional-force
# plans costs half a million, beyond any tracking gain on offer.
TRUST_RELAX_WEIGHT = 5.0e6


@dataclass(frozen=True)
class Weights:
    """Cost terms and input box of the steering QP.

    q_diag weighs the tracking states [Uy, r, dpsi, e]; r_slew penalizes the
    squared per-stage steering change on the nominal branch. Envelope slacks
    are penalized linearly, road bounds strictly harder than handling limits.
    tie_break is a ridge on the otherwise cost-free contingency tail inputs
    that makes the optimizer unique; it must stay well below r_slew.
    slip_prox prices each stage's planned front slip by its squared distance
    from the slip the stage model was linearized at, so consecutive plans
    stay where their models are accurate instead of riding extrapolations.
    """

    q_diag: tuple = (0.0, 0.0, 1.0, 1.0)
    r_slew: float = 0.01
    w_stability: float = 50.0
    w_environmental: float = 500.0
    delta_max: float = 0.35  # rad
    slew_rate_max: float = 0.6  # rad/s
    tie_break: float = 1e-4
    slip_prox: float = 100.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "q_diag", tuple(float(v) for v in self.q_diag))
        if len(self.q_diag) != NX or any(
            not np.isfinite(v) or v < 0.0 for v in self.q_diag
        ):
            raise OutOfRangeError(f"q_diag must be {NX} finite non-negative weights")
        if not self.r_slew > 0.0:
            raise OutOfRangeError("r_slew must be positive")
        if not 0.0 < self.w_stability < self.w_environmental:
            raise OutOfRangeError(
                "slack weights need 0 < w_stability < w_environmental"
            )
        if not self.delta_max > 0.0:
            raise InfeasibleBoxError("delta_max must be positive")
        if not self.slew_rate_max > 0.0:
            raise OutOfRangeError("slew_rate_max must be positive")
        if not 0.0 <= self.tie_break < self.r_slew:
            raise OutOfRangeError("tie_break must sit in [0, r_slew)")
        if not self.slip_prox >= 0.0:
            raise OutOfRangeError("slip_prox must be non-negative")


@dataclass(frozen=True)
class ControllerConfig:
    kind: str = CMPC
    nominal_mu: float = 0.9
    contingency_mu: float | None = None
    weights: Weights = field(default_factory=Weights)
    horizon: HorizonSpec = field(default_factory=HorizonSpec)
    solver_tol: float = 1e-6
    solver_max_iter: int = 4000
    max_consecutive_failures: int = 3
    ux_min: float = UX_MIN_DEFAULT

    def __post_init__(self) -> None:
        if self.kind not in (CMPC, DMPC):
            raise ValueError(f"controller kind must be '{CMPC}' or '{DMPC}'")
        if self.kind == CMPC and self.contingency_mu is None:
            raise ValueError("cmpc needs a contingency friction hypothesis")
        if not 0.0 < self.nominal_mu <= 1.2:
            raise OutOfRangeError(f"nominal_mu {self.nominal_mu} outside (0, 1.2]")
        if self.contingency_mu is not None and not 0.0 < self.contingency_mu <= 1.2:
            raise OutOfRangeError(
                f"contingency_mu {self.contingency_mu} outside (0, 1.2]"
            )
        if not self.solver_tol > 0.0:
            raise OutOfRangeError("solver_tol must be positive")
        if self.solver_max_iter < 1 or self.max_consecutive_failures < 1:
            raise OutOfRangeError("iteration and failure limits must be >= 1")
        if not self.ux_min > 0.0:
            raise OutOfRangeError("ux_min must be positive")

    @property
    def dual_branch(self) -> bool:
        return self.kind == CMPC


class VariableLayout:
    """Column layout of the stacked QP decision vector.

    Order: nominal states x^0..x^N, contingency states (dual-branch only),
    the shared first input, nominal inputs u^1..u^{N-1}, contingency inputs
    u^1..u^{N-1}, one slack per (branch, channel, stage boundary), and one
    shared relaxation column for the slip trust rows.
    The first input deliberately has a single column: both branches read it,
    which is the only coupling between them.
    """

    def __init__(self, n_stages: int, dual_branch: bool):
        if n_stages < 1:
            raise ValueError("need at least one stage")
        self.n_stages = int(n_stages)
        self.dual_branch = bool(dual_branch)
        self.branches = (NOMINAL, CONTINGENCY) if dual_branch else (NOMINAL,)
        N = self.n_stages
        ns = N + 1
        off = 0
        self._x0 = {}
        for br in self.branches:
            self._x0[br] = off
            off += ns * NX
        self.u0_col = off
        off += 1
        self._u_tail = {}
        for br in self.branches:
            self._u_tail[br] = off
            off += N - 1
        self._slack0 = {}
        for br in self.branches:
            for ch in _CHANNELS:
                self._slack0[(br, ch)] = off
                off += ns
        self.trust_col = off
        off += 1
        self.n_vars = off

    def _check_branch(self, branch: str) -> None:
        if branch not in self._x0:
            raise KeyError(f"no '{branch}' branch in this layout")

    def x_col(self, branch: str, k: int, i: int) -> int:
        self._check_branch(branch)
        if not 0 <= k <= self.n_stages or not 0 <= i < NX:
            raise IndexError(f"state index (k={k}, i={i}) out of range")
        return self._x0[branch] + k * NX + i

    def x_cols(self, branch: str, k: int) -> np.ndarray:
        base = self.x_col(branch, k, 0)
        return np.arange(base, base + NX)

    def x_block(self, branch: str) -> slice:
        self._check_branch(branch)
        base = self._x0[branch]
        return slice(base, base + (self.n_stages + 1) * NX)

    def u_col(self, branch: str, k: int) -> int:
        self._check_branch(branch)
        if not 0 <= k < self.n_stages:
            raise IndexError(f"input stage {k} out of range")
        if k == 0:
            return self.u0_col
        return self._u_tail[branch] + (k - 1)

    def u_cols(self, branch: str) -> np.ndarray:
        return np.array([self.u_col(branch, k) for k in range(self.n_stages)])

    def slack_col(self, branch: str, k: int, channel: str) -> int:
        if (branch, channel) not in self._slack0:
            raise KeyError(f"no slack block for ({branch}, {channel})")
        if not 0 <= k <= self.n_stages:
            raise IndexError(f"slack stage {k} out of range")
        return self._slack0[(branch, channel)] + k

    def slack_block(self, branch: str, channel: str) -> slice:
        base = self.slack_col(branch, 0, channel)
        return slice(base, base + self.n_stages + 1)

    def audit(self) -> list:
        """One label per column; raises if any column is missed or reused."""
        labels: list = [None] * self.n_vars
        N = self.n_stages

        def put(col, label):
            if labels[col] is not None:
                raise AssertionError(f"column {col} assigned twice: {labels[col]}, {label}")
            labels[col] = label

        for br in self.branches:
            for k in range(N + 1):
                for i in range(NX):
                    put(self.x_col(br, k, i), f"x:{br}:{k}:{i}")
        put(self.u0_col, "u:shared:0")
        for br in self.branches:
            for k in range(1, N):
                put(self.u_col(br, k), f"u:{br}:{k}")
        for br in self.branches:
            for ch in _CHANNELS:
                for k in range(N + 1):
                    put(self.slack_col(br, k, ch), f"slack:{br}:{ch}:{k}")
        missing = [i for i, v in enumerate(labels) if v is None]
        if missing:
            raise AssertionError(f"unlabeled columns: {missing}")
        return labels


@dataclass(frozen=True)
class BranchEnvelopes:
    stability: list  # Envelope per stage boundary, length N+1
    environmental: list

    def channel(self, name: str) -> list:
        if name == STABILITY:
            return self.stability
        if name == ENVIRONMENTAL:
            return self.environmental
        raise KeyError(name)


@dataclass(frozen=True)
class StageEnvelopes:
    nominal: BranchEnvelopes
    contingency: BranchEnvelopes | None

    def for_branch(self, branch: str) -> BranchEnvelopes:
        if branch == NOMINAL:
            return self.nominal
        if branch == CONTINGENCY and self.contingency is not None:
            return self.contingency
        raise KeyError(f"no '{branch}' envelopes")


def build_stage_envelopes(
    model: HorizonModel,
    path: Path,
    config: ControllerConfig,
    params: VehicleParams,
) -> StageEnvelopes:
    """Per-stage envelope rows along the predicted schedule.

    Both branches see the same road bounds; the stability envelope is built
    from each branch's own friction hypothesis, which is what makes the
    contingency branch conservative.
    """
    ns = model.spec.n + 1
    env_rows = [environmental_envelope(path, float(model.s[k])) for k in range(ns)]

    def branch_envs(mu: float) -> BranchEnvelopes:
        stab = [
            stability_envelope(float(model.ux[k]), mu, params, config.ux_min)
            for k in range(ns)
        ]
        return BranchEnvelopes(stability=stab, environmental=env_rows)

    nominal = branch_envs(config.nominal_mu)
    contingency = (
        branch_envs(config.contingency_mu) if model.contingency is not None else None
    )
    return StageEnvelopes(nominal=nominal, contingency=contingency)


@dataclass
class CmpcProblem:
    """One assembled QP plus the bookkeeping to read its solution back."""

    P: sp.csc_matrix
    q: np.ndarray
    A: sp.csc_matrix
    l: np.ndarray
    u: np.ndarray
    layout: VariableLayout
    row_blocks: dict
    env_rows: dict  # (branch, stage, channel) -> row index array
    slack_nonneg_rows: dict  # (branch, stage, channel) -> row index
    objective_offset: float
    mode: str
    u_prev: float
    stage_dts: np.ndarray


def assemble_qp(
    model: HorizonModel,
    envs: StageEnvelopes,
    weights: Weights,
    u_prev: float,
    x0: np.ndarray,
) -> CmpcProblem:
    """Stack both branches into one sparse QP.

    Rows, in order: initial-state pins, stage dynamics, input box, slew
    limits, stability envelopes, road-bound envelopes, slack non-negativity.
    The contingency branch's stage-0 box and slew rows would duplicate the
    nominal ones through the shared input column, so they are not emitted.
    """
    N = model.spec.n
    dual = model.contingency is not None
    lay = VariableLayout(N, dual)
    stages = {NOMINAL: model.nominal}
    if dual:
        stages[CONTINGENCY] = model.contingency
    dts = model.spec.stage_dts()
    x0 = np.asarray(x0, dtype=float).ravel()

    ai: list = []
    aj: list = []
    av: list = []
    lo: list = []
    hi: list = []
    row = 0

    def add_row(cols, vals, lb, ub) -> int:
        nonlocal row
        for c, v in zip(cols, vals):
            if v != 0.0:
                ai.append(row)
                aj.append(int(c))
                av.append(float(v))
        lo.append(float(lb))
        hi.append(float(ub))
        row += 1
        return row - 1

    row_blocks = {}

    start = row
    for br in lay.branches:
        for i in range(NX):
            add_row([lay.x_col(br, 0, i)], [1.0], x0[i], x0[i])
    row_blocks["init"] = (start, row)

    start = row
    for br in lay.branches:
        for k in range(N):
            st = stages[br][k]
            # Last stage has no successor input: fold the ramp gain into the
            # held gain, which extrapolates the input as constant.
            if k == N - 1:
                b0 = st.B0 + st.B1
                b1 = None
            else:
                b0 = st.B0
                b1 = st.B1
            uc = lay.u_col(br, k)
            un = lay.u_col(br, k + 1) if b1 is not None else None
            for i in range(NX):
                cols = [lay.x_col(br, k + 1, i)]
                vals = [1.0]
                for j in range(NX):
                    cols.append(lay.x_col(br, k, j))
                    vals.append(-st.A[i, j])
                cols.append(uc)
                vals.append(-b0[i])
                if un is not None:
                    cols.append(un)
                    vals.append(-b1[i])
                add_row(cols, vals, st.C[i], st.C[i])
    row_blocks["dynamics"] = (start, row)

    start = row
    dmax = weights.delta_max
    add_row([lay.u0_col], [1.0], -dmax, dmax)
    for br in lay.branches:
        for k in range(1, N):
            add_row([lay.u_col(br, k)], [1.0], -dmax, dmax)
    row_blocks["u_box"] = (start, row)

    start = row
    rate = weights.slew_rate_max
    lim0 = rate * dts[0]
    add_row([lay.u0_col], [1.0], u_prev - lim0, u_prev + lim0)
    for br in lay.branches:
        for k in range(1, N):
            lim = rate * dts[k]
            add_row(
                [lay.u_col(br, k), lay.u_col(br, k - 1)], [1.0, -1.0], -lim, lim
            )
    row_blocks["slew"] = (start, row)

    # Trust region on the planned front slip: within one saturation angle of
    # each stage's linearization slip. The slip-validity envelope rows are
    # slack-priced, so a plan can buy its way far past them and run on
    # extrapolated force the tire cannot produce; this bound caps that
    # fictional force at a fraction of the surface's real capacity while
    # leaving room to traverse the whole informative band in a single tick.
    # Stage 0 is skipped: its state is pinned, so the row could pinch against
    # the slew box after a disturbance, and one stage of extrapolation is
    # harmless.
    #
    # One shared relaxation variable widens every row symmetrically. The tube
    # is centered on the previous plan, and after a rough patch that plan can
    # zigzag faster than the slew chain lets the new one follow, leaving the
    # tube unreachable and the whole QP infeasible. The relaxation is priced
    # steeply and quadratically: the few hundredths of a radian a genuine
    # crisis needs cost little, while the large widening that would let a
    # plan ride fictional force back onto the path costs more than any
    # tracking gain it could buy.
    start = row
    tcol = lay.trust_col
    for br in lay.branches:
        for k in range(1, N):
            st = stages[br][k]
            if st.slip_x is None or not math.isfinite(st.af_sat):
                continue
            cols = [lay.x_col(br, k, 0), lay.x_col(br, k, 1), lay.u_col(br, k)]
            vals = [float(st.slip_x[0]), float(st.slip_x[1]), -1.0]
            add_row(cols + [tcol], vals + [-1.0], -np.inf, st.af_bar + st.af_sat)
            add_row(cols + [tcol], vals + [1.0], st.af_bar - st.af_sat, np.inf)
    row_blocks["slip_trust"] = (start, row)

    env_rows = {}

    def add_envelope_block(channel: str) -> tuple:
        blk_start = row
        for br in lay.branches:
            per_stage = envs.for_branch(br).channel(channel)
            for k in range(N + 1):
                env: Envelope = per_stage[k]
                sc = lay.slack_col(br, k, channel)
                xcols = lay.x_cols(br, k)
                # Input-coupled rows at the terminal boundary fall to the
                # last input, which is still the one held across that stage.
                ku = min(k, N - 1)
                ucol = lay.u0_col if ku == 0 else lay.u_col(br, ku)
                idxs = []
                for j in range(env.rows.shape[0]):
                    cols = list(xcols) + [sc]
                    vals = list(env.rows[j]) + [-1.0]
                    uc = 0.0 if env.u_coeff is None else float(env.u_coeff[j])
                    if uc != 0.0:
                        cols.append(ucol)
                        vals.append(uc)
                    idxs.append(add_row(cols, vals, -np.inf, env.bounds[j]))
                env_rows[(br, k, channel)] = np.array(idxs)
        return (blk_start, row)

    row_blocks["stability"] = add_envelope_block(STABILITY)
    row_blocks["environmental"] = add_envelope_block(ENVIRONMENTAL)

    start = row
    slack_nonneg_rows = {}
    for br in lay.branches:
        for ch in _CHANNELS:
            for k in range(N + 1):
                idx = add_row([lay.slack_col(br, k, ch)], [1.0], 0.0, np.inf)
                slack_nonneg_rows[(br, k, ch)] = idx
    row_blocks["slack_nonneg"] = (start, row)

    A = sp.coo_matrix(
        (av, (ai, aj)), shape=(row, lay.n_vars)
    ).tocsc()

    # Cost. Tracking runs over every nominal stage boundary; the terminal
    # weight lands on the contingency endpoint when that branch exists
    # (tying the emergency outcome into the cost), otherwise it doubles the
    # nominal endpoint.
    pi: list = []
    pj: list = []
    pv: list = []
    q = np.zeros(lay.n_vars)

    def p_add(r_, c_, v_):
        pi.append(r_)
        pj.append(c_)
        pv.append(v_)

    qd = weights.q_diag
    for k in range(N + 1):
        for i in range(NX):
            if qd[i] != 0.0:
                c = lay.x_col(NOMINAL, k, i)
                p_add(c, c, 2.0 * qd[i])
    term_branch = CONTINGENCY if dual else NOMINAL
    for i in range(NX):
        if qd[i] != 0.0:
            c = lay.x_col(term_branch, N, i)
            p_add(c, c, 2.0 * qd[i])

    R = weights.r_slew
    p_add(lay.u0_col, lay.u0_col, 2.0 * R)
    q[lay.u0_col] -= 2.0 * R * u_prev
    for k in range(1, N):
        a_ = lay.u_col(NOMINAL, k)
        b_ = lay.u_col(NOMINAL, k - 1)
        p_add(a_, a_, 2.0 * R)
        p_add(b_, b_, 2.0 * R)
        p_add(a_, b_, -2.0 * R)
        p_add(b_, a_, -2.0 * R)

    # The contingency tail has no cost of its own; on that flat face the
    # solver returns an arbitrary optimal tail, which then becomes the next
    # tick's linearization points and can sit past tire saturation, losing
    # steering authority. A ridge well below r_slew pins the smallest smooth
    # tail instead. u0 carries none of it, keeping the deployed command's
    # cost terms intact.
    eps = weights.tie_break
    if dual and eps > 0.0:
        for k in range(1, N):
            a_ = lay.u_col(CONTINGENCY, k)
            p_add(a_, a_, 2.0 * eps)
            if k >= 2:
                b_ = lay.u_col(CONTINGENCY, k - 1)
                p_add(a_, a_, 2.0 * eps)
                p_add(b_, b_, 2.0 * eps)
                p_add(a_, b_, -2.0 * eps)
                p_add(b_, a_, -2.0 * eps)

    # Each stage model is only accurate near the front slip it was taken at;
    # the brush curve bends away fast approaching saturation, and a plan that
    # rides the extrapolated force can look strictly better than any honest
    # one. Pricing the squared slip distance from the linearization point
    # keeps plans where their models hold and makes the tick-to-tick
    # relinearization contract instead of flipping between aggressive modes.
    rho = weights.slip_prox
    if rho > 0.0:
        for br in lay.branches:
            for k in range(N):
                st = stages[br][k]
                if st.slip_x is None:
                    continue
                ucol = lay.u0_col if k == 0 else lay.u_col(br, k)
                cols = (
                    lay.x_col(br, k, 0),
                    lay.x_col(br, k, 1),
                    ucol,
                )
                vals = (float(st.slip_x[0]), float(st.slip_x[1]), -1.0)
                for c1, v1 in zip(cols, vals):
                    q[c1] -= 2.0 * rho * st.af_bar * v1
                    for c2, v2 in zip(cols, vals):
                        p_add(c1, c2, 2.0 * rho * v1 * v2)

    p_add(lay.trust_col, lay.trust_col, 2.0 * TRUST_RELAX_WEIGHT)

    for br in lay.branches:
        w = {STABILITY: weights.w_stability, ENVIRONMENTAL: weights.w_environmental}
        for ch in _CHANNELS:
            blk = lay.slack_block(br, ch)
            q[blk] += w[ch]

    P = sp.coo_matrix((pv, (pi, pj)), shape=(lay.n_vars, lay.n_vars)).tocsc()

    return CmpcProblem(
        P=P,
        q=q,
        A=A,
        l=np.array(lo),
        u=np.array(hi),
        layout=lay,
        row_blocks=row_blocks,
        env_rows=env_rows,
        slack_nonneg_rows=slack_nonneg_rows,
        objective_offset=R * u_prev * u_prev,
        mode=CMPC if dual else DMPC,
        u_prev=float(u_prev),
        stage_dts=dts,
    )


@dataclass
class CmpcSolution:
    """Both branch trajectories read back out of one QP solve."""

    u0: float
    x_nom: np.ndarray  # (N+1, 4)
    u_nom: np.ndarray  # (N,)
    x_con: np.ndarray | None
    u_con: np.ndarray | None
    slacks: dict  # (branch, channel) -> (N+1,) array
    trust_relax: float  # shared widening of the slip trust rows, rad
    objective: float
    status: str
    iterations: int
    residuals: dict
    polished: bool
    primal: np.ndarray
    dual: np.ndarray


def extract_solution(problem: CmpcProblem, result: QpResult) -> CmpcSolution:
    lay = problem.layout
    ns = lay.n_stages + 1
    xv = result.x
    x_nom = xv[lay.x_block(NOMINAL)].reshape(ns, NX).copy()
    u_nom = xv[lay.u_cols(NOMINAL)].copy()
    if lay.dual_branch:
        x_con = xv[lay.x_block(CONTINGENCY)].reshape(ns, NX).copy()
        u_con = xv[lay.u_cols(CONTINGENCY)].copy()
    else:
        x_con = None
        u_con = None
    slacks = {}
    for br in lay.branches:
        for ch in _CHANNELS:
            slacks[(br, ch)] = xv[lay.slack_block(br, ch)].copy()
    return CmpcSolution(
        u0=float(xv[lay.u0_col]),
        x_nom=x_nom,
        u_nom=u_nom,
        x_con=x_con,
        u_con=u_con,
        slacks=slacks,
        trust_relax=float(xv[lay.trust_col]),
        objective=result.objective + problem.objective_offset,
        status=result.status,
        iterations=result.iterations,
        residuals=dict(result.residuals),
        polished=result.polished,
        primal=result.x,
        dual=result.y,
    )


def solve_problem(
    problem: CmpcProblem,
    *,
    tol: float = 1e-6,
    max_iter: int = 4000,
    warm_x: np.ndarray | None = None,
    warm_y: np.ndarray | None = None,
) -> tuple[CmpcSolution, QpResult]:
    result = solve_qp_core(
        problem.P,
        problem.q,
        problem.A,
        problem.l,
        problem.u,
        tol=tol,
        max_iter=max_iter,
        warm_x=warm_x,
        warm_y=warm_y,
    )
    return extract_solution(problem, result), result


def warm_start_shift(
    solution: CmpcSolution, elapsed: float, spec: HorizonSpec
) -> dict:
    """Advance the previous plan by the elapsed time on the stage time grid.

    States live on stage boundaries and inputs on stage starts; both are
    shifted by linear interpolation, holding the final value past the end of
    the horizon. The result seeds the next tick's linearization.
    """
    if elapsed < 0.0:
        raise ValueError("elapsed time must be non-negative")
    tb = spec.stage_times()
    tu = tb[:-1]

    def shift(x: np.ndarray, u: np.ndarray) -> BranchPlan:
        xs = np.column_stack(
            [np.interp(tb + elapsed, tb, x[:, i]) for i in range(NX)]
        )
        us = np.interp(tu + elapsed, tu, u)
        return BranchPlan(x=xs, u=us)

    plans = {NOMINAL: shift(solution.x_nom, solution.u_nom)}
    if solution.x_con is not None:
        plans[CONTINGENCY] = shift(solution.x_con, solution.u_con)
    return plans


@dataclass
class StepResult:
    delta: float  # deployed steering command, rad
    status: str  # OK or SOLVER_FAILURE
    solution: CmpcSolution | None
    problem: CmpcProblem
    qp: QpResult
    model: HorizonModel
    solve_time_ms: float
    failures: int  # consecutive failures including this step


class Controller:
    """Stateful tick-by-tick wrapper around the horizon QP.

    Tracks the previously deployed command (for the slew reference), the
    previous solution (shifted into linearization operating points and used
    to warm start the solver), and a consecutive-failure count. On a failed
    solve the last deployed command is held and the stored plan is kept, so
    one bad tick does not poison the next warm start.
    """

    def __init__(
        self,
        config: ControllerConfig,
        params: VehicleParams,
        path: Path,
        speed: SpeedProfile,
    ):
        self.config = config
        self.params = params
        self.path = path
        self.speed = speed
        self.reset()

    def reset(self) -> None:
        self._u_prev = 0.0
        self._prev_solution: CmpcSolution | None = None
        self._warm: tuple | None = None
        self._failures = 0

    @property
    def u_prev(self) -> float:
        return self._u_prev

    @property
    def consecutive_failures(self) -> int:
        return self._failures

    @property
    def failed(self) -> bool:
        return self._failures >= self.config.max_consecutive_failures

    def step(self, state: VehicleState, elapsed: float | None = None) -> StepResult:
        """Solve one tick from the measured state and return the command.

        elapsed is the time since the previous step, used to shift the old
        plan forward; it defaults to the short stage duration, which equals
        the control period.
        """
        c = self.config
        if elapsed is None:
            elapsed = c.horizon.dt_short

        if self._prev_solution is not None:
            plans = warm_start_shift(self._prev_solution, elapsed, c.horizon)
        else:
            plans = {}
        model = build_horizon_models(
            plans.get(NOMINAL),
            plans.get(CONTINGENCY),
            state,
            self.path,
            self.speed,
            c.nominal_mu,
            c.contingency_mu if c.dual_branch else None,
            c.horizon,
            self.params,
            c.ux_min,
        )
        envs = build_stage_envelopes(model, self.path, c, self.params)
        x0 = np.array([state.Uy, state.r, state.dpsi, state.e])
        problem = assemble_qp(model, envs, c.weights, self._u_prev, x0)

        warm_x, warm_y = self._warm if self._warm is not None else (None, None)
        # Timed region covers the QP solve only; model building and assembly
        # are bookkeeping, not the quantity the solve-time budget tracks.
        t0 = time.perf_counter()
        solution, result = solve_problem(
            problem,
            tol=c.solver_tol,
            max_iter=c.solver_max_iter,
            warm_x=warm_x,
            warm_y=warm_y,
        )
        ms = (time.perf_counter() - t0) * 1e3

        if result.status == CONVERGED:
            self._failures = 0
            delta = min(max(solution.u0, -c.weights.delta_max), c.weights.delta_max)
            self._u_prev = delta
            self._prev_solution = solution
            self._warm = (result.x.copy(), result.y.copy())
            return StepResult(
                delta=delta,
                status=OK,
                solution=solution,
                problem=problem,
                qp=result,
                model=model,
                solve_time_ms=ms,
                failures=0,
            )

        # Hold the last good command; keep the stored plan and warm start.
        self._failures += 1
        return StepResult(
            delta=self._u_prev,
            status=SOLVER_FAILURE,
            solution=solution,
            problem=problem,
            qp=result,
            model=model,
            solve_time_ms=ms,
            failures=self._failures,
        )
