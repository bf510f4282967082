"""Successive linearization of the bicycle model along a prediction horizon.

The controller state is x = [Uy, r, dpsi, e]; longitudinal speed is treated
as a known schedule. Tire forces are replaced by affine models taken at the
previous solution's operating points, the equations of motion are linearized
about the same points, and each stage is discretized exactly through an
augmented matrix exponential. Short stages hold the input constant (ZOH),
long stages interpolate it linearly between stage boundaries (FOH).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatchError, NonFiniteError, UxTooSmallError
from .track import Path, SpeedProfile, bounds_at, curvature_at
from .vehicle import (
    FRONT_SLIP_FRACTION,
    UX_MIN_DEFAULT,
    TireParams,
    VehicleParams,
    VehicleState,
    fiala_force_slope,
    fiala_lateral_force,
)

ZOH = "zoh"
FOH = "foh"

NX = 4  # controller state dimension [Uy, r, dpsi, e]


@dataclass(frozen=True)
class HorizonSpec:
    """Two-segment stage schedule: fine near-term steps, coarse far-term steps."""

    n_short: int = 10
    dt_short: float = 0.02
    n_long: int = 40
    dt_long: float = 0.3

    def __post_init__(self) -> None:
        if self.n_short < 1 or self.n_long < 0:
            raise ValueError("horizon needs at least one short stage")
        if self.dt_short <= 0.0 or self.dt_long <= 0.0:
            raise ValueError("stage durations must be positive")

    @property
    def n(self) -> int:
        return self.n_short + self.n_long

    @property
    def horizon_time(self) -> float:
        return self.n_short * self.dt_short + self.n_long * self.dt_long

    def stage_dts(self) -> np.ndarray:
        return np.concatenate(
            [np.full(self.n_short, self.dt_short), np.full(self.n_long, self.dt_long)]
        )

    def stage_times(self) -> np.ndarray:
        """Times of the N+1 stage boundaries, starting at 0."""
        return np.concatenate([[0.0], np.cumsum(self.stage_dts())])


@dataclass(frozen=True)
class OperatingPoint:
    """State, input, and affine tire data the stage model is taken about."""

    uy: float
    r: float
    dpsi: float
    e: float
    delta: float
    ux: float
    alpha_f: float
    alpha_r: float
    fy_f: float  # affine tire force at the point, front, N
    fy_r: float
    c_f: float  # local cornering stiffness -dFy/dalpha >= 0, front, N/rad
    c_r: float


@dataclass(frozen=True)
class StageModel:
    """Discrete affine stage: x+ = A x + B0 u + B1 u_next + C.

    af_bar and slip_x describe the front slip the stage was linearized at:
    slip_x @ x - u is the small-angle planned slip, af_bar its value at the
    operating point, af_sat the branch surface's saturation angle. Costs and
    trust bounds that keep a plan near its linearization read them.
    """

    A: np.ndarray
    B0: np.ndarray
    B1: np.ndarray
    C: np.ndarray
    dt: float
    hold: str
    af_bar: float = 0.0
    slip_x: np.ndarray | None = None
    af_sat: float = math.inf


@dataclass(frozen=True)
class BranchPlan:
    """A branch trajectory used as linearization operating points."""

    x: np.ndarray  # (N+1, 4)
    u: np.ndarray  # (N,)


@dataclass(frozen=True)
class HorizonModel:
    """Stage models for both branches plus the shared speed/path schedule."""

    nominal: list[StageModel]
    contingency: list[StageModel] | None
    s: np.ndarray  # (N+1,) predicted path position per stage boundary
    ux: np.ndarray  # (N+1,) scheduled speed per stage boundary
    kappa: np.ndarray  # (N+1,) path curvature per stage boundary
    spec: HorizonSpec


def linearize_tire(alpha_bar: float, tire: TireParams) -> tuple[float, float]:
    """Affine tire model at alpha_bar: returns (C_bar, Fy_bar).

    Fy(alpha) is approximated by Fy_bar - C_bar (alpha - alpha_bar). C_bar is
    the negated analytic slope (zero once sliding) and Fy_bar is clamped to
    the friction cap so numerical drift can never exceed it.
    """
    c_bar = -fiala_force_slope(alpha_bar, tire)
    fy_bar = fiala_lateral_force(alpha_bar, tire)
    cap = tire.mu * tire.Fz
    fy_bar = min(max(fy_bar, -cap), cap)
    return c_bar, fy_bar


def _clip(v: float, cap: float) -> float:
    return min(max(float(v), -cap), cap)


def operating_point(
    x: np.ndarray,
    delta: float,
    ux: float,
    params: VehicleParams,
    ux_min: float = UX_MIN_DEFAULT,
) -> OperatingPoint:
    """Slip angles and affine tire data at a horizon state, scheduled speed ux."""
    if ux < ux_min:
        raise UxTooSmallError(f"scheduled speed {ux} m/s below floor {ux_min} m/s")
    uy, r, dpsi, e = (float(v) for v in x)
    alpha_f = math.atan((uy + params.a * r) / ux) - delta
    alpha_r = math.atan((uy - params.b * r) / ux)
    c_f, fy_f = linearize_tire(alpha_f, params.front)
    c_r, fy_r = linearize_tire(alpha_r, params.rear)
    return OperatingPoint(
        uy=uy,
        r=r,
        dpsi=dpsi,
        e=e,
        delta=float(delta),
        ux=float(ux),
        alpha_f=alpha_f,
        alpha_r=alpha_r,
        fy_f=fy_f,
        fy_r=fy_r,
        c_f=c_f,
        c_r=c_r,
    )


def continuous_jacobians(
    op: OperatingPoint, params: VehicleParams, kappa: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact Jacobians of the affine-tire dynamics at the operating point.

    Returns (Ac, Bc, Cc) with d/dt x = Ac x + Bc delta + Cc exact at the
    point. The slip-angle geometry is differentiated analytically, so Ac and
    Bc match finite differences of the affine-tire vector field.
    """
    ux, m, Iz, a, b = op.ux, params.m, params.Iz, params.a, params.b
    qf = (op.uy + a * op.r) / ux
    qr = (op.uy - b * op.r) / ux
    gf = 1.0 / (1.0 + qf * qf)  # d atan
    gr = 1.0 / (1.0 + qr * qr)
    daf_duy = gf / ux
    daf_dr = a * gf / ux
    dar_duy = gr / ux
    dar_dr = -b * gr / ux
    cf, cr = op.c_f, op.c_r

    Ac = np.array(
        [
            [
                (-cf * daf_duy - cr * dar_duy) / m,
                (-cf * daf_dr - cr * dar_dr) / m - ux,
                0.0,
                0.0,
            ],
            [
                (-a * cf * daf_duy + b * cr * dar_duy) / Iz,
                (-a * cf * daf_dr + b * cr * dar_dr) / Iz,
                0.0,
                0.0,
            ],
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, ux, 0.0],
        ]
    )
    Bc = np.array([cf / m, a * cf / Iz, 0.0, 0.0])

    x_op = np.array([op.uy, op.r, op.dpsi, op.e])
    f_op = np.array(
        [
            (op.fy_f + op.fy_r) / m - op.r * ux,
            (a * op.fy_f - b * op.fy_r) / Iz,
            op.r - kappa * ux,
            op.uy + ux * op.dpsi,
        ]
    )
    Cc = f_op - Ac @ x_op - Bc * op.delta
    return Ac, Bc, Cc


def discretize(
    Ac: np.ndarray, Bc: np.ndarray, Cc: np.ndarray, dt: float, hold: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Exact discretization over dt via one augmented matrix exponential.

    Returns (A, B0, B1, C) for x+ = A x + B0 u + B1 u_next + C. Both holds
    come from the same exponential; the ZOH input gain is assembled as the
    literal sum of the FOH split so a constant input reproduces the ZOH step
    bit for bit.
    """
    Ac = np.asarray(Ac, dtype=float)
    Bc = np.asarray(Bc, dtype=float).ravel()
    Cc = np.asarray(Cc, dtype=float).ravel()
    n = Ac.shape[0]
    if Ac.shape != (n, n) or Bc.shape != (n,) or Cc.shape != (n,):
        raise DimensionMismatchError(
            f"discretize got Ac {Ac.shape}, Bc {Bc.shape}, Cc {Cc.shape}"
        )
    if dt <= 0.0:
        raise ValueError(f"stage duration must be positive, got {dt}")
    if hold not in (ZOH, FOH):
        raise ValueError(f"unknown hold '{hold}'")

    # Augmented state [x, u, w, 1] with u' = w, w' = 0: the exponential's top
    # block rows carry A, the input integral P1, the ramp integral P2, and
    # the affine response Pc in one shot.
    M = np.zeros((n + 3, n + 3))
    M[:n, :n] = Ac * dt
    M[:n, n] = Bc * dt
    M[:n, n + 2] = Cc * dt
    M[n, n + 1] = dt
    E = expm(M)
    if not np.all(np.isfinite(E)):
        raise NonFiniteError("matrix exponential produced non-finite entries")
    A = E[:n, :n].copy()
    P1 = E[:n, n].copy()
    P2 = E[:n, n + 1].copy()
    C = E[:n, n + 2].copy()
    B1 = P2 / dt
    B0 = P1 - B1
    if hold == ZOH:
        return A, B0 + B1, np.zeros(n), C
    return A, B0, B1, C


def build_horizon_models(
    prev_nominal: BranchPlan | None,
    prev_contingency: BranchPlan | None,
    state0: VehicleState,
    path: Path,
    speed: SpeedProfile,
    nominal_mu: float,
    contingency_mu: float | None,
    spec: HorizonSpec,
    params: VehicleParams,
    ux_min: float = UX_MIN_DEFAULT,
) -> HorizonModel:
    """Stage models for both branches along the predicted s-schedule.

    The s-schedule integrates ds/dt ~ Ux stage by stage from the measured
    position and is clamped at the path end (the road is treated as
    continuing straight with its terminal bounds). Branches share speed,
    position, and curvature; they differ only in surface friction. With no
    previous plan, every stage's operating point holds the measured state
    with zero steering.
    """
    N = spec.n
    dts = spec.stage_dts()
    s = np.empty(N + 1)
    ux = np.empty(N + 1)
    kap = np.empty(N + 1)
    e_lo = np.empty(N + 1)
    e_hi = np.empty(N + 1)
    si = min(float(state0.s), path.total_length)
    for k in range(N + 1):
        s[k] = si
        ux[k] = speed.speed_at(si)
        kap[k] = curvature_at(path, si)
        e_lo[k], e_hi[k] = bounds_at(path, si)
        if k < N:
            si = min(si + ux[k] * dts[k], path.total_length)

    x0 = np.array([state0.Uy, state0.r, state0.dpsi, state0.e])

    def branch(plan: BranchPlan | None, mu: float) -> list[StageModel]:
        if plan is not None and (plan.x.shape != (N + 1, NX) or plan.u.shape != (N,)):
            raise DimensionMismatchError(
                f"previous plan has shapes {plan.x.shape}, {plan.u.shape}; "
                f"expected {(N + 1, NX)}, {(N,)}"
            )
        p = params.with_mu(mu)
        band = FRONT_SLIP_FRACTION * p.front.alpha_sat
        stages = []
        for k in range(N):
            if plan is None:
                xk, uk = x0, 0.0
            else:
                # A previous plan that went through a rough tick can carry
                # states far off the road or deep into slide regimes where
                # the model means nothing; linearizing there would poison
                # the next plan through the affine offsets and the trust
                # centers. The box is generous and never binds on a sane
                # plan.
                uy_cap = 0.5 * ux[k]
                r_cap = 2.0 * p.front.mu * p.g / ux[k]
                xk = np.array(
                    [
                        _clip(plan.x[k][0], uy_cap),
                        _clip(plan.x[k][1], r_cap),
                        _clip(plan.x[k][2], 0.6),
                        min(max(plan.x[k][3], e_lo[k] - 1.0), e_hi[k] + 1.0),
                    ]
                )
                uk = float(plan.u[k])
            op = operating_point(xk, uk, ux[k], p, ux_min)
            if abs(op.alpha_f) > band:
                # Past the informative band the local stiffness is near zero
                # and the stage model loses steering authority; re-pose the
                # point's steering so its slip sits on the band edge instead.
                uk = math.atan((op.uy + p.a * op.r) / op.ux) - math.copysign(
                    band, op.alpha_f
                )
                op = operating_point(xk, uk, ux[k], p, ux_min)
            Ac, Bc, Cc = continuous_jacobians(op, p, kap[k])
            hold = ZOH if k < spec.n_short else FOH
            A, B0, B1, C = discretize(Ac, Bc, Cc, dts[k], hold)
            slip_x = np.array([1.0 / op.ux, p.a / op.ux, 0.0, 0.0])
            stages.append(
                StageModel(
                    A=A,
                    B0=B0,
                    B1=B1,
                    C=C,
                    dt=float(dts[k]),
                    hold=hold,
                    af_bar=op.alpha_f,
                    slip_x=slip_x,
                    af_sat=p.front.alpha_sat,
                )
            )
        return stages

    nominal = branch(prev_nominal, nominal_mu)
    contingency = (
        branch(prev_contingency, contingency_mu) if contingency_mu is not None else None
    )
    return HorizonModel(
        nominal=nominal, contingency=contingency, s=s, ux=ux, kappa=kap, spec=spec
    )
