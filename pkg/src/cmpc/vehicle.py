"""Planar bicycle model with brush-tire lateral forces.

The model doubles as the closed-loop simulation plant and as the ground truth
that the controller's successive linearization tracks. States live in
path-relative (curvilinear) coordinates: s is distance along the reference
path, e the lateral offset (positive left), dpsi the heading error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import NonFiniteError, ScenarioParseError, UxTooSmallError

# Below this longitudinal speed the slip-angle geometry degenerates.
UX_MIN_DEFAULT = 0.5  # m/s

# Fraction of the saturation slip angle inside which the brush curve is
# treated as informative. At the edge the tire still delivers over 99% of
# its peak force but keeps a positive local stiffness, so an affine model
# taken anywhere in the band never has a flat (or nearly flat) force slope.
FRONT_SLIP_FRACTION = 0.85

# Plant integration limits: one controller tick per call, millisecond substeps.
PLANT_MAX_DT = 0.02  # s
PLANT_SUBSTEP = 1.0e-3  # s


@dataclass(frozen=True)
class TireParams:
    """One axle's brush tire: linear stiffness, friction, normal load."""

    C: float  # cornering stiffness, N/rad
    mu: float  # friction coefficient
    Fz: float  # normal load, N

    def __post_init__(self) -> None:
        if not self.C > 0.0:
            raise ValueError(f"cornering stiffness must be positive, got {self.C}")
        if not 0.0 < self.mu <= 1.2:
            raise ValueError(f"friction coefficient must lie in (0, 1.2], got {self.mu}")
        if not self.Fz > 0.0:
            raise ValueError(f"normal load must be positive, got {self.Fz}")

    @property
    def alpha_sat(self) -> float:
        """Slip angle beyond which the contact patch is fully sliding, rad."""
        return math.atan(3.0 * self.mu * self.Fz / self.C)

    def with_mu(self, mu: float) -> TireParams:
        return replace(self, mu=mu)


@dataclass(frozen=True)
class VehicleParams:
    """Rigid single-track vehicle with static axle loads."""

    m: float  # mass, kg
    Iz: float  # yaw inertia, kg m^2
    a: float  # CG to front axle, m
    b: float  # CG to rear axle, m
    g: float  # gravity, m/s^2
    front: TireParams
    rear: TireParams

    def __post_init__(self) -> None:
        for name in ("m", "Iz", "a", "b", "g"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"vehicle parameter {name} must be positive")

    @property
    def wheelbase(self) -> float:
        return self.a + self.b

    def with_mu(self, mu: float) -> VehicleParams:
        """Both axles on a surface with the given friction coefficient."""
        return replace(self, front=self.front.with_mu(mu), rear=self.rear.with_mu(mu))

    @classmethod
    def from_config(
        cls,
        m: float,
        Iz: float,
        a: float,
        b: float,
        g: float,
        C_front: float,
        C_rear: float,
        mu_front: float,
        mu_rear: float,
    ) -> VehicleParams:
        """Build params with axle loads from statics: Fz_f = m g b / L, Fz_r = m g a / L."""
        L = a + b
        fzf = m * g * b / L
        fzr = m * g * a / L
        return cls(
            m=m,
            Iz=Iz,
            a=a,
            b=b,
            g=g,
            front=TireParams(C=C_front, mu=mu_front, Fz=fzf),
            rear=TireParams(C=C_rear, mu=mu_rear, Fz=fzr),
        )

    @classmethod
    def from_dict(cls, d: dict) -> VehicleParams:
        keys = ("m", "Iz", "a", "b", "g", "C_front", "C_rear", "mu_front", "mu_rear")
        missing = [k for k in keys if k not in d]
        if missing:
            raise ScenarioParseError(
                f"vehicle file missing field '{missing[0]}'", field=missing[0]
            )
        try:
            vals = {k: float(d[k]) for k in keys}
        except (TypeError, ValueError) as exc:
            raise ScenarioParseError(f"vehicle file has a non-numeric field: {exc}") from exc
        return cls.from_config(**vals)

    @classmethod
    def from_file(cls, path: str | Path) -> VehicleParams:
        try:
            with open(path) as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(f"vehicle file {path}: {exc}") from exc
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "Iz": self.Iz,
            "a": self.a,
            "b": self.b,
            "g": self.g,
            "C_front": self.front.C,
            "C_rear": self.rear.C,
            "mu_front": self.front.mu,
            "mu_rear": self.rear.mu,
        }


def default_vehicle() -> VehicleParams:
    """Compact-hatchback scale defaults used by the shipped scenarios."""
    return VehicleParams.from_config(
        m=1500.0,
        Iz=2250.0,
        a=1.04,
        b=1.42,
        g=9.81,
        C_front=80000.0,
        C_rear=80000.0,
        mu_front=0.9,
        mu_rear=0.9,
    )


@dataclass(frozen=True)
class VehicleState:
    """Curvilinear pose plus body-frame velocities."""

    s: float  # distance along path, m
    e: float  # lateral offset, m, positive left
    dpsi: float  # heading error, rad
    Ux: float  # longitudinal speed, m/s
    Uy: float  # lateral speed, m/s
    r: float  # yaw rate, rad/s

    def as_array(self) -> np.ndarray:
        return np.array([self.s, self.e, self.dpsi, self.Ux, self.Uy, self.r])

    @classmethod
    def from_array(cls, x: np.ndarray) -> VehicleState:
        return cls(s=x[0], e=x[1], dpsi=x[2], Ux=x[3], Uy=x[4], r=x[5])


@dataclass(frozen=True)
class ControlInput:
    """Actuation held over one plant step."""

    delta: float  # road-wheel steering angle, rad, positive left
    Fxf: float = 0.0  # front longitudinal force, N
    Fxr: float = 0.0  # rear longitudinal force, N


def slip_angles(
    state: VehicleState,
    delta: float,
    params: VehicleParams,
    ux_min: float = UX_MIN_DEFAULT,
) -> tuple[float, float]:
    """Front and rear slip angles from velocity geometry.

    alpha_f = atan((Uy + a r) / Ux) - delta, alpha_r = atan((Uy - b r) / Ux).
    Raises UxTooSmallError below the speed floor where the geometry degenerates.
    """
    if state.Ux < ux_min:
        raise UxTooSmallError(f"Ux = {state.Ux} m/s below floor {ux_min} m/s")
    alpha_f = math.atan((state.Uy + params.a * state.r) / state.Ux) - delta
    alpha_r = math.atan((state.Uy - params.b * state.r) / state.Ux)
    return alpha_f, alpha_r


def _brush_force_magnitude(alpha_mag: float, tire: TireParams) -> float:
    # Cubic brush curve on [0, alpha_sat], friction cap beyond; alpha_mag >= 0.
    t_sat = 3.0 * tire.mu * tire.Fz / tire.C
    if alpha_mag >= math.atan(t_sat):
        return tire.mu * tire.Fz
    t = math.tan(alpha_mag)
    mf = tire.mu * tire.Fz
    return tire.C * t - (tire.C**2 / (3.0 * mf)) * t * t + (tire.C**3 / (27.0 * mf * mf)) * t**3


def fiala_lateral_force(alpha: float, tire: TireParams) -> float:
    """Lateral force of the brush tire, N. Odd in alpha, capped at mu Fz.

    Evaluated on |alpha| and mirrored so that fiala(-a) == -fiala(a) holds to
    the last bit.
    """
    if not math.isfinite(alpha):
        raise NonFiniteError(f"slip angle is not finite: {alpha}")
    mag = _brush_force_magnitude(abs(alpha), tire)
    return -math.copysign(mag, alpha)


def fiala_force_slope(alpha: float, tire: TireParams) -> float:
    """Analytic dFy/dalpha of the brush tire; nonpositive, zero when sliding."""
    if not math.isfinite(alpha):
        raise NonFiniteError(f"slip angle is not finite: {alpha}")
    t_sat = 3.0 * tire.mu * tire.Fz / tire.C
    if abs(alpha) >= math.atan(t_sat):
        return 0.0
    t = math.tan(abs(alpha))
    u = tire.C * t / (3.0 * tire.mu * tire.Fz)
    sec2 = 1.0 + t * t
    return -tire.C * (1.0 - u) ** 2 * sec2


def lateral_forces(
    state: VehicleState,
    delta: float,
    params: VehicleParams,
    ux_min: float = UX_MIN_DEFAULT,
) -> tuple[float, float]:
    """Front and rear axle lateral forces at the current state, N."""
    alpha_f, alpha_r = slip_angles(state, delta, params, ux_min)
    return (
        fiala_lateral_force(alpha_f, params.front),
        fiala_lateral_force(alpha_r, params.rear),
    )


def state_derivative(
    state: VehicleState,
    control: ControlInput,
    params: VehicleParams,
    kappa: float,
    ux_min: float = UX_MIN_DEFAULT,
) -> np.ndarray:
    """Time derivative of [s, e, dpsi, Ux, Uy, r] at the given curvature."""
    fyf, fyr = lateral_forces(state, control.delta, params, ux_min)
    ds = state.Ux - state.Uy * state.dpsi
    de = state.Uy + state.Ux * state.dpsi
    ddpsi = state.r - kappa * state.Ux
    dux = (control.Fxf + control.Fxr) / params.m + state.r * state.Uy
    duy = (fyf + fyr) / params.m - state.r * state.Ux
    dr = (params.a * fyf - params.b * fyr) / params.Iz
    return np.array([ds, de, ddpsi, dux, duy, dr])


def integrate_plant(
    state: VehicleState,
    control: ControlInput,
    dt: float,
    kappa_fn,
    friction_fn,
    params: VehicleParams,
    ux_min: float = UX_MIN_DEFAULT,
) -> VehicleState:
    """Propagate the plant one tick with RK4 at millisecond substeps.

    kappa_fn and friction_fn map path position s to local curvature and
    friction coefficient; both are re-sampled at every RK4 stage so surface
    changes land mid-step instead of waiting for the next tick.
    """
    if not 0.0 < dt <= PLANT_MAX_DT + 1e-12:
        raise ValueError(f"plant step must lie in (0, {PLANT_MAX_DT}] s, got {dt}")

    def deriv(x: np.ndarray) -> np.ndarray:
        st = VehicleState.from_array(x)
        local = params.with_mu(float(friction_fn(st.s)))
        return state_derivative(st, control, local, float(kappa_fn(st.s)), ux_min)

    n_sub = max(1, math.ceil(dt / PLANT_SUBSTEP - 1e-12))
    h = dt / n_sub
    x = state.as_array()
    for _ in range(n_sub):
        k1 = deriv(x)
        k2 = deriv(x + 0.5 * h * k1)
        k3 = deriv(x + 0.5 * h * k2)
        k4 = deriv(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"plant state left the finite range: {x}")
    return VehicleState.from_array(x)


def speed_tracking_forces(
    state: VehicleState,
    ux_target: float,
    params: VehicleParams,
    mu: float,
    gain: float = 2.0,
) -> tuple[float, float]:
    """Proportional speed-hold longitudinal forces, split evenly across axles.

    Total force is clamped to +-mu m g; lateral capacity is not debited
    (no friction-circle coupling in the plant).
    """
    fx_total = gain * params.m * (ux_target - state.Ux)
    cap = mu * params.m * params.g
    fx_total = min(max(fx_total, -cap), cap)
    return 0.5 * fx_total, 0.5 * fx_total
