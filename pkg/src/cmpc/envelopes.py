"""Linear state envelopes: vehicle stability limits and road bounds.

Each envelope is a stack of half-space rows h x + p u <= g over the
controller state x = [Uy, r, dpsi, e] and, for rows with a nonzero input
coefficient p, the stage steering command. Rows within one envelope share a
single slack variable when relaxed inside the optimization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import UxTooSmallError
from .track import Path, bounds_at
from .vehicle import FRONT_SLIP_FRACTION, UX_MIN_DEFAULT, VehicleParams

STABILITY = "stability"
ENVIRONMENTAL = "environmental"


@dataclass(frozen=True)
class Envelope:
    rows: np.ndarray  # (n_rows, 4)
    bounds: np.ndarray  # (n_rows,)
    channel: str
    u_coeff: np.ndarray | None = None  # (n_rows,) steering coefficients

    def violation(self, x: np.ndarray, u: float = 0.0) -> np.ndarray:
        """Per-row positive residual max(0, h x + p u - g)."""
        lhs = self.rows @ np.asarray(x, dtype=float)
        if self.u_coeff is not None:
            lhs = lhs + self.u_coeff * float(u)
        return np.maximum(0.0, lhs - self.bounds)


def stability_envelope(
    ux: float,
    mu: float,
    params: VehicleParams,
    ux_min: float = UX_MIN_DEFAULT,
) -> Envelope:
    """Yaw-rate, sideslip, and front-slip limits at the given speed and surface.

    Yaw rate is capped by the friction circle, |r| <= mu g / Ux. Sideslip is
    capped through the rear axle: |Uy/Ux - b r/Ux| <= alpha_peak, the rear
    slip angle where the brush tire saturates at this mu. The four rows form
    a parallelogram in (Uy, r). Two further rows cap the front slip angle
    |(Uy + a r)/Ux - delta| inside the saturation angle so the plan never
    leans on the flat part of the tire curve, where the linearized model
    would promise force the surface cannot deliver.
    """
    if ux < ux_min:
        raise UxTooSmallError(f"envelope speed {ux} m/s below floor {ux_min} m/s")
    r_max = mu * params.g / ux
    alpha_peak = math.atan(3.0 * mu * params.rear.Fz / params.rear.C)
    alpha_front = FRONT_SLIP_FRACTION * math.atan(
        3.0 * mu * params.front.Fz / params.front.C
    )
    a, b = params.a, params.b
    rows = np.array(
        [
            [0.0, 1.0, 0.0, 0.0],
            [0.0, -1.0, 0.0, 0.0],
            [1.0 / ux, -b / ux, 0.0, 0.0],
            [-1.0 / ux, b / ux, 0.0, 0.0],
            [1.0 / ux, a / ux, 0.0, 0.0],
            [-1.0 / ux, -a / ux, 0.0, 0.0],
        ]
    )
    bounds = np.array([r_max, r_max, alpha_peak, alpha_peak, alpha_front, alpha_front])
    u_coeff = np.array([0.0, 0.0, 0.0, 0.0, -1.0, 1.0])
    return Envelope(rows=rows, bounds=bounds, channel=STABILITY, u_coeff=u_coeff)


def environmental_envelope(path: Path, s: float) -> Envelope:
    """Road-edge rows e <= e_max(s) and -e <= -e_min(s)."""
    e_min, e_max = bounds_at(path, s)
    rows = np.array(
        [
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.0, -1.0],
        ]
    )
    bounds = np.array([e_max, -e_min])
    return Envelope(rows=rows, bounds=bounds, channel=ENVIRONMENTAL)
