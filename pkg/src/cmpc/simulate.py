"""Closed-loop simulation: scenario files, the tick loop, logs, and metrics.

A scenario JSON file pins everything a run needs: vehicle, track geometry,
surface friction map, speed profile, controller configuration, initial state,
and timing. Runs are fully deterministic, so a written log can be replayed
bit for bit by re-integrating the plant under the logged commands.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import numpy as np

from .controller import (
    CONTINGENCY,
    NOMINAL,
    OK,
    Controller,
    ControllerConfig,
    StepResult,
    Weights,
)
from .envelopes import ENVIRONMENTAL, STABILITY, stability_envelope
from .errors import NonFiniteError, ScenarioParseError, SchemaVersionError
from .linearize import HorizonSpec
from .track import (
    FrictionMap,
    FrictionZone,
    Path,
    SpeedProfile,
    bounds_at,
    build_left_turn,
    constant_speed_profile,
    curvature_at,
    friction_at,
)
from .vehicle import (
    ControlInput,
    VehicleParams,
    VehicleState,
    integrate_plant,
    speed_tracking_forces,
)

SCHEMA_VERSION = 1

ABORT_SOLVER = "solver_failure"
ABORT_PLANT = "plant_nonfinite"

# Fixed column order of run.csv; parsers rely on it.
RUN_COLUMNS = (
    "time_s",
    "s_m",
    "e_m",
    "dpsi_rad",
    "ux_mps",
    "uy_mps",
    "r_radps",
    "delta_cmd_rad",
    "solver_status",
    "solver_iterations",
    "solve_time_ms",
    "sigma_stab_nom_max",
    "sigma_stab_con_max",
    "sigma_env_nom_max",
    "sigma_env_con_max",
    "objective",
    "kkt_residual_max",
)

HORIZON_COLUMNS = (
    "tick",
    "time_s",
    "branch",
    "stage",
    "s_m",
    "ux_mps",
    "uy_mps",
    "r_radps",
    "dpsi_rad",
    "e_m",
    "u_rad",
)

_TOP_LEVEL_KEYS = {
    "schema_version",
    "name",
    "vehicle",
    "track",
    "friction",
    "speed",
    "controller",
    "initial",
    "duration_s",
    "tick_s",
    "seed",
    "log",
}


@dataclass(frozen=True)
class Scenario:
    """One fully specified closed-loop experiment."""

    name: str
    vehicle: VehicleParams
    path: Path
    friction: FrictionMap
    speed: SpeedProfile
    controller: ControllerConfig
    initial: VehicleState
    duration_s: float
    tick_s: float
    seed: int
    horizon_log_every: int
    track_spec: dict
    speed_spec: dict

    def to_dict(self) -> dict:
        """Canonical echo: inline vehicle, explicit defaults, stable key order."""
        c = self.controller
        w = c.weights
        h = c.horizon
        return {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "vehicle": self.vehicle.to_dict(),
            "track": dict(self.track_spec),
            "friction": {
                "default_mu": self.friction.default_mu,
                "zones": [
                    {"s_start": z.s_start, "s_end": z.s_end, "mu": z.mu}
                    for z in self.friction.zones
                ],
            },
            "speed": dict(self.speed_spec),
            "controller": {
                "kind": c.kind,
                "nominal_mu": c.nominal_mu,
                "contingency_mu": c.contingency_mu,
                "weights": {
                    "q_diag": list(w.q_diag),
                    "r_slew": w.r_slew,
                    "w_stability": w.w_stability,
                    "w_environmental": w.w_environmental,
                    "delta_max": w.delta_max,
                    "slew_rate_max": w.slew_rate_max,
                    "tie_break": w.tie_break,
                    "slip_prox": w.slip_prox,
                },
                "horizon": {
                    "n_short": h.n_short,
                    "dt_short": h.dt_short,
                    "n_long": h.n_long,
                    "dt_long": h.dt_long,
                },
                "solver_tol": c.solver_tol,
                "solver_max_iter": c.solver_max_iter,
                "max_consecutive_failures": c.max_consecutive_failures,
                "ux_min": c.ux_min,
            },
            "initial": {
                "s": self.initial.s,
                "e": self.initial.e,
                "dpsi": self.initial.dpsi,
                "Ux": self.initial.Ux,
                "Uy": self.initial.Uy,
                "r": self.initial.r,
            },
            "duration_s": self.duration_s,
            "tick_s": self.tick_s,
            "seed": self.seed,
            "log": {"horizon_every": self.horizon_log_every},
        }


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ScenarioParseError(f"{where} is missing field '{key}'", field=key)
    return d[key]


def _num(d: dict, key: str, where: str, default=None) -> float:
    if key not in d:
        if default is None:
            raise ScenarioParseError(f"{where} is missing field '{key}'", field=key)
        return float(default)
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioParseError(f"{where}.{key} must be a number", field=key)
    return float(v)


def _build_track(spec: dict) -> tuple[Path, dict]:
    kind = _require(spec, "type", "track")
    if kind == "left_turn":
        radius = _num(spec, "radius", "track")
        entry = _num(spec, "entry_len", "track")
        exit_ = _num(spec, "exit_len", "track")
        half = _num(spec, "half_width", "track")
        path = build_left_turn(radius, entry, exit_, half)
        canon = {
            "type": "left_turn",
            "radius": radius,
            "entry_len": entry,
            "exit_len": exit_,
            "half_width": half,
        }
        return path, canon
    if kind == "samples":
        for key in ("s", "kappa", "e_min", "e_max"):
            _require(spec, key, "track")
        path = Path(
            s=np.asarray(spec["s"], dtype=float),
            kappa=np.asarray(spec["kappa"], dtype=float),
            e_min=np.asarray(spec["e_min"], dtype=float),
            e_max=np.asarray(spec["e_max"], dtype=float),
        )
        canon = {
            "type": "samples",
            "s": [float(v) for v in spec["s"]],
            "kappa": [float(v) for v in spec["kappa"]],
            "e_min": [float(v) for v in spec["e_min"]],
            "e_max": [float(v) for v in spec["e_max"]],
        }
        return path, canon
    raise ScenarioParseError(f"unknown track type '{kind}'", field="type")


def _build_speed(spec: dict, length: float) -> tuple[SpeedProfile, dict]:
    if "ux" in spec and not isinstance(spec["ux"], list):
        ux = _num(spec, "ux", "speed")
        return constant_speed_profile(ux, length), {"ux": ux}
    for key in ("s", "ux"):
        _require(spec, key, "speed")
    profile = SpeedProfile(
        s=np.asarray(spec["s"], dtype=float), ux=np.asarray(spec["ux"], dtype=float)
    )
    return profile, {
        "s": [float(v) for v in spec["s"]],
        "ux": [float(v) for v in spec["ux"]],
    }


def _build_controller(spec: dict) -> ControllerConfig:
    kind = _require(spec, "kind", "controller")
    wd = spec.get("weights", {})
    weights = Weights(
        q_diag=tuple(wd.get("q_diag", (0.0, 0.0, 1.0, 1.0))),
        r_slew=_num(wd, "r_slew", "weights", 0.01),
        w_stability=_num(wd, "w_stability", "weights", 50.0),
        w_environmental=_num(wd, "w_environmental", "weights", 500.0),
        delta_max=_num(wd, "delta_max", "weights", 0.35),
        slew_rate_max=_num(wd, "slew_rate_max", "weights", 0.6),
        tie_break=_num(wd, "tie_break", "weights", 1e-4),
        slip_prox=_num(wd, "slip_prox", "weights", 100.0),
    )
    hd = spec.get("horizon", {})
    horizon = HorizonSpec(
        n_short=int(_num(hd, "n_short", "horizon", 10)),
        dt_short=_num(hd, "dt_short", "horizon", 0.02),
        n_long=int(_num(hd, "n_long", "horizon", 40)),
        dt_long=_num(hd, "dt_long", "horizon", 0.3),
    )
    contingency_mu = spec.get("contingency_mu")
    if contingency_mu is not None:
        contingency_mu = float(contingency_mu)
    return ControllerConfig(
        kind=kind,
        nominal_mu=_num(spec, "nominal_mu", "controller"),
        contingency_mu=contingency_mu,
        weights=weights,
        horizon=horizon,
        solver_tol=_num(spec, "solver_tol", "controller", 1e-6),
        solver_max_iter=int(_num(spec, "solver_max_iter", "controller", 4000)),
        max_consecutive_failures=int(
            _num(spec, "max_consecutive_failures", "controller", 3)
        ),
        ux_min=_num(spec, "ux_min", "controller", 0.5),
    )


def scenario_from_dict(d: dict, base_dir: FsPath | None = None) -> Scenario:
    if not isinstance(d, dict):
        raise ScenarioParseError("scenario must be a JSON object")
    unknown = set(d) - _TOP_LEVEL_KEYS
    if unknown:
        raise ScenarioParseError(
            f"scenario has unknown field '{sorted(unknown)[0]}'",
            field=sorted(unknown)[0],
        )
    version = _require(d, "schema_version", "scenario")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"scenario schema_version {version} not supported (expected {SCHEMA_VERSION})",
            field="schema_version",
        )
    name = _require(d, "name", "scenario")
    if not isinstance(name, str) or not name:
        raise ScenarioParseError("scenario name must be a non-empty string", field="name")

    vspec = _require(d, "vehicle", "scenario")
    if isinstance(vspec, str):
        vpath = FsPath(vspec)
        if not vpath.is_absolute() and base_dir is not None:
            vpath = base_dir / vpath
        vehicle = VehicleParams.from_file(vpath)
    elif isinstance(vspec, dict):
        vehicle = VehicleParams.from_dict(vspec)
    else:
        raise ScenarioParseError(
            "vehicle must be a file path or an inline object", field="vehicle"
        )

    path, track_canon = _build_track(_require(d, "track", "scenario"))

    fspec = _require(d, "friction", "scenario")
    zones = tuple(
        FrictionZone(
            s_start=_num(z, "s_start", "friction zone"),
            s_end=_num(z, "s_end", "friction zone"),
            mu=_num(z, "mu", "friction zone"),
        )
        for z in fspec.get("zones", [])
    )
    friction = FrictionMap(
        default_mu=_num(fspec, "default_mu", "friction"), zones=zones
    )

    speed, speed_canon = _build_speed(
        _require(d, "speed", "scenario"), path.total_length
    )
    controller = _build_controller(_require(d, "controller", "scenario"))

    init = d.get("initial", {})
    s0 = _num(init, "s", "initial", 0.0)
    initial = VehicleState(
        s=s0,
        e=_num(init, "e", "initial", 0.0),
        dpsi=_num(init, "dpsi", "initial", 0.0),
        Ux=_num(init, "Ux", "initial", speed.speed_at(s0)),
        Uy=_num(init, "Uy", "initial", 0.0),
        r=_num(init, "r", "initial", 0.0),
    )

    log = d.get("log", {})
    return Scenario(
        name=name,
        vehicle=vehicle,
        path=path,
        friction=friction,
        speed=speed,
        controller=controller,
        initial=initial,
        duration_s=_num(d, "duration_s", "scenario"),
        tick_s=_num(d, "tick_s", "scenario", 0.02),
        seed=int(_num(d, "seed", "scenario", 0)),
        horizon_log_every=int(_num(log, "horizon_every", "log", 50)),
        track_spec=track_canon,
        speed_spec=speed_canon,
    )


def load_scenario(path: str | FsPath) -> Scenario:
    path = FsPath(path)
    try:
        with open(path) as fh:
            d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"scenario file {path}: {exc}") from exc
    return scenario_from_dict(d, base_dir=path.parent)


@dataclass
class TickRecord:
    time_s: float
    state: VehicleState
    delta_cmd_rad: float
    solver_status: str
    solver_iterations: int
    solve_time_ms: float
    sigma_stab_nom_max: float
    sigma_stab_con_max: float
    sigma_env_nom_max: float
    sigma_env_con_max: float
    objective: float
    kkt_residual_max: float


@dataclass
class HorizonSnapshot:
    tick: int
    time_s: float
    branch: str
    s: np.ndarray
    ux: np.ndarray
    x: np.ndarray  # (N+1, 4) [Uy, r, dpsi, e]
    u: np.ndarray  # (N,)


@dataclass
class RunLog:
    scenario: Scenario
    records: list = field(default_factory=list)
    horizons: list = field(default_factory=list)
    completed: bool = False
    abort_reason: str | None = None
    final_state: VehicleState | None = None
    metrics: dict = field(default_factory=dict)


def _slack_max(solution, branch: str, channel: str) -> float:
    if solution is None or (branch, channel) not in solution.slacks:
        return float("nan")
    return float(np.max(solution.slacks[(branch, channel)]))


def run_closed_loop(scenario: Scenario, tick_callback=None) -> RunLog:
    """Drive the plant under the controller until the path end or timeout.

    tick_callback, when given, is called as callback(i, time_s, state,
    step_result) after every solve and may inspect the full QP; it must not
    mutate anything. The run aborts once the controller exceeds its
    consecutive-failure budget or the plant state leaves the finite range.
    """
    cfg = scenario.controller
    controller = Controller(cfg, scenario.vehicle, scenario.path, scenario.speed)
    path = scenario.path
    fmap = scenario.friction
    total = path.total_length
    tick = scenario.tick_s
    n_ticks = int(round(scenario.duration_s / tick))

    def kappa_fn(s: float) -> float:
        return curvature_at(path, min(max(s, 0.0), total))

    def friction_fn(s: float) -> float:
        return friction_at(fmap, s)

    log = RunLog(scenario=scenario)
    state = scenario.initial
    t = 0.0
    for i in range(n_ticks):
        res: StepResult = controller.step(state, elapsed=tick)
        sol = res.solution
        log.records.append(
            TickRecord(
                time_s=t,
                state=state,
                delta_cmd_rad=res.delta,
                solver_status=res.qp.status,
                solver_iterations=res.qp.iterations,
                solve_time_ms=res.solve_time_ms,
                sigma_stab_nom_max=_slack_max(sol, NOMINAL, STABILITY),
                sigma_stab_con_max=_slack_max(sol, CONTINGENCY, STABILITY),
                sigma_env_nom_max=_slack_max(sol, NOMINAL, ENVIRONMENTAL),
                sigma_env_con_max=_slack_max(sol, CONTINGENCY, ENVIRONMENTAL),
                objective=sol.objective if sol is not None else float("nan"),
                kkt_residual_max=res.qp.max_residual,
            )
        )
        if (
            sol is not None
            and res.status == OK
            and scenario.horizon_log_every > 0
            and i % scenario.horizon_log_every == 0
        ):
            branches = [(NOMINAL, sol.x_nom, sol.u_nom)]
            if sol.x_con is not None:
                branches.append((CONTINGENCY, sol.x_con, sol.u_con))
            for br, x, u in branches:
                log.horizons.append(
                    HorizonSnapshot(
                        tick=i,
                        time_s=t,
                        branch=br,
                        s=res.model.s.copy(),
                        ux=res.model.ux.copy(),
                        x=x,
                        u=u,
                    )
                )
        if tick_callback is not None:
            tick_callback(i, t, state, res)
        if res.failures >= cfg.max_consecutive_failures:
            log.abort_reason = ABORT_SOLVER
            log.final_state = state
            break

        mu_here = friction_fn(state.s)
        fxf, fxr = speed_tracking_forces(
            state, scenario.speed.speed_at(state.s), scenario.vehicle, mu_here
        )
        control = ControlInput(delta=res.delta, Fxf=fxf, Fxr=fxr)
        try:
            state = integrate_plant(
                state, control, tick, kappa_fn, friction_fn, scenario.vehicle, cfg.ux_min
            )
        except NonFiniteError:
            log.abort_reason = ABORT_PLANT
            log.final_state = state
            break
        t += tick
        if state.s >= total:
            log.completed = True
            log.final_state = state
            break
    if log.final_state is None:
        log.final_state = state
    log.metrics = compute_metrics(log)
    return log


def _turn_start_s(path: Path) -> float:
    """s of the first sampled point with nonzero curvature, or +inf if straight."""
    idx = np.flatnonzero(path.kappa != 0.0)
    return float(path.s[idx[0]]) if idx.size else float("inf")


def compute_metrics(log: RunLog) -> dict:
    """Summary numbers for one run, measured against the true plant surface.

    Boundary and stability violations use the logged plant states, the road
    bounds at the logged s, and the stability envelope for the friction
    actually under the vehicle at each tick, so they judge what happened, not
    what the controller believed.
    """
    sc = log.scenario
    path = sc.path
    recs = log.records
    n = len(recs)
    out: dict = {
        "completed": bool(log.completed),
        "abort_reason": log.abort_reason,
        "n_ticks": n,
    }
    if log.final_state is not None:
        out["final_s_m"] = float(log.final_state.s)
    if n == 0:
        return out
    out["final_time_s"] = float(recs[-1].time_s + sc.tick_s)

    tick = sc.tick_s
    s_turn = _turn_start_s(path)
    bound_viol = np.zeros(n)
    stab_viol = np.zeros(n)
    pre_turn_e = []
    for i, rec in enumerate(recs):
        st = rec.state
        s_clamped = min(max(st.s, 0.0), path.total_length)
        e_lo, e_hi = bounds_at(path, s_clamped)
        bound_viol[i] = max(0.0, st.e - e_hi, e_lo - st.e)
        mu_true = friction_at(sc.friction, st.s)
        if st.Ux >= sc.controller.ux_min:
            env = stability_envelope(st.Ux, mu_true, sc.vehicle, sc.controller.ux_min)
            x = np.array([st.Uy, st.r, st.dpsi, st.e])
            stab_viol[i] = float(np.max(env.violation(x, rec.delta_cmd_rad)))
        if st.s < s_turn:
            pre_turn_e.append(st.e)

    out["max_boundary_violation_m"] = float(np.max(bound_viol))
    out["boundary_violation_area_ms"] = float(np.sum(bound_viol) * tick)
    out["max_stability_violation"] = float(np.max(stab_viol))
    out["stability_violation_area"] = float(np.sum(stab_viol) * tick)
    if pre_turn_e:
        arr = np.array(pre_turn_e)
        out["pre_turn_e_min_m"] = float(np.min(arr))
        out["pre_turn_e_max_m"] = float(np.max(arr))
        out["pre_turn_max_abs_e_m"] = float(np.max(np.abs(arr)))

    out["max_abs_delta_rad"] = float(max(abs(r.delta_cmd_rad) for r in recs))
    solve_ms = np.array([r.solve_time_ms for r in recs])
    out["solve_time_ms_mean"] = float(np.mean(solve_ms))
    out["solve_time_ms_max"] = float(np.max(solve_ms))
    iters = np.array([r.solver_iterations for r in recs])
    out["iterations_mean"] = float(np.mean(iters))
    out["iterations_max"] = int(np.max(iters))
    out["n_converged"] = int(sum(1 for r in recs if r.solver_status == "converged"))
    out["n_failed"] = n - out["n_converged"]
    out["kkt_residual_max"] = float(max(r.kkt_residual_max for r in recs))
    con_env = [r.sigma_env_con_max for r in recs if math.isfinite(r.sigma_env_con_max)]
    out["sigma_env_con_max_m"] = float(max(con_env)) if con_env else float("nan")
    con_stab = [
        r.sigma_stab_con_max for r in recs if math.isfinite(r.sigma_stab_con_max)
    ]
    out["sigma_stab_con_max"] = float(max(con_stab)) if con_stab else float("nan")
    out["mu_min_encountered"] = float(
        min(friction_at(sc.friction, r.state.s) for r in recs)
    )
    return out


def _fmt(v) -> str:
    # repr round-trips doubles exactly; that is what makes replay bit-exact.
    return repr(float(v))


def write_log(log: RunLog, out_dir: str | FsPath) -> FsPath:
    """Write run.csv, horizons.csv, and run.json into out_dir."""
    out = FsPath(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "run.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(RUN_COLUMNS)
        for rec in log.records:
            st = rec.state
            wr.writerow(
                [
                    _fmt(rec.time_s),
                    _fmt(st.s),
                    _fmt(st.e),
                    _fmt(st.dpsi),
                    _fmt(st.Ux),
                    _fmt(st.Uy),
                    _fmt(st.r),
                    _fmt(rec.delta_cmd_rad),
                    rec.solver_status,
                    str(int(rec.solver_iterations)),
                    _fmt(rec.solve_time_ms),
                    _fmt(rec.sigma_stab_nom_max),
                    _fmt(rec.sigma_stab_con_max),
                    _fmt(rec.sigma_env_nom_max),
                    _fmt(rec.sigma_env_con_max),
                    _fmt(rec.objective),
                    _fmt(rec.kkt_residual_max),
                ]
            )

    with open(out / "horizons.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(HORIZON_COLUMNS)
        for snap in log.horizons:
            ns = snap.x.shape[0]
            for k in range(ns):
                u_k = snap.u[k] if k < snap.u.shape[0] else float("nan")
                wr.writerow(
                    [
                        str(snap.tick),
                        _fmt(snap.time_s),
                        snap.branch,
                        str(k),
                        _fmt(snap.s[k]),
                        _fmt(snap.ux[k]),
                        _fmt(snap.x[k, 0]),
                        _fmt(snap.x[k, 1]),
                        _fmt(snap.x[k, 2]),
                        _fmt(snap.x[k, 3]),
                        _fmt(u_k),
                    ]
                )

    meta = {
        "schema_version": SCHEMA_VERSION,
        "scenario": log.scenario.to_dict(),
        "seed": log.scenario.seed,
        "completed": log.completed,
        "abort_reason": log.abort_reason,
        "metrics": log.metrics,
    }
    with open(out / "run.json", "w") as fh:
        json.dump(meta, fh, indent=2, allow_nan=True)
        fh.write("\n")
    return out


def read_log(run_dir: str | FsPath) -> tuple[list, list, dict]:
    """Read back (records, horizon rows, metadata) from a run directory.

    Numeric cells come back as floats; solver_status and branch stay strings.
    """
    run_dir = FsPath(run_dir)
    records = []
    with open(run_dir / "run.csv", newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        if tuple(header) != RUN_COLUMNS:
            raise ScenarioParseError(f"{run_dir}/run.csv has unexpected columns")
        for row in rd:
            rec = {}
            for key, cell in zip(RUN_COLUMNS, row):
                rec[key] = cell if key == "solver_status" else float(cell)
            records.append(rec)
    horizons = []
    hpath = run_dir / "horizons.csv"
    if hpath.exists():
        with open(hpath, newline="") as fh:
            rd = csv.reader(fh)
            next(rd)
            for row in rd:
                rec = {}
                for key, cell in zip(HORIZON_COLUMNS, row):
                    rec[key] = cell if key == "branch" else float(cell)
                horizons.append(rec)
    with open(run_dir / "run.json") as fh:
        meta = json.load(fh)
    return records, horizons, meta


def replay(run_dir: str | FsPath) -> dict:
    """Re-integrate the plant under the logged commands and compare states.

    The plant, the friction map, and the logged commands are all
    deterministic and the log stores full-precision floats, so the replayed
    trajectory must match the log exactly. Returns a report with the maximum
    absolute state difference and the bit_exact flag.
    """
    records, _, meta = read_log(run_dir)
    scenario = scenario_from_dict(meta["scenario"])
    path = scenario.path
    total = path.total_length

    def kappa_fn(s: float) -> float:
        return curvature_at(path, min(max(s, 0.0), total))

    def friction_fn(s: float) -> float:
        return friction_at(scenario.friction, s)

    max_diff = 0.0
    n_compared = 0
    state = scenario.initial
    for i, rec in enumerate(records):
        logged = np.array(
            [
                rec["s_m"],
                rec["e_m"],
                rec["dpsi_rad"],
                rec["ux_mps"],
                rec["uy_mps"],
                rec["r_radps"],
            ]
        )
        here = np.array([state.s, state.e, state.dpsi, state.Ux, state.Uy, state.r])
        max_diff = max(max_diff, float(np.max(np.abs(here - logged))))
        n_compared += 1
        if i == len(records) - 1:
            break
        mu_here = friction_fn(state.s)
        fxf, fxr = speed_tracking_forces(
            state, scenario.speed.speed_at(state.s), scenario.vehicle, mu_here
        )
        control = ControlInput(delta=rec["delta_cmd_rad"], Fxf=fxf, Fxr=fxr)
        state = integrate_plant(
            state,
            control,
            scenario.tick_s,
            kappa_fn,
            friction_fn,
            scenario.vehicle,
            scenario.controller.ux_min,
        )
    return {
        "ticks_compared": n_compared,
        "max_abs_state_diff": max_diff,
        "bit_exact": max_diff == 0.0,
    }
