"""Command line front end: run scenarios, batch them, inspect and replay logs.

Exit codes: 0 for a clean run (or matching replay), 2 when a run aborted or a
replay diverged, 3 for configuration or parsing problems.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .errors import CmpcError
from .simulate import load_scenario, replay, run_closed_loop, write_log


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return 3


def _run_one(scenario, out_dir: Path) -> int:
    log = run_closed_loop(scenario)
    write_log(log, out_dir)
    m = log.metrics
    print(f"{scenario.name}: {m['n_ticks']} ticks, completed={log.completed}")
    if log.abort_reason:
        print(f"  aborted: {log.abort_reason}")
    if "max_boundary_violation_m" in m:
        print(f"  max boundary violation: {m['max_boundary_violation_m']:.4f} m")
        print(
            f"  solve time: mean {m['solve_time_ms_mean']:.1f} ms, "
            f"max {m['solve_time_ms_max']:.1f} ms"
        )
    print(f"  wrote {out_dir}")
    return 0 if log.abort_reason is None else 2


def _cmd_run(args) -> int:
    try:
        sc = load_scenario(args.scenario)
        if args.controller is not None:
            cc = dataclasses.replace(sc.controller, kind=args.controller)
            sc = dataclasses.replace(sc, controller=cc)
        if args.seed is not None:
            sc = dataclasses.replace(sc, seed=args.seed)
    except (CmpcError, ValueError, OSError) as exc:
        return _fail(str(exc))
    out = Path(args.out) if args.out else Path("runs") / sc.name
    return _run_one(sc, out)


def _cmd_batch(args) -> int:
    src = Path(args.dir)
    if not src.is_dir():
        return _fail(f"{src} is not a directory")
    files = sorted(src.glob("*.json"))
    scenarios = []
    for f in files:
        try:
            with open(f) as fh:
                head = json.load(fh)
        except (json.JSONDecodeError, OSError) as exc:
            return _fail(f"{f}: {exc}")
        if not isinstance(head, dict) or "schema_version" not in head:
            continue  # auxiliary file (e.g. a vehicle), not a scenario
        try:
            scenarios.append(load_scenario(f))
        except (CmpcError, ValueError) as exc:
            return _fail(f"{f}: {exc}")
    if not scenarios:
        return _fail(f"no scenario files found in {src}")
    worst = 0
    for sc in scenarios:
        code = _run_one(sc, Path(args.out) / sc.name)
        worst = max(worst, code)
    return worst


def _cmd_metrics(args) -> int:
    meta_path = Path(args.run_dir) / "run.json"
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except (json.JSONDecodeError, OSError) as exc:
        return _fail(f"{meta_path}: {exc}")
    name = meta.get("scenario", {}).get("name", "?")
    print(f"run: {name}")
    for key, val in meta.get("metrics", {}).items():
        print(f"  {key} = {val}")
    return 0


def _cmd_replay(args) -> int:
    try:
        report = replay(args.run_dir)
    except (CmpcError, OSError) as exc:
        return _fail(str(exc))
    print(
        f"replayed {report['ticks_compared']} ticks, "
        f"max state diff {report['max_abs_state_diff']:.3e}, "
        f"bit_exact={report['bit_exact']}"
    )
    return 0 if report["bit_exact"] else 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cmpc",
        description="Closed-loop steering control experiments on low-friction turns.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run one scenario file and write its logs")
    pr.add_argument("scenario", help="path to a scenario .json file")
    pr.add_argument("--out", help="output directory (default runs/<name>)")
    pr.add_argument(
        "--controller",
        choices=["cmpc", "dmpc"],
        help="override the scenario's controller kind",
    )
    pr.add_argument("--seed", type=int, help="override the scenario's seed")
    pr.set_defaults(fn=_cmd_run)

    pb = sub.add_parser("batch", help="run every scenario .json in a directory")
    pb.add_argument("dir", help="directory holding scenario files")
    pb.add_argument("--out", default="runs", help="base output directory")
    pb.set_defaults(fn=_cmd_batch)

    pm = sub.add_parser("metrics", help="print the metrics of a finished run")
    pm.add_argument("run_dir", help="directory written by 'run'")
    pm.set_defaults(fn=_cmd_metrics)

    pp = sub.add_parser("replay", help="re-integrate a logged run and verify it")
    pp.add_argument("run_dir", help="directory written by 'run'")
    pp.set_defaults(fn=_cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
