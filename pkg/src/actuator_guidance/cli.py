"""Command-line entry point: ``actuator-guidance {solve,bench,converge,validate}``.

Every CSV starts with a ``# config_hash=...`` comment line; numbers are
written with 17 significant digits so identical configs give identical
files. Run metadata (timings, timestamps) goes to ``metadata.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .bench import (
    TABLE_ORDER,
    build_scenario,
    convergence_study,
    field_snapshots,
    norm_history,
    solve,
    strategy_table,
)
from .config import ConfigError, ScenarioConfig, load_config, save_config, with_overrides

log = logging.getLogger("actuator_guidance")

EXIT_OK = 0
EXIT_ORDERING = 1
EXIT_CONFIG = 2
EXIT_STALLED = 3


def _num(x) -> str:
    return format(float(x), ".17g")


class ResultWriter:
    """Writes the CSV files of one run into ``out`` and remembers their names."""

    def __init__(self, out: Path, cfg: ScenarioConfig):
        self.out = out
        self.cfg = cfg
        self.hash = cfg.config_hash()
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def table(self, name: str, header: list[str], rows) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            fh.write(f"# config_hash={self.hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
        self.files.append(name)
        return path

    def series(self, name: str, t: np.ndarray, columns: dict[str, np.ndarray]) -> Path:
        data = np.column_stack([t] + list(columns.values()))
        return self.table(name, ["t"] + list(columns), data.tolist())

    def raster(self, name: str, xs: np.ndarray, values: np.ndarray) -> Path:
        # x, y, z triples with x slowest (gnuplot "with image" layout)
        rows = ((xs[i], xs[j], values[i, j]) for i in range(len(xs)) for j in range(len(xs)))
        return self.table(name, ["x", "y", "z"], ([float(a), float(b), float(c)] for a, b, c in rows))

    def metadata(self, extra: dict) -> Path:
        path = self.out / "metadata.json"
        meta = {
            "config_hash": self.hash,
            "config": self.cfg.to_dict(),
            "files": sorted(self.files),
            "written_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            **extra,
        }
        path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        save_config(self.cfg, self.out / "config.yaml")
        return path


def _position_columns(fleet, states) -> dict[str, np.ndarray]:
    pos = fleet.positions(states)
    cols = {}
    for i in range(fleet.m_a):
        cols[f"x{i + 1}"] = pos[:, i, 0]
        cols[f"y{i + 1}"] = pos[:, i, 1]
    return cols


def _control_ceases(t: np.ndarray, u: np.ndarray, after: float = 0.5, fraction: float = 0.1) -> bool:
    peak = np.abs(u).max()
    return bool(peak == 0 or np.abs(u[t > after]).max() < fraction * peak)


def _optimizer_meta(res) -> dict:
    return {
        "status": res.status,
        "message": res.message,
        "iterations": res.state.iteration,
        "objective": res.objective,
        "J_N": res.costs.J_N,
        "J_m": res.costs.J_m,
        "projected_gradient_norm": res.projected_gradient_norm,
    }


def cmd_solve(cfg: ScenarioConfig, out: Path) -> int:
    t0 = time.perf_counter()
    sc = build_scenario(cfg)
    res = solve(sc)
    w = ResultWriter(out, cfg)
    t = sc.grid.nodes
    fleet = sc.problem.fleet
    w.series("trajectory.csv", t, _position_columns(fleet, res.traj.states))
    w.series("guidance.csv", t, {f"p{k + 1}": res.p.values[:, k] for k in range(fleet.m)})
    w.series("control.csv", t, {f"u{k + 1}": res.u[:, k] for k in range(res.u.shape[1])})
    w.series("norm.csv", t, {"norm": norm_history(res.state.forward.sim)})
    w.table("cost_history.csv", ["iteration", "objective"],
            ([k, float(c)] for k, c in enumerate(res.state.cost_history)))
    ceases = _control_ceases(t, res.u)
    w.metadata({
        "command": "solve",
        "optimizer": _optimizer_meta(res),
        "control_ceases_after_0.5": ceases,
        "wall_time_s": time.perf_counter() - t0,
    })
    print(f"J = {res.objective:.10g} (J_N = {res.costs.J_N:.10g}, J_m = {res.costs.J_m:.10g}), "
          f"status {res.status} after {res.state.iteration} iterations")
    if res.status == "stalled":
        print(f"optimizer stalled: {res.message}", file=sys.stderr)
        return EXIT_STALLED
    return EXIT_OK


def cmd_bench(cfg: ScenarioConfig, out: Path) -> int:
    t0 = time.perf_counter()
    sc = build_scenario(cfg)
    res = solve(sc)
    table = strategy_table(sc, res, disturbance=cfg.disturbance.enabled)
    ref = table.rows[TABLE_ORDER[-1]].total
    w = ResultWriter(out, cfg)
    rows = []
    for s in TABLE_ORDER:
        c = table.rows[s]
        rows.append([s.value, c.J_N, c.J_m, c.total, 100.0 * c.J_N / ref, 100.0 * c.J_m / ref,
                     c.normalized_percent])
    w.table("table.csv", ["strategy", "J_N", "J_m", "total", "J_N_percent", "J_m_percent", "total_percent"], rows)
    t = sc.grid.nodes
    w.series("norms.csv", t, {s.value: norm_history(table.sims[s]) for s in TABLE_ORDER})
    w.series("trajectory.csv", t, _position_columns(sc.problem.fleet, res.traj.states))
    w.series("control.csv", t, {f"u{k + 1}": res.u[:, k] for k in range(res.u.shape[1])})
    for s in TABLE_ORDER:
        xs, snaps = field_snapshots(sc, table.sims[s])
        slug = s.name.lower()
        for tt, values in snaps.items():
            w.raster(f"snapshots/{slug}_t{tt:g}.csv", xs, values)
    violations = table.ordering_violations()
    w.metadata({
        "command": "bench",
        "optimizer": _optimizer_meta(res),
        "ordering_ok": not violations,
        "ordering_violations": violations,
        "wall_time_s": time.perf_counter() - t0,
    })
    width = max(len(s.value) for s in TABLE_ORDER)
    print(f"{'strategy':<{width}}  {'J_N %':>8}  {'J_m %':>8}  {'total %':>8}")
    for r in rows:
        print(f"{r[0]:<{width}}  {r[4]:8.2f}  {r[5]:8.2f}  {r[6]:8.2f}")
    if res.status == "stalled":
        print(f"optimizer stalled: {res.message}", file=sys.stderr)
        return EXIT_STALLED
    if violations:
        for v in violations:
            print(f"ordering violated: {v}", file=sys.stderr)
        return EXIT_ORDERING
    return EXIT_OK


def cmd_converge(cfg: ScenarioConfig, out: Path, warm_start: bool = False) -> int:
    t0 = time.perf_counter()
    report = convergence_study(cfg, warm_start=warm_start)
    w = ResultWriter(out, cfg)
    rows = [[N, N * N, c, pct, st] for N, c, pct, st in
            zip(report.modes, report.costs, report.normalized, report.status)]
    w.table("convergence.csv", ["N", "dim", "cost", "normalized_percent", "status"], rows)
    w.metadata({
        "command": "converge",
        "warm_start": warm_start,
        "max_relative_decrease": report.max_decrease(),
        "wall_time_s": time.perf_counter() - t0,
    })
    for r in rows:
        print(f"N = {r[0]:2d}  cost = {r[2]:.10g}  ({r[3]:.4f} %)  {r[4]}")
    if "stalled" in report.status:
        print("optimizer stalled for at least one dimension", file=sys.stderr)
        return EXIT_STALLED
    return EXIT_OK


def cmd_validate(cfg: ScenarioConfig) -> int:
    print(f"config ok: preset {cfg.preset}, bc {cfg.bc}, N = {cfg.n_modes}, "
          f"K = {cfg.grid_steps}, {len(cfg.actuator_positions)} actuators")
    print(f"config_hash={cfg.config_hash()}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML scenario file (defaults: Dirichlet preset)")
    common.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    common.add_argument("--bc", choices=["dirichlet", "neumann"], help="boundary condition preset")
    common.add_argument("--no-disturbance", action="store_true", help="disable the moving disturbance")
    common.add_argument("--grid-steps", type=int, help="time steps K over [0, t_f]")
    common.add_argument("--max-iters", type=int, help="optimizer iteration cap")
    common.add_argument("--n-modes", type=int, help="modes per axis N")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")

    parser = argparse.ArgumentParser(
        prog="actuator-guidance",
        description="Joint guidance and LQR control of mobile actuators for 2D diffusion-advection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="optimize guidance and export trajectories")
    sub.add_parser("bench", parents=[common], help="five-strategy cost table")
    conv = sub.add_parser("converge", parents=[common], help="optimal cost versus Galerkin dimension")
    conv.add_argument("--warm-start", action="store_true", help="start each N from the previous optimum")
    sub.add_parser("validate", parents=[common], help="check a config file and print its hash")
    return parser


def resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    changes = {
        "grid_steps": args.grid_steps,
        "n_modes": args.n_modes,
        "optimizer.max_iters": args.max_iters,
    }
    if args.bc is not None:
        changes["bc"] = args.bc
        changes["preset"] = f"{args.bc}-paper"
    if args.no_disturbance:
        changes["disturbance.enabled"] = False
    return with_overrides(cfg, **changes)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        return cmd_validate(cfg)
    try:
        if args.command == "solve":
            return cmd_solve(cfg, args.out)
        if args.command == "bench":
            return cmd_bench(cfg, args.out)
        return cmd_converge(cfg, args.out, warm_start=args.warm_start)
    except OSError as exc:
        print(f"error writing results: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
