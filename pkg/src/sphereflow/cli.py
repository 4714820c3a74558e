"""Config-driven experiment runner.

Usage:
    sphereflow run   --config cfg.json [--out DIR] [--threads N]
    sphereflow sweep --config cfg.json --param lambda --values 100,1000,10000
                     [--out DIR] [--threads N]

The JSON config is the single source of truth; flags only bind paths and
the diagnostic thread count.  Stepping is always single threaded so reruns
are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics as diag
from . import io as sfio
from . import singular as sing
from . import stereo
from .errors import CFLViolated, ConfigError, SphereFlowError, SpacingTooCoarse
from .field import InitialData, SphereField, generate, l2_distance
from .flow import (PenaltySchedule, SolverConfig, Trajectory, run_glhf,
                   run_projected, penalty_integral, trajectory_l2q_distance)
from .geometry import Domain, Grid, build_grid

TRAJECTORY_HEADER = ["step", "t", "gl_energy", "dirichlet_energy",
                     "penalty_increment", "max_norm"]


@dataclass
class ExperimentConfig:
    domain: Domain
    h: float
    D: int
    initial: InitialData
    mode: str
    lam: Optional[float]
    solver: SolverConfig
    diagnostics: dict
    seed: int
    raw: dict

    @staticmethod
    def load(path: Path) -> "ExperimentConfig":
        try:
            with open(path) as f:
                raw = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config: {e}") from e
        return ExperimentConfig.from_dict(raw)

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        try:
            domain = Domain.from_config(raw["domain"])
            h = float(raw["h"])
            D = int(raw.get("D", 2))
            initial = InitialData.from_config(raw["initial"])
            sv = raw["solver"]
            mode = sv.get("mode", "glhf-simplified")
            if mode not in ("glhf-simplified", "glhf-original", "projected"):
                raise ConfigError(f"unknown solver mode {mode!r}")
            lam = None
            if mode != "projected":
                if "lambda" not in sv:
                    raise ConfigError("penalized modes need solver.lambda")
                lam = float(sv["lambda"])
                if lam <= 1.0:
                    raise ConfigError("solver.lambda must exceed 1")
            cfl = float(sv.get("cfl", 0.9))
            d = domain.d
            dt_raw = sv.get("dt", "auto")
            dt = cfl * h * h / (2.0 * d) if dt_raw == "auto" else float(dt_raw)
            solver = SolverConfig(
                dt=dt, T=float(sv["T"]), cfl=cfl,
                penalty_integration=sv.get("penalty_integration", "exact-logistic"),
                output_stride=int(sv.get("output_stride", 1)))
            cfg = ExperimentConfig(domain=domain, h=h, D=D, initial=initial,
                                   mode=mode, lam=lam, solver=solver,
                                   diagnostics=raw.get("diagnostics", {}),
                                   seed=int(raw.get("seed", 0)), raw=raw)
            cfg.validate()
            return cfg
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid config: {e}") from e

    def validate(self):
        try:
            grid = build_grid(self.domain, self.h)
        except SpacingTooCoarse as e:
            raise ConfigError(str(e)) from e
        try:
            self.solver.validate(grid)
        except (CFLViolated, ValueError) as e:
            raise ConfigError(str(e)) from e
        if "singular" in self.diagnostics:
            s = self.diagnostics["singular"]
            try:
                self._singular_config(grid).validate(grid.h)
            except ValueError as e:
                raise ConfigError(f"singular diagnostics: {e}") from e
        if self.initial.kind == "custom-samples":
            p = self.raw["initial"].get("path")
            if not p:
                raise ConfigError("custom-samples initial data needs a snapshot path")
            if not Path(p).with_suffix(".f64").exists():
                raise ConfigError(f"initial snapshot {p!r} not found")

    def _singular_config(self, grid: Grid) -> sing.SingularConfig:
        s = self.diagnostics["singular"]
        return sing.SingularConfig(
            eps0=float(s["eps0"]),
            radii=[float(r) for r in s["radii"]],
            time_stride=int(s.get("time_stride", 1)),
            space_stride=int(s.get("space_stride", 1)),
            deltas=[float(x) for x in s["deltas"]] if "deltas" in s else None,
            mode=s.get("mode", "gl"))

    def build_initial(self, grid: Grid) -> SphereField:
        if self.initial.kind == "custom-samples":
            f, _ = sfio.read_snapshot(Path(self.raw["initial"]["path"]))
            init = InitialData(kind="custom-samples", samples=f.values)
            return generate(init, grid, self.D)
        return generate(self.initial, grid, self.D)

    def domain_center(self) -> np.ndarray:
        lo, hi = self.domain.bounding_box()
        return 0.5 * (lo + hi)


def _run_flow(cfg: ExperimentConfig, grid: Grid, u0: SphereField) -> Trajectory:
    if cfg.mode == "projected":
        return run_projected(u0, cfg.solver)
    sched = PenaltySchedule(lam=cfg.lam,
                            use_original_form=(cfg.mode == "glhf-original"))
    return run_glhf(u0, cfg.solver, sched)


def _write_trajectory(out: Path, traj: Trajectory):
    rows = [[r.step, r.t, r.gl_energy, r.dirichlet_energy,
             r.penalty_increment, r.max_norm] for r in traj.records]
    sfio.write_csv(out / "trajectory.csv", TRAJECTORY_HEADER, rows)
    snap_dir = out / "snapshots"
    for i, (t, snap) in enumerate(zip(traj.times, traj.snapshots)):
        sfio.write_snapshot(snap_dir / f"snap_{i:06d}", snap, t=t, step=i,
                            lam=traj.lam, exponent=traj.exponent_at(t))


def _cylinder_rows(traj: Trajectory, specs: list, threads: int) -> list:
    def one(spec):
        cyl = diag.CylinderSpec(t0=float(spec["t0"]),
                                x0=np.asarray(spec["x0"], dtype=float),
                                R=float(spec["R"]))
        mode = spec.get("mode", "gl")
        val = sing.local_scaled_energy(traj, (cyl.t0, cyl.x0), cyl.R, mode=mode)
        return [cyl.t0] + [float(c) for c in cyl.x0] + [cyl.R, mode, val]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, specs))
    return [one(s) for s in specs]


def _run_diagnostics(cfg: ExperimentConfig, grid: Grid, traj: Trajectory,
                     out: Path, threads: int):
    dcfg = cfg.diagnostics
    reports = out / "reports"

    sfio.write_json(reports / "energy.json",
                    diag.energy_report(traj, len(traj.snapshots) - 1).to_json())

    if "cylinders" in dcfg and dcfg["cylinders"]:
        rows = _cylinder_rows(traj, dcfg["cylinders"], threads)
        header = (["t0"] + [f"x0_{i}" for i in range(grid.d)]
                  + ["R", "mode", "scaled_energy"])
        sfio.write_csv(reports / "cylinders.csv", header, rows)

    if "monotonicity" in dcfg:
        m = dcfg["monotonicity"]
        z0 = (float(m["t0"]), np.asarray(m["x0"], dtype=float))
        out_reports = []
        for r1, r2 in m["pairs"]:
            rep = diag.monotonicity_report(
                traj, z0, float(r1), float(r2),
                mode=m.get("mode", "gradient"),
                rhs_form=m.get("rhs_form", "difference"))
            out_reports.append(rep.to_json())
        sfio.write_json(reports / "monotonicity.json",
                        {"t0": z0[0], "x0": [float(c) for c in z0[1]],
                         "pairs": out_reports})

    if "singular" in dcfg:
        scfg = cfg._singular_config(grid)
        rep = sing.detect_singular_set(traj, scfg)
        sfio.write_json(reports / "singular.json", rep.to_json())
        sfio.write_csv(reports / "boxcount.csv", ["delta", "count"],
                       [[d, n] for d, n in rep.box_table])

    if dcfg.get("one_sided"):
        rep = stereo.one_sided_monitor(traj)
        sfio.write_json(reports / "onesided.json", rep.to_json())
        rows = [[k, t, w, m] for k, t, w, m in
                zip(rep.steps, rep.times, rep.max_w_track, rep.min_last_track)]
        sfio.write_csv(reports / "wtrack.csv",
                       ["step", "t", "maxW", "min_last_component"], rows)

    if "small_energy" in dcfg:
        s = dcfg["small_energy"]
        z0 = (float(s["t0"]), np.asarray(s["x0"], dtype=float))
        ok, table = sing.small_energy_certificate(
            traj, z0, [float(r) for r in s["radii"]], float(s["eps0"]))
        sfio.write_json(reports / "certificate.json", {
            "t0": z0[0], "x0": [float(c) for c in z0[1]],
            "eps0": float(s["eps0"]), "all_pass": ok,
            "table": [{"r": r, "integral": v, "bound": b, "pass": p}
                      for r, v, b, p in table]})


def run_experiment(config_path, out_dir=None, threads: int = 1) -> int:
    config_path = Path(config_path)
    out = Path(out_dir) if out_dir else config_path.parent / (config_path.stem + "_out")
    try:
        cfg = ExperimentConfig.load(config_path)
    except ConfigError as e:
        _emit_error(out, e, 2)
        return 2
    try:
        grid = build_grid(cfg.domain, cfg.h)
        u0 = cfg.build_initial(grid)
        traj = _run_flow(cfg, grid, u0)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "config.json", "w") as f:
            json.dump(cfg.raw, f, indent=2, sort_keys=True)
            f.write("\n")
        _write_trajectory(out, traj)
        _run_diagnostics(cfg, grid, traj, out, threads)
        manifest = sfio.build_manifest(out, config_path)
        sfio.write_json(out / "manifest.json", manifest)
        return 0
    except SphereFlowError as e:
        _emit_error(out, e, 3)
        return 3


def _emit_error(out: Path, err: Exception, code: int):
    payload = {"error": type(err).__name__, "message": str(err), "exit_code": code}
    try:
        out.mkdir(parents=True, exist_ok=True)
        sfio.write_json(out / "error.json", payload)
    except OSError:
        pass
    print(json.dumps(payload), file=sys.stderr)


SWEEP_PARAMS = ("lambda", "h", "dt")


def sweep(config_path, param: str, values, out_dir=None, threads: int = 1) -> int:
    config_path = Path(config_path)
    out = Path(out_dir) if out_dir else config_path.parent / (config_path.stem + "_sweep")
    try:
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMS}")
        if not values:
            raise ConfigError("sweep needs a non-empty value list")
        base = ExperimentConfig.load(config_path)
        if base.mode == "projected" and param == "lambda":
            raise ConfigError("lambda sweep needs a penalized solver mode")
    except ConfigError as e:
        _emit_error(out, e, 2)
        return 2

    try:
        header = [param, "penalty_integral", "final_l2_to_projected",
                  "l2q_to_projected", "final_gl_energy", "final_dirichlet_energy"]
        probe = base.diagnostics.get("mbar_probe")
        if probe:
            header.append("mbar")
        rows = []
        for v in values:
            raw = json.loads(json.dumps(base.raw))
            if param == "lambda":
                raw["solver"]["lambda"] = float(v)
            elif param == "h":
                raw["h"] = float(v)
            else:
                raw["solver"]["dt"] = float(v)
            cfg = ExperimentConfig.from_dict(raw)
            grid = build_grid(cfg.domain, cfg.h)
            u0 = cfg.build_initial(grid)
            traj = _run_flow(cfg, grid, u0)
            proj = run_projected(u0, cfg.solver) if cfg.mode != "projected" else traj
            row = [float(v),
                   penalty_integral(traj),
                   l2_distance(traj.snapshots[-1], proj.snapshots[-1]),
                   trajectory_l2q_distance(traj, proj),
                   traj.records[-1].gl_energy,
                   traj.records[-1].dirichlet_energy]
            if probe:
                t0 = float(probe.get("t0", cfg.solver.T / 2.0))
                x0 = np.asarray(probe.get("x0", cfg.domain_center()), dtype=float)
                row.append(sing.local_scaled_energy(
                    traj, (t0, x0), float(probe["R"]),
                    mode=probe.get("mode", "dirichlet")))
            rows.append(row)
        out.mkdir(parents=True, exist_ok=True)
        sfio.write_csv(out / "sweep.csv", header, rows)
        sfio.write_json(out / "manifest.json", sfio.build_manifest(out, config_path))
        return 0
    except SphereFlowError as e:
        _emit_error(out, e, 3)
        return 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sphereflow",
                                     description="penalized sphere-flow experiments")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="run one experiment config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--threads", type=int, default=1)

    p_sweep = sub.add_parser("sweep", help="sweep one parameter of a config")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated numeric values")
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--threads", type=int, default=1)

    args = parser.parse_args(argv)
    if args.cmd == "run":
        return run_experiment(args.config, args.out, args.threads)
    vals = [float(x) for x in args.values.split(",") if x.strip() != ""]
    return sweep(args.config, args.param, vals, args.out, args.threads)


if __name__ == "__main__":
    sys.exit(main())
