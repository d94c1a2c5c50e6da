"""Command-line front end: simulate, estimate, calibrate, compare.

Exit codes: 0 success, 1 I/O errors, 2 schema errors, 3 when more than half
of the configurations fail to converge, 4 for rank-deficient sensor
calibration problems. All commands are deterministic given their inputs and
seed; repeated runs produce byte-identical output files.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import calibration, experiments
from .calibration import (BaseCalibProblem,
                          RankDeficientError, SensorCalibProblem,
                          pose_from_dict, pose_to_dict)
from .camera import BoundaryObservation
from .dataset import Dataset, SchemaError, dumps_canonical, read_dataset, write_dataset
from .estimator import FitOptions
from .liegroup import Pose, exp_rotation
from .rodmodel import IntegratorSpec
from .strainbasis import BasisFamily, basis_to_dict, bend_twist_basis

EXIT_IO = 1
EXIT_SCHEMA = 2
EXIT_CONVERGENCE = 3
EXIT_RANK = 4


def _fail(code: int, message: str) -> int:
    print(message, file=sys.stderr)
    return code


def _write_text(path: str, text: str) -> None:
    with open(path, "w") as fh:
        fh.write(text)
        if not text.endswith("\n"):
            fh.write("\n")


def _basis_from_flags(args, arm_length: float):
    family = {"constant": BasisFamily.CONSTANT,
              "piecewise": BasisFamily.PIECEWISE,
              "poly": BasisFamily.POLYNOMIAL}[args.basis]
    n = args.segments if family is BasisFamily.PIECEWISE else args.order
    return bend_twist_basis(family, n, arm_length)


def _integrator_from_flags(args, default: IntegratorSpec) -> IntegratorSpec:
    method = args.integrator or default.method
    steps = args.steps or default.steps
    return IntegratorSpec(method=method, steps=steps)


def cmd_simulate(args) -> int:
    scenario_dict = {}
    if args.scenario:
        try:
            with open(args.scenario) as fh:
                scenario_dict = json.load(fh)
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot read scenario: {exc}")
        except json.JSONDecodeError as exc:
            return _fail(EXIT_SCHEMA, f"malformed scenario JSON: {exc}")
    if args.seed is not None:
        scenario_dict["seed"] = args.seed
    if args.noise_px is not None:
        scenario_dict["pixel_noise_sigma"] = args.noise_px
    try:
        scenario = experiments.scenario_from_dict(scenario_dict)
    except (KeyError, ValueError) as exc:
        return _fail(EXIT_SCHEMA, f"invalid scenario: {exc}")
    ds = experiments.generate_grid(scenario)
    try:
        write_dataset(ds, args.out)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write dataset: {exc}")
    summary = {"configs": len(ds.configs),
               "excluded": [e["config_id"] for e in ds.excluded]}
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        print(f"wrote {summary['configs']} configurations to {args.out}"
              f" ({len(summary['excluded'])} excluded)")
        for cid in summary["excluded"]:
            print(f"excluded: {cid}", file=sys.stderr)
    return 0


def cmd_estimate(args) -> int:
    try:
        ds = read_dataset(args.dataset)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read dataset: {exc}")
    except SchemaError as exc:
        return _fail(EXIT_SCHEMA, str(exc))
    basis = _basis_from_flags(args, ds.arm_length)
    options = FitOptions(integrator=_integrator_from_flags(args, ds.integrator))
    results = experiments.estimate_dataset(ds, basis, options, jobs=args.jobs)
    has_truth = ds.has_ground_truth()
    records = {r.config_id: r for r in ds.configs}
    out_rows, errors = [], []
    n_failed = 0
    for config_id, fit, tip in results:
        row = {"config_id": config_id, "fit": fit.to_dict(),
               "tip_pose": pose_to_dict(tip)}
        if has_truth:
            e1, e2 = experiments.tip_errors(tip, records[config_id].true_tip)
            row["tip_pos_err_mm"] = e1
            row["tip_dir_err_deg"] = e2
            errors.append((e1, e2))
        if not fit.converged:
            n_failed += 1
        out_rows.append(row)
    summary = {"configs": len(out_rows), "non_converged": n_failed}
    if errors:
        summary["mean_tip_pos_err_mm"] = float(np.mean([e[0] for e in errors]))
        summary["mean_tip_dir_err_deg"] = float(np.mean([e[1] for e in errors]))
    doc = {"basis": basis_to_dict(basis), "results": out_rows, "summary": summary}
    try:
        _write_text(args.out, dumps_canonical(doc))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write results: {exc}")
    if args.json:
        print(json.dumps(summary, sort_keys=True))
    else:
        line = f"fitted {summary['configs']} configs, {n_failed} non-converged"
        if errors:
            line += (f", mean tip position error {summary['mean_tip_pos_err_mm']:.4f} mm"
                     f", mean tip direction error {summary['mean_tip_dir_err_deg']:.4f} deg")
        print(line)
    if out_rows and n_failed > len(out_rows) / 2:
        return _fail(EXIT_CONVERGENCE, "more than half of the fits did not converge")
    return 0


def _load_init_pose(path: str | None) -> Pose | None:
    if not path:
        return None
    with open(path) as fh:
        return pose_from_dict(json.load(fh))


def cmd_calibrate(args) -> int:
    try:
        ds = read_dataset(args.dataset)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read dataset: {exc}")
    except SchemaError as exc:
        return _fail(EXIT_SCHEMA, str(exc))

    if args.mode == "base":
        obs = []
        for rec in ds.configs:
            b = rec.base_observation
            if b is None:
                return _fail(EXIT_SCHEMA, "dataset has no base_observation blocks")
            obs.append(BoundaryObservation(0.0, np.asarray(b["sphere_r"]),
                                           np.asarray(b["sphere_l"])))
        problem = BaseCalibProblem(tuple(obs), ds.arm_radius)
        try:
            init = _load_init_pose(args.init) or calibration_initial_base(problem)
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot read init pose: {exc}")
        pose, lm, info = calibration.estimate_base_pose(problem, init)
        doc = {"mode": "base", "pose": pose_to_dict(pose),
               "final_cost": lm.cost, "iterations": lm.iterations,
               "converged": lm.converged,
               "observability": {
                   "weak_directions": info.weak_directions,
                   "depth_cost_delta": info.depth_cost_delta,
                   "low_observability": info.low_observability}}
        try:
            _write_text(args.out, dumps_canonical(doc))
        except OSError as exc:
            return _fail(EXIT_IO, f"cannot write calibration: {exc}")
        print(json.dumps({"final_cost": lm.cost,
                          "low_observability": info.low_observability},
                         sort_keys=True) if args.json else
              f"base calibration cost {lm.cost:.6e}"
              f" (low observability: {info.low_observability})")
        return 0

    # sensor mode
    tip_obs, sensor_poses = [], []
    length = ds.arm_length
    for rec in ds.configs:
        if rec.sensor_pose is None:
            return _fail(EXIT_SCHEMA, "dataset has no sensor_pose blocks")
        tip = next((o for o in rec.observations if abs(o["s"] - length) < 1e-6), None)
        if tip is None:
            return _fail(EXIT_SCHEMA, "dataset has no tip (s = L) observations")
        tip_obs.append(BoundaryObservation(length, np.asarray(tip["sphere_r"]),
                                           np.asarray(tip["sphere_l"])))
        sensor_poses.append(rec.sensor_pose)
    problem = SensorCalibProblem(tuple(tip_obs), tuple(sensor_poses), ds.arm_radius)
    chain = ds.sensor_chain
    init_pose = chain[0] if chain else None
    init_offset = chain[1] if chain else None
    try:
        x_mc, offset, lm = calibration.estimate_sensor_transforms(
            problem, init_pose, init_offset)
    except RankDeficientError as exc:
        return _fail(EXIT_RANK, f"rank-deficient sensor problem: {exc}")
    # restart-consistency check: re-solve from perturbed inits, compare the
    # observable quantities (final cost and composed tip poses)
    rng = np.random.default_rng(args.seed or 0)
    spread_cost, spread_tip = 0.0, 0.0
    base_tips = [calibration.sensor_to_tip(x_mc, sp, offset).p
                 for sp in sensor_poses]
    for _ in range(3):
        d = rng.normal(0.0, 1.0, 6)
        p0 = (init_pose or Pose.identity())
        pert = Pose(p0.r @ exp_rotation(d[:3] * math.radians(2.0) /
                                        max(np.linalg.norm(d[:3]), 1e-12)),
                    p0.p + d[3:] * 3.0)
        try:
            x2, off2, lm2 = calibration.estimate_sensor_transforms(
                problem, pert, init_offset)
        except RankDeficientError:
            continue
        spread_cost = max(spread_cost, abs(lm2.cost - lm.cost))
        tips2 = [calibration.sensor_to_tip(x2, sp, off2).p for sp in sensor_poses]
        spread_tip = max(spread_tip,
                         max(float(np.linalg.norm(a - b))
                             for a, b in zip(base_tips, tips2)))
    doc = {"mode": "sensor", "mag_to_cam": pose_to_dict(x_mc),
           "tip_offset": {"tx": offset.tx, "tz": offset.tz,
                          "theta_x": offset.theta_x},
           "final_cost": lm.cost, "iterations": lm.iterations,
           "converged": lm.converged,
           "restart_check": {"cost_spread": spread_cost,
                             "tip_position_spread_mm": spread_tip}}
    try:
        _write_text(args.out, dumps_canonical(doc))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write calibration: {exc}")
    print(json.dumps({"final_cost": lm.cost, "cost_spread": spread_cost},
                     sort_keys=True) if args.json else
          f"sensor calibration cost {lm.cost:.6e}"
          f" (restart cost spread {spread_cost:.3e},"
          f" tip spread {spread_tip:.3e} mm)")
    return 0


def calibration_initial_base(problem: BaseCalibProblem) -> Pose:
    """Analytic first guess from the mean base observation geometry."""
    from .liegroup import orthonormalize

    y_r = np.mean([o.y_r for o in problem.base_observations], axis=0)
    y_l = np.mean([o.y_l for o in problem.base_observations], axis=0)
    center = y_r + y_l
    p_hat = center / np.linalg.norm(center)
    sep = math.acos(max(-1.0, min(1.0, float(np.dot(
        y_r / np.linalg.norm(y_r), y_l / np.linalg.norm(y_l))))))
    depth = problem.radius / max(math.sin(sep / 2.0), 1e-6)
    n_hat = y_l - y_r
    n_hat = n_hat / np.linalg.norm(n_hat)
    n_hat = n_hat - (n_hat @ p_hat) * p_hat
    n_hat /= np.linalg.norm(n_hat)
    t = np.cross(p_hat, n_hat)
    r = orthonormalize(np.column_stack([t, n_hat, np.cross(t, n_hat)]))
    return Pose(r, depth * p_hat)


def _parse_bases(spec_text: str, arm_length: float):
    out = []
    for token in spec_text.split(","):
        token = token.strip()
        if token == "constant":
            out.append(bend_twist_basis(BasisFamily.CONSTANT, 0, arm_length))
        elif token.startswith("piecewise"):
            n = int(token.split(":")[1]) if ":" in token else 2
            out.append(bend_twist_basis(BasisFamily.PIECEWISE, n, arm_length))
        elif token.startswith("poly"):
            n = int(token.split(":")[1]) if ":" in token else 1
            out.append(bend_twist_basis(BasisFamily.POLYNOMIAL, n, arm_length))
        else:
            raise ValueError(f"unknown basis token {token!r}")
    return out


def cmd_compare(args) -> int:
    try:
        ds = read_dataset(args.dataset)
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot read dataset: {exc}")
    except SchemaError as exc:
        return _fail(EXIT_SCHEMA, str(exc))
    if not ds.has_ground_truth():
        return _fail(EXIT_SCHEMA, "comparison requires ground-truth tip poses")
    try:
        bases = (_parse_bases(args.bases, ds.arm_length) if args.bases
                 else experiments.default_comparison_bases(ds.arm_length))
    except ValueError as exc:
        return _fail(EXIT_SCHEMA, str(exc))
    options = FitOptions(integrator=_integrator_from_flags(args, ds.integrator))
    report = experiments.compare_bases(ds, bases, options, jobs=args.jobs)
    try:
        experiments.report_to_csv(report, args.out + ".csv")
        experiments.records_to_csv(report, args.out + "_records.csv")
        _write_text(args.out + ".json", dumps_canonical(report.to_dict()))
    except OSError as exc:
        return _fail(EXIT_IO, f"cannot write report: {exc}")
    if args.json:
        print(json.dumps({"rows": len(report.rows)}, sort_keys=True))
    else:
        for row in report.rows:
            st = row.statistics()["overall"]
            print(f"order {row.order} segments {row.segments}"
                  f" params {row.params}:"
                  f" tip position {st['e1']['mean']:.3f}+/-{st['e1']['std']:.3f} mm,"
                  f" tip direction {st['e2']['mean']:.3f}+/-{st['e2']['std']:.3f} deg")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scashape",
        description="Monocular fisheye shape estimation for soft continuum arms")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="render a synthetic dataset")
    sim.add_argument("--scenario", help="scenario JSON file (defaults built in)")
    sim.add_argument("--out", required=True, help="output dataset path")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--noise-px", type=float, default=None)
    sim.add_argument("--json", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", help="fit shapes for every configuration")
    est.add_argument("--dataset", required=True)
    est.add_argument("--basis", choices=["constant", "piecewise", "poly"],
                     default="piecewise")
    est.add_argument("--segments", type=int, default=2)
    est.add_argument("--order", type=int, default=1)
    est.add_argument("--integrator", choices=["exp1", "cg3"], default=None)
    est.add_argument("--steps", type=int, default=None)
    est.add_argument("--jobs", type=int, default=1)
    est.add_argument("--out", required=True)
    est.add_argument("--json", action="store_true")
    est.set_defaults(func=cmd_estimate)

    cal = sub.add_parser("calibrate", help="estimate base pose or sensor chain")
    cal.add_argument("--dataset", required=True)
    cal.add_argument("--mode", choices=["base", "sensor"], required=True)
    cal.add_argument("--init", help="JSON file with an initial pose")
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--out", required=True)
    cal.add_argument("--json", action="store_true")
    cal.set_defaults(func=cmd_calibrate)

    cmp_ = sub.add_parser("compare", help="basis comparison study")
    cmp_.add_argument("--dataset", required=True)
    cmp_.add_argument("--bases",
                      help="comma list, e.g. constant,piecewise:2,poly:3")
    cmp_.add_argument("--integrator", choices=["exp1", "cg3"], default=None)
    cmp_.add_argument("--steps", type=int, default=None)
    cmp_.add_argument("--jobs", type=int, default=1)
    cmp_.add_argument("--out", required=True,
                      help="output prefix (.csv/.json/_records.csv appended)")
    cmp_.add_argument("--json", action="store_true")
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
