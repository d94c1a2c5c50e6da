"""Synthetic data generation, tip error metrics, and the basis-comparison study.

The synthetic scenario drives a two-actuator arm (twist about x, bend about y)
over a pressure grid, renders tube-boundary observations through the fisheye
model, optionally corrupts them with pixel-space Gaussian noise, and packages
everything as a dataset. The comparison study fits every configuration with
each candidate basis and aggregates tip position/direction errors overall and
for the high-bend half of the workspace (region A).
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .calibration import ConstrainedTipOffset, pose_to_dict
from .camera import (OmniCameraModel, OutOfViewError, pixel_to_sphere,
                     sphere_to_pixel, synthesize_camera, tube_silhouette)
from .dataset import SCHEMA_VERSION, Dataset, basis_from_dict, camera_to_dict
from .estimator import FitOptions, FitResult, solve_shape
from .liegroup import Pose, exp_rotation
from .rodmodel import IntegrationPlan, IntegratorSpec
from .strainbasis import (BasisFamily, BasisSpec, basis_to_dict,
                          bend_twist_basis, param_count)

DEFAULT_ARM_LENGTH = 287.0
DEFAULT_ARM_RADIUS = 12.0


def default_base_pose() -> Pose:
    """Arm base offset from the camera, pointing roughly along the optical axis."""
    r = np.array([[0.0, 0.0, -1.0],
                  [0.0, 1.0, 0.0],
                  [1.0, 0.0, 0.0]])
    return Pose(r, np.array([0.0, -60.0, 80.0]))


def default_sensor_chain() -> tuple[Pose, ConstrainedTipOffset]:
    r = exp_rotation(np.array([0.15, -0.3, 0.5]))
    mag_to_cam = Pose(r, np.array([40.0, -25.0, 310.0]))
    return mag_to_cam, ConstrainedTipOffset(tx=6.0, tz=-4.0, theta_x=0.25)


@dataclass(frozen=True)
class PressureGrid:
    """Actuation pressures (psi) swept for the synthetic study."""

    bend_pressures: tuple[float, ...] = tuple(np.linspace(0.0, 25.0, 10))
    twist_pressures: tuple[float, ...] = tuple(np.linspace(0.0, 20.0, 10))

    def __post_init__(self):
        if any(p < 0 for p in self.bend_pressures + self.twist_pressures):
            raise ValueError("pressures must be non-negative")


@dataclass(frozen=True)
class SyntheticScenario:
    """Everything needed to render a deterministic synthetic dataset."""

    arm_length: float = DEFAULT_ARM_LENGTH
    arm_radius: float = DEFAULT_ARM_RADIUS
    camera: OmniCameraModel = field(
        default_factory=lambda: synthesize_camera(160.0, (1280, 960)))
    # camera that physically forms the pixels; when set, ``camera`` plays the
    # role of an imperfect calibration used to back-project the observations
    imaging_camera: OmniCameraModel | None = None
    true_basis: BasisSpec = field(
        default_factory=lambda: bend_twist_basis(
            BasisFamily.PIECEWISE, 2, DEFAULT_ARM_LENGTH))
    pressures: PressureGrid = field(default_factory=PressureGrid)
    marker_s: tuple[float, ...] = tuple(
        DEFAULT_ARM_LENGTH * k / 6.0 for k in range(1, 7))
    pixel_noise_sigma: float = 2.0
    base_pose: Pose = field(default_factory=default_base_pose)
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    seed: int = 0
    sensor_chain: tuple[Pose, ConstrainedTipOffset] = field(
        default_factory=default_sensor_chain)
    sensor_noise_mm: float = 0.0
    sensor_noise_deg: float = 0.0

    @property
    def bend_gain(self) -> float:
        """rad/mm of bending strain per psi; max pressure bends the arm 90 deg."""
        return (math.pi / 2.0) / (self.arm_length * 25.0)

    @property
    def twist_gain(self) -> float:
        """rad/mm of twisting strain per psi; max pressure twists 180 deg."""
        return math.pi / (self.arm_length * 20.0)


def coeffs_from_pressures(basis: BasisSpec, bend_nominal: float,
                          twist_nominal: float, rng: np.random.Generator
                          ) -> np.ndarray:
    """Map nominal strains onto basis coefficients.

    Piecewise segments receive independent +/-20% perturbations of the nominal
    value (so a multi-segment truth is genuinely richer than a constant one);
    polynomial terms above degree zero get +/-30%/degree nominal fractions.
    """
    nominal = {"twist-x": twist_nominal, "bend-y": bend_nominal, "bend-z": 0.0}
    axes = basis.active_axes
    blocks = []
    for j in range(basis.n_functions):
        for name in axes:
            base_val = nominal[name]
            if basis.family is BasisFamily.PIECEWISE and basis.segments > 1:
                blocks.append(base_val * (1.0 + rng.uniform(-0.2, 0.2)))
            elif basis.family is BasisFamily.POLYNOMIAL and j > 0:
                blocks.append(base_val * rng.uniform(-0.3, 0.3) / j)
            else:
                blocks.append(base_val)
    return np.asarray(blocks)


def _perturbed_pose(pose: Pose, rng: np.random.Generator,
                    sigma_mm: float, sigma_deg: float) -> Pose:
    if sigma_mm == 0.0 and sigma_deg == 0.0:
        return pose
    dp = rng.normal(0.0, sigma_mm, 3)
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = math.radians(rng.normal(0.0, sigma_deg))
    return Pose(pose.r @ exp_rotation(axis * angle), pose.p + dp)


def _observe(render_cam: OmniCameraModel, calib_cam: OmniCameraModel,
             pose: Pose, radius: float, sigma: float,
             rng: np.random.Generator) -> dict:
    """Render one cross-section to pixel and sphere coordinates, with noise.

    Pixels are formed by ``render_cam`` (the physical lens) and back-projected
    with ``calib_cam`` (the calibration a consumer of the data believes in);
    passing the same model for both gives an exact imaging pipeline.
    """
    sil = tube_silhouette(render_cam, pose, radius)
    if sil.degenerate:
        raise OutOfViewError("degenerate silhouette")
    out = {}
    for key, point in (("r", sil.right), ("l", sil.left)):
        px = sphere_to_pixel(render_cam, point)
        if sigma > 0.0:
            px = px + rng.normal(0.0, sigma, 2)
        out[f"pixel_{key}"] = [float(px[0]), float(px[1])]
        out[f"sphere_{key}"] = [float(v) for v in pixel_to_sphere(calib_cam, px)]
    return out


def miscalibrated_camera(cam: OmniCameraModel,
                         center_shift_px: tuple[float, float] = (1.5, -1.0),
                         focal_scale: float = 1.003) -> OmniCameraModel:
    """A copy of ``cam`` with a small center offset and focal-length error.

    Used as the pixel-forming camera of a scenario to model the systematic
    calibration inaccuracy of a real fisheye rig: observations are rendered
    through this lens but back-projected with the unperturbed calibration.
    """
    poly = list(cam.poly)
    poly[0] *= focal_scale
    return OmniCameraModel(
        affine=cam.affine,
        center=(cam.center[0] + center_shift_px[0],
                cam.center[1] + center_shift_px[1]),
        poly=tuple(poly),
        image_size=cam.image_size,
        fov=cam.fov,
    )


def generate_grid(scenario: SyntheticScenario) -> Dataset:
    """Render the full pressure grid to a dataset (deterministic per seed)."""
    mag_to_cam, tip_offset = scenario.sensor_chain
    tip_offset_pose = tip_offset.pose()
    marker_s = np.asarray(scenario.marker_s, dtype=float)
    grid_s = np.concatenate([marker_s, [scenario.arm_length]]) \
        if marker_s[-1] < scenario.arm_length else marker_s
    plan = IntegrationPlan(scenario.true_basis, grid_s, scenario.integrator)
    x0_mat = scenario.base_pose.matrix()
    render_cam = scenario.imaging_camera or scenario.camera

    configs, excluded = [], []
    for i, pb in enumerate(scenario.pressures.bend_pressures):
        for j, pt in enumerate(scenario.pressures.twist_pressures):
            config_id = f"cfg_{i:02d}_{j:02d}"
            rng_coeff = np.random.default_rng([scenario.seed, i, j, 0])
            rng_noise = np.random.default_rng([scenario.seed, i, j, 1])
            coeffs = coeffs_from_pressures(
                scenario.true_basis, scenario.bend_gain * pb,
                scenario.twist_gain * pt, rng_coeff)
            mats = plan.transforms(coeffs, x0_mat)
            tip = Pose.from_matrix(mats[-1])
            try:
                observations = []
                for s, mat in zip(marker_s, mats[:len(marker_s)]):
                    obs = _observe(render_cam, scenario.camera,
                                   Pose.from_matrix(mat), scenario.arm_radius,
                                   scenario.pixel_noise_sigma, rng_noise)
                    obs["s"] = float(s)
                    observations.append(obs)
                base_obs = _observe(render_cam, scenario.camera,
                                    scenario.base_pose, scenario.arm_radius,
                                    scenario.pixel_noise_sigma, rng_noise)
                base_obs["s"] = 0.0
            except (OutOfViewError, ValueError) as exc:
                excluded.append({"config_id": config_id, "reason": str(exc)})
                continue
            sensor_pose = mag_to_cam.inverse().compose(tip).compose(
                tip_offset_pose.inverse())
            sensor_pose = _perturbed_pose(sensor_pose, rng_noise,
                                          scenario.sensor_noise_mm,
                                          scenario.sensor_noise_deg)
            configs.append({
                "config_id": config_id,
                "bend_psi": float(pb),
                "twist_psi": float(pt),
                "true_coeffs": [float(a) for a in coeffs],
                "true_tip": pose_to_dict(tip),
                "observations": observations,
                "base_observation": base_obs,
                "sensor_pose": pose_to_dict(sensor_pose),
            })

    raw = {
        "schema_version": SCHEMA_VERSION,
        "scenario": {
            "arm_length_mm": scenario.arm_length,
            "arm_radius_mm": scenario.arm_radius,
            "base_pose": pose_to_dict(scenario.base_pose),
            "camera": camera_to_dict(scenario.camera),
            "marker_s": [float(s) for s in marker_s],
            "true_basis": basis_to_dict(scenario.true_basis),
            "integrator": {"method": scenario.integrator.method,
                           "steps": scenario.integrator.steps},
            "pixel_noise_sigma": scenario.pixel_noise_sigma,
            "bend_pressures": [float(p) for p in scenario.pressures.bend_pressures],
            "twist_pressures": [float(p) for p in scenario.pressures.twist_pressures],
            "seed": scenario.seed,
            "sensor_chain": {
                "mag_to_cam": pose_to_dict(mag_to_cam),
                "tip_offset": {"tx": tip_offset.tx, "tz": tip_offset.tz,
                               "theta_x": tip_offset.theta_x},
            },
        },
        "configs": configs,
        "excluded": excluded,
    }
    return Dataset(raw)


def scenario_to_dict(sc: SyntheticScenario) -> dict:
    mag_to_cam, tip_offset = sc.sensor_chain
    out = {
        "arm_length_mm": sc.arm_length,
        "arm_radius_mm": sc.arm_radius,
        "camera": camera_to_dict(sc.camera),
        "true_basis": basis_to_dict(sc.true_basis),
        "marker_s": [float(s) for s in sc.marker_s],
        "pixel_noise_sigma": sc.pixel_noise_sigma,
        "base_pose": pose_to_dict(sc.base_pose),
        "bend_pressures": [float(p) for p in sc.pressures.bend_pressures],
        "twist_pressures": [float(p) for p in sc.pressures.twist_pressures],
        "integrator": {"method": sc.integrator.method, "steps": sc.integrator.steps},
        "seed": sc.seed,
        "sensor_chain": {
            "mag_to_cam": pose_to_dict(mag_to_cam),
            "tip_offset": {"tx": tip_offset.tx, "tz": tip_offset.tz,
                           "theta_x": tip_offset.theta_x},
        },
        "sensor_noise_mm": sc.sensor_noise_mm,
        "sensor_noise_deg": sc.sensor_noise_deg,
    }
    if sc.imaging_camera is not None:
        out["imaging_camera"] = camera_to_dict(sc.imaging_camera)
    return out


def scenario_from_dict(d: dict) -> SyntheticScenario:
    """Build a scenario from a JSON dict; missing keys fall back to defaults."""
    from .calibration import pose_from_dict
    from .dataset import camera_from_dict

    default = SyntheticScenario()
    kwargs = {}
    if "arm_length_mm" in d:
        kwargs["arm_length"] = float(d["arm_length_mm"])
    if "arm_radius_mm" in d:
        kwargs["arm_radius"] = float(d["arm_radius_mm"])
    if "camera" in d:
        cam = d["camera"]
        if "synthesize" in cam:
            kwargs["camera"] = synthesize_camera(
                float(cam["synthesize"]["fov"]),
                tuple(cam["synthesize"]["size"]))
        else:
            kwargs["camera"] = camera_from_dict(cam)
    if "imaging_camera" in d:
        cam = d["imaging_camera"]
        if "miscalibrate" in cam:
            base = kwargs.get("camera", default.camera)
            spec = cam["miscalibrate"]
            kwargs["imaging_camera"] = miscalibrated_camera(
                base,
                center_shift_px=tuple(spec.get("center_shift_px", (1.5, -1.0))),
                focal_scale=float(spec.get("focal_scale", 1.003)))
        else:
            kwargs["imaging_camera"] = camera_from_dict(cam)
    length = kwargs.get("arm_length", default.arm_length)
    if "true_basis" in d:
        kwargs["true_basis"] = basis_from_dict(d["true_basis"])
    elif length != default.arm_length:
        kwargs["true_basis"] = bend_twist_basis(BasisFamily.PIECEWISE, 2, length)
    if "marker_s" in d:
        kwargs["marker_s"] = tuple(float(s) for s in d["marker_s"])
    elif length != default.arm_length:
        kwargs["marker_s"] = tuple(length * k / 6.0 for k in range(1, 7))
    if "pixel_noise_sigma" in d:
        kwargs["pixel_noise_sigma"] = float(d["pixel_noise_sigma"])
    if "base_pose" in d:
        kwargs["base_pose"] = pose_from_dict(d["base_pose"])
    if "bend_pressures" in d or "twist_pressures" in d:
        kwargs["pressures"] = PressureGrid(
            bend_pressures=tuple(d.get("bend_pressures",
                                       default.pressures.bend_pressures)),
            twist_pressures=tuple(d.get("twist_pressures",
                                        default.pressures.twist_pressures)))
    if "integrator" in d:
        kwargs["integrator"] = IntegratorSpec(
            method=d["integrator"].get("method", "exp1"),
            steps=int(d["integrator"].get("steps", 100)))
    if "seed" in d:
        kwargs["seed"] = int(d["seed"])
    if "sensor_chain" in d:
        off = d["sensor_chain"]["tip_offset"]
        kwargs["sensor_chain"] = (
            pose_from_dict(d["sensor_chain"]["mag_to_cam"]),
            ConstrainedTipOffset(float(off["tx"]), float(off["tz"]),
                                 float(off["theta_x"])))
    if "sensor_noise_mm" in d:
        kwargs["sensor_noise_mm"] = float(d["sensor_noise_mm"])
    if "sensor_noise_deg" in d:
        kwargs["sensor_noise_deg"] = float(d["sensor_noise_deg"])
    return replace(default, **kwargs)


def tip_errors(estimated_tip: Pose, true_tip: Pose) -> tuple[float, float]:
    """(position error mm, tangent direction error degrees)."""
    e1 = float(np.linalg.norm(estimated_tip.p - true_tip.p))
    ta, tb = estimated_tip.tangent(), true_tip.tangent()
    cosang = float(np.dot(ta, tb) / (np.linalg.norm(ta) * np.linalg.norm(tb)))
    return e1, math.degrees(math.acos(max(-1.0, min(1.0, cosang))))


@dataclass(frozen=True)
class WorkspaceSplit:
    """Median split of the workspace by tip deflection from the base tangent."""

    base_pose: Pose
    median_deflection: float


def tip_deflection(tip: Pose, base_pose: Pose) -> float:
    """Lateral distance of the tip from the straight-arm axis (mm)."""
    d = tip.p - base_pose.p
    t0 = base_pose.tangent()
    return float(np.linalg.norm(d - (d @ t0) * t0))


def workspace_split(true_tips: list[Pose], base_pose: Pose) -> WorkspaceSplit:
    defl = sorted(tip_deflection(t, base_pose) for t in true_tips)
    return WorkspaceSplit(base_pose, float(np.median(defl)))


def region_of(true_tip: Pose, workspace: WorkspaceSplit) -> str:
    """"A" for the high-bend half of the workspace, "B" otherwise."""
    return "A" if tip_deflection(true_tip, workspace.base_pose) > \
        workspace.median_deflection else "B"


@dataclass
class ErrorRecord:
    config_id: str
    tip_pos_err_mm: float
    tip_dir_err_deg: float
    region: str
    converged: bool


@dataclass
class BasisRow:
    """One comparison row: basis identity plus error statistics."""

    order: int
    segments: int
    params: int
    records: list[ErrorRecord]
    failures: list[str]

    def _stats(self, values: np.ndarray) -> dict:
        if values.size == 0:
            return {"mean": float("nan"), "std": float("nan"), "max": float("nan")}
        return {"mean": float(np.mean(values)), "std": float(np.std(values)),
                "max": float(np.max(values))}

    def statistics(self) -> dict:
        ok = [r for r in self.records if r.converged]
        out = {}
        for scope, rows in (("overall", ok),
                            ("region_a", [r for r in ok if r.region == "A"])):
            e1 = np.array([r.tip_pos_err_mm for r in rows])
            e2 = np.array([r.tip_dir_err_deg for r in rows])
            out[scope] = {"e1": self._stats(e1), "e2": self._stats(e2),
                          "count": len(rows)}
        return out


@dataclass
class ComparisonReport:
    rows: list[BasisRow]

    def to_dict(self) -> dict:
        return {"rows": [{
            "order": row.order, "segments": row.segments, "params": row.params,
            "statistics": row.statistics(),
            "failures": row.failures,
            "records": [{
                "config_id": r.config_id, "tip_pos_err_mm": r.tip_pos_err_mm,
                "tip_dir_err_deg": r.tip_dir_err_deg, "region": r.region,
                "converged": r.converged} for r in row.records],
        } for row in self.rows]}


def default_comparison_bases(arm_length: float) -> list[BasisSpec]:
    """The five-row basis catalog: constant, 2-segment, and polynomials 1-3."""
    return [
        bend_twist_basis(BasisFamily.CONSTANT, 0, arm_length),
        bend_twist_basis(BasisFamily.PIECEWISE, 2, arm_length),
        bend_twist_basis(BasisFamily.POLYNOMIAL, 1, arm_length),
        bend_twist_basis(BasisFamily.POLYNOMIAL, 2, arm_length),
        bend_twist_basis(BasisFamily.POLYNOMIAL, 3, arm_length),
    ]


def _basis_order_segments(basis: BasisSpec) -> tuple[int, int]:
    if basis.family is BasisFamily.PIECEWISE:
        return 0, basis.segments
    if basis.family is BasisFamily.POLYNOMIAL:
        return basis.order, 1
    return 0, 1


def fit_config(ds: Dataset, record, basis: BasisSpec,
               options: FitOptions) -> tuple[FitResult, Pose]:
    """Fit one configuration and return the result plus the estimated tip pose."""
    obs = ds.observation_set(record)
    fit = solve_shape(obs, basis, options=options)
    # evaluate the tip on the same knot layout the dataset's ground truth
    # used (markers plus the tip), so discretization error cancels exactly
    marker_s = np.asarray(ds.marker_s, dtype=float)
    grid_s = np.concatenate([marker_s, [basis.arm_length]]) \
        if marker_s[-1] < basis.arm_length else marker_s
    plan = IntegrationPlan(basis, grid_s, options.integrator)
    tip = Pose.from_matrix(plan.transforms(fit.coeffs, ds.base_pose.matrix())[-1])
    return fit, tip


def estimate_dataset(ds: Dataset, basis: BasisSpec,
                     options: FitOptions | None = None, jobs: int = 1
                     ) -> list[tuple[str, FitResult, Pose]]:
    """Fit every configuration; results are sorted by config_id regardless of jobs."""
    options = options or FitOptions(integrator=ds.integrator)
    records = sorted(ds.configs, key=lambda r: r.config_id)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            fits = list(pool.map(lambda r: fit_config(ds, r, basis, options),
                                 records))
    else:
        fits = [fit_config(ds, r, basis, options) for r in records]
    return [(r.config_id, fit, tip) for r, (fit, tip) in zip(records, fits)]


def compare_bases(ds: Dataset, basis_list: list[BasisSpec] | None = None,
                  options: FitOptions | None = None, jobs: int = 1
                  ) -> ComparisonReport:
    """Fit every configuration with every basis and tabulate tip errors."""
    if not ds.has_ground_truth():
        raise ValueError("basis comparison requires ground-truth tip poses")
    basis_list = basis_list or default_comparison_bases(ds.arm_length)
    records = sorted(ds.configs, key=lambda r: r.config_id)
    split = workspace_split([r.true_tip for r in records], ds.base_pose)
    rows = []
    for basis in basis_list:
        options_b = options or FitOptions(integrator=ds.integrator)
        order, segments = _basis_order_segments(basis)
        row = BasisRow(order=order, segments=segments,
                       params=param_count(basis), records=[], failures=[])
        results = estimate_dataset(ds, basis, options_b, jobs=jobs)
        for (config_id, fit, tip), rec in zip(results, records):
            e1, e2 = tip_errors(tip, rec.true_tip)
            row.records.append(ErrorRecord(
                config_id=config_id, tip_pos_err_mm=e1, tip_dir_err_deg=e2,
                region=region_of(rec.true_tip, split), converged=fit.converged))
            if not fit.converged:
                row.failures.append(config_id)
        rows.append(row)
    return ComparisonReport(rows)


def report_to_csv(report: ComparisonReport, path) -> None:
    """Summary CSV: one row per basis, mean+/-std and max columns per region."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "order", "segments", "params",
            "e1_mean_std_mm", "e1_max_mm", "e2_mean_std_deg", "e2_max_deg",
            "e1_mean_std_mm_region_a", "e1_max_mm_region_a",
            "e2_mean_std_deg_region_a", "e2_max_deg_region_a"])
        for row in report.rows:
            st = row.statistics()
            cells = [row.order, row.segments, row.params]
            for scope in ("overall", "region_a"):
                for metric in ("e1", "e2"):
                    m = st[scope][metric]
                    cells.append(f"{m['mean']:.3f}+/-{m['std']:.3f}")
                    cells.append(f"{m['max']:.3f}")
            writer.writerow(cells)


def records_to_csv(report: ComparisonReport, path) -> None:
    """Per-configuration error scatter CSV for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["order", "segments", "config_id", "tip_pos_err_mm",
                         "tip_dir_err_deg", "region", "converged"])
        for row in report.rows:
            for r in row.records:
                writer.writerow([row.order, row.segments, r.config_id,
                                 repr(r.tip_pos_err_mm), repr(r.tip_dir_err_deg),
                                 r.region, int(r.converged)])
