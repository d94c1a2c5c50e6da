"""Estimation of the unknown frames: the arm's base pose in the camera frame
and the magnetic-tracker chain (source-to-camera transform plus the
constrained sensor-to-tip offset).

Both problems reuse the reprojection residual structure and the
Levenberg-Marquardt solver from :mod:`scashape.estimator`. SE(3) unknowns are
optimized through a 6-dimensional local chart (translation increment plus
rotation vector) that is composed onto the running estimate and re-centered
after every accepted step.

Observability note: a tube silhouette is invariant to rotation of a
cross-section about its own tangent, and to tilting the tangent within the
plane spanned by the tangent and the viewing ray. Base-pose estimation
therefore has two rotational null directions, which are detected and reported
rather than hidden; the sensor-to-tip roll angle theta_x is likewise invisible
to the cost and simply stays at its initial value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import BoundaryObservation, tube_silhouette
from .estimator import LMResult, finite_difference_jacobian, levenberg_marquardt
from .liegroup import Pose, StrainTwist, exp_pose, exp_rotation


class RankDeficientError(ValueError):
    """The calibration problem has no unique minimizer (e.g. static sensor)."""


@dataclass(frozen=True)
class BaseCalibProblem:
    """Base boundary observations (s = 0) across images, plus the arm radius."""

    base_observations: tuple[BoundaryObservation, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "base_observations", tuple(self.base_observations))
        if not self.base_observations:
            raise ValueError("at least one base observation is required")
        if self.radius <= 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class SensorCalibProblem:
    """Tip boundary observations paired with magnetic sensor poses per image."""

    tip_observations: tuple[BoundaryObservation, ...]
    sensor_poses: tuple[Pose, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "tip_observations", tuple(self.tip_observations))
        object.__setattr__(self, "sensor_poses", tuple(self.sensor_poses))
        if len(self.tip_observations) != len(self.sensor_poses):
            raise ValueError("observation and sensor pose counts must match")
        if not self.tip_observations:
            raise ValueError("at least one image is required")


@dataclass(frozen=True)
class ConstrainedTipOffset:
    """Sensor-to-tip offset restricted to x/z translation and rotation about x."""

    tx: float
    tz: float
    theta_x: float

    def pose(self) -> Pose:
        return Pose(exp_rotation(np.array([self.theta_x, 0.0, 0.0])),
                    np.array([self.tx, 0.0, self.tz]))


@dataclass
class Observability:
    """Diagnostics of weakly constrained directions at the solution."""

    singular_values: np.ndarray
    weak_directions: int
    depth_cost_delta: float | None = None
    low_observability: bool = False


def _chart_pose(base: Pose, delta: np.ndarray) -> Pose:
    """Right-composed local chart: base * exp([rot_vec, trans])."""
    return base.compose(exp_pose(StrainTwist(delta[:3], delta[3:]), 1.0))


def _silhouette_residual(pose: Pose, obs: BoundaryObservation, radius: float) -> np.ndarray:
    sil = tube_silhouette(None, pose, radius)
    if sil.degenerate:
        raise RuntimeError("degenerate silhouette during calibration")
    return np.concatenate([obs.y_r - sil.right, obs.y_l - sil.left])


def _observability(jac: np.ndarray, rel_tol: float = 1e-6) -> Observability:
    sv = np.linalg.svd(jac, compute_uv=False)
    weak = int(np.sum(sv < rel_tol * sv[0]))
    return Observability(singular_values=sv, weak_directions=weak)


def estimate_base_pose(problem: BaseCalibProblem, init: Pose,
                       **solver_kwargs) -> tuple[Pose, LMResult, Observability]:
    """Minimize the base reprojection error over SE(3), all images jointly.

    Unit weights; the SE(3) unknown uses a rotation-vector chart re-centered
    on every accepted step. Returns the estimate, the solver trace, and
    observability diagnostics (a single image leaves depth along the viewing
    ray and two rotation directions weakly constrained).
    """
    state = {"pose": init}

    def fun(delta):
        pose = _chart_pose(state["pose"], delta)
        return np.concatenate([
            _silhouette_residual(pose, o, problem.radius)
            for o in problem.base_observations])

    def recenter(delta):
        state["pose"] = _chart_pose(state["pose"], delta)
        return np.zeros(6)

    lm = levenberg_marquardt(fun, np.zeros(6), recenter=recenter, **solver_kwargs)
    pose = _chart_pose(state["pose"], lm.x)
    jac = finite_difference_jacobian(
        lambda d: np.concatenate([
            _silhouette_residual(_chart_pose(pose, d), o, problem.radius)
            for o in problem.base_observations]),
        np.zeros(6))
    info = _observability(jac)
    # probe: shift the base 0.1 mm along its viewing ray and compare cost
    ray = pose.p / np.linalg.norm(pose.p)
    probe = Pose(pose.r, pose.p + 0.1 * ray)
    cost_probe = float(sum(
        _silhouette_residual(probe, o, problem.radius) @
        _silhouette_residual(probe, o, problem.radius)
        for o in problem.base_observations))
    info.depth_cost_delta = abs(cost_probe - lm.cost)
    info.low_observability = info.weak_directions > 0 or info.depth_cost_delta < 1e-8
    return pose, lm, info


def sensor_to_tip(x_mag_cam: Pose, x_sen_mag: Pose, x_tip_sen: Pose | ConstrainedTipOffset) -> Pose:
    """Tip pose in the camera frame from a magnetic sensor reading."""
    tip = x_tip_sen.pose() if isinstance(x_tip_sen, ConstrainedTipOffset) else x_tip_sen
    return x_mag_cam.compose(x_sen_mag).compose(tip)


def estimate_sensor_transforms(problem: SensorCalibProblem,
                               init_mag_cam: Pose | None = None,
                               init_offset: ConstrainedTipOffset | None = None,
                               **solver_kwargs
                               ) -> tuple[Pose, ConstrainedTipOffset, LMResult]:
    """Jointly estimate the source-to-camera pose and the constrained tip offset.

    Parameters are the 6-dim local chart of the source-to-camera pose plus
    (tx, tz, theta_x). Raises :class:`RankDeficientError` when the sensor
    poses do not vary (fewer effective constraints than the 9 unknowns).
    """
    poses = problem.sensor_poses
    if len(poses) < 4:
        raise RankDeficientError("at least 4 images with distinct sensor poses needed")
    spread = max(
        np.linalg.norm(p.p - poses[0].p) + np.linalg.norm(p.r - poses[0].r)
        for p in poses[1:])
    if spread < 1e-9:
        raise RankDeficientError("all sensor poses are identical")

    init_mag_cam = init_mag_cam or Pose.identity()
    init_offset = init_offset or ConstrainedTipOffset(0.0, 0.0, 0.0)
    state = {"pose": init_mag_cam}

    def fun(x):
        x_mc = _chart_pose(state["pose"], x[:6])
        offset = ConstrainedTipOffset(x[6], x[7], x[8])
        res = []
        for obs, x_sm in zip(problem.tip_observations, poses):
            tip = sensor_to_tip(x_mc, x_sm, offset)
            res.append(_silhouette_residual(tip, obs, problem.radius))
        return np.concatenate(res)

    def recenter(x):
        state["pose"] = _chart_pose(state["pose"], x[:6])
        out = x.copy()
        out[:6] = 0.0
        return out

    x0 = np.array([0.0] * 6 + [init_offset.tx, init_offset.tz, init_offset.theta_x])
    lm = levenberg_marquardt(fun, x0, recenter=recenter, **solver_kwargs)
    x_mc = _chart_pose(state["pose"], lm.x[:6])
    offset = ConstrainedTipOffset(float(lm.x[6]), float(lm.x[7]), float(lm.x[8]))
    return x_mc, offset, lm


def pose_to_dict(pose: Pose) -> dict:
    return {"rotation": [[float(v) for v in row] for row in pose.r],
            "position": [float(v) for v in pose.p]}


def pose_from_dict(d: dict) -> Pose:
    return Pose(np.asarray(d["rotation"], dtype=float),
                np.asarray(d["position"], dtype=float))
