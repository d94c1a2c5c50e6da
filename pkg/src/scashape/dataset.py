"""Versioned JSON dataset schema for synthetic (or imported) observations.

A dataset document holds a scenario block (arm geometry, camera, true basis,
markers, noise, base pose) and one record per configuration with boundary
observations in both pixel and unit-sphere coordinates, plus optional ground
truth and magnetic-sensor blocks. Unknown keys are preserved verbatim so the
format is forward compatible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .calibration import ConstrainedTipOffset, pose_from_dict
from .camera import BoundaryObservation, OmniCameraModel
from .estimator import ObservationSet
from .liegroup import Pose
from .rodmodel import IntegratorSpec
from .strainbasis import BasisSpec, basis_from_dict

SCHEMA_VERSION = 1

_REQUIRED_TOP = ("schema_version", "scenario", "configs")
_REQUIRED_SCENARIO = ("arm_length_mm", "arm_radius_mm", "base_pose", "camera",
                      "marker_s", "true_basis", "integrator", "pixel_noise_sigma")
_REQUIRED_CONFIG = ("config_id", "observations")


class SchemaError(ValueError):
    """Dataset document violates the schema."""


def camera_to_dict(cam: OmniCameraModel) -> dict:
    return {
        "poly": [cam.poly[0], 0.0, cam.poly[1], cam.poly[2], cam.poly[3]],
        "affine": [float(v) for v in cam.affine.ravel()],
        "center": [float(v) for v in cam.center],
        "size": list(cam.image_size),
        "fov": cam.fov,
    }


def camera_from_dict(d: dict) -> OmniCameraModel:
    poly = [float(v) for v in d["poly"]]
    return OmniCameraModel(
        affine=np.asarray(d["affine"], dtype=float).reshape(2, 2),
        center=np.asarray(d["center"], dtype=float),
        poly=(poly[0], poly[2], poly[3], poly[4]),
        image_size=tuple(d["size"]),
        fov=float(d["fov"]),
    )


@dataclass
class ConfigRecord:
    """One arm configuration: observations plus optional ground truth."""

    config_id: str
    observations: list[dict]
    bend_psi: float | None = None
    twist_psi: float | None = None
    true_coeffs: np.ndarray | None = None
    true_tip: Pose | None = None
    base_observation: dict | None = None
    sensor_pose: Pose | None = None

    def boundary_observations(self) -> list[BoundaryObservation]:
        return [BoundaryObservation(o["s"], np.asarray(o["sphere_r"]),
                                    np.asarray(o["sphere_l"]))
                for o in self.observations]


class Dataset:
    """Wrapper over the raw JSON document with typed accessors.

    The raw dict is the source of truth; writing re-serializes it unchanged,
    so unknown keys round-trip bit-exactly.
    """

    def __init__(self, raw: dict):
        _validate(raw)
        self.raw = raw

    @property
    def scenario(self) -> dict:
        return self.raw["scenario"]

    @property
    def arm_length(self) -> float:
        return float(self.scenario["arm_length_mm"])

    @property
    def arm_radius(self) -> float:
        return float(self.scenario["arm_radius_mm"])

    @property
    def base_pose(self) -> Pose:
        return pose_from_dict(self.scenario["base_pose"])

    @property
    def camera(self) -> OmniCameraModel:
        return camera_from_dict(self.scenario["camera"])

    @property
    def marker_s(self) -> np.ndarray:
        return np.asarray(self.scenario["marker_s"], dtype=float)

    @property
    def true_basis(self) -> BasisSpec:
        return basis_from_dict(self.scenario["true_basis"])

    @property
    def integrator(self) -> IntegratorSpec:
        d = self.scenario["integrator"]
        return IntegratorSpec(method=d["method"], steps=int(d["steps"]))

    @property
    def sensor_chain(self) -> tuple[Pose, ConstrainedTipOffset] | None:
        d = self.scenario.get("sensor_chain")
        if d is None:
            return None
        off = d["tip_offset"]
        return (pose_from_dict(d["mag_to_cam"]),
                ConstrainedTipOffset(float(off["tx"]), float(off["tz"]),
                                     float(off["theta_x"])))

    @property
    def configs(self) -> list[ConfigRecord]:
        out = []
        for c in self.raw["configs"]:
            out.append(ConfigRecord(
                config_id=c["config_id"],
                observations=c["observations"],
                bend_psi=c.get("bend_psi"),
                twist_psi=c.get("twist_psi"),
                true_coeffs=(np.asarray(c["true_coeffs"], dtype=float)
                             if "true_coeffs" in c else None),
                true_tip=(pose_from_dict(c["true_tip"]) if "true_tip" in c else None),
                base_observation=c.get("base_observation"),
                sensor_pose=(pose_from_dict(c["sensor_pose"])
                             if "sensor_pose" in c else None),
            ))
        return out

    @property
    def excluded(self) -> list[dict]:
        return self.raw.get("excluded", [])

    def observation_set(self, record: ConfigRecord) -> ObservationSet:
        return ObservationSet(samples=tuple(record.boundary_observations()),
                              base_pose=self.base_pose, radius=self.arm_radius)

    def has_ground_truth(self) -> bool:
        cfgs = self.configs
        return bool(cfgs) and all(c.true_tip is not None for c in cfgs)


def _validate(raw: dict) -> None:
    for key in _REQUIRED_TOP:
        if key not in raw:
            raise SchemaError(f"dataset missing required key {key!r}")
    if int(raw["schema_version"]) != SCHEMA_VERSION:
        raise SchemaError(
            f"unsupported schema_version {raw['schema_version']} (expected {SCHEMA_VERSION})")
    for key in _REQUIRED_SCENARIO:
        if key not in raw["scenario"]:
            raise SchemaError(f"scenario missing required key {key!r}")
    for c in raw["configs"]:
        for key in _REQUIRED_CONFIG:
            if key not in c:
                raise SchemaError(f"config missing required key {key!r}")
        for o in c["observations"]:
            for key in ("s", "sphere_r", "sphere_l"):
                if key not in o:
                    raise SchemaError(f"observation missing required key {key!r}")


def dumps_canonical(raw: dict) -> str:
    """Canonical serialization: sorted keys, no whitespace churn, repr floats."""
    return json.dumps(raw, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_dataset(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_canonical(ds.raw))
        fh.write("\n")


def read_dataset(path) -> Dataset:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed JSON: {exc}") from exc
    return Dataset(raw)
