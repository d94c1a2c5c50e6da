"""Omnidirectional camera model: pixel/unit-sphere maps and tube silhouettes.

The model follows the common omnidirectional-calibration parameterization
(affine 2x2 matrix A, offset c, and a polynomial g(rho) without a linear
term): a pixel (u, v) maps to the ray direction (u', v', g(rho)) where
(u', v') = A (u, v) + c and rho = |(u', v')|. Observations live on the unit
sphere around the camera origin.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .liegroup import Pose


class OutOfViewError(ValueError):
    """Direction or pixel outside the calibrated field of view."""


@dataclass(eq=False)
class OmniCameraModel:
    """Fisheye calibration: affine A, offset c (pixels), poly (a0, a2, a3, a4)."""

    affine: np.ndarray
    center: np.ndarray
    poly: tuple[float, float, float, float]
    image_size: tuple[int, int]
    fov: float

    def __post_init__(self):
        self.affine = np.asarray(self.affine, dtype=float).reshape(2, 2)
        self.center = np.asarray(self.center, dtype=float).reshape(2)
        self.poly = tuple(float(a) for a in self.poly)
        self.image_size = (int(self.image_size[0]), int(self.image_size[1]))
        self.fov = float(self.fov)
        if not 0.0 < self.fov < 360.0:
            raise ValueError("fov must be in (0, 360) degrees")
        if abs(np.linalg.det(self.affine)) < 1e-12:
            raise ValueError("affine matrix must be invertible")
        if self.poly[0] == 0.0:
            raise ValueError("poly constant term must be nonzero")
        self._affine_inv = np.linalg.inv(self.affine)
        w, h = self.image_size
        corners = np.array([[0, 0], [w, 0], [0, h], [w, h]], dtype=float)
        self._rho_img = max(np.linalg.norm(self.affine @ c + self.center)
                            for c in corners)
        # largest radius over which the off-axis angle is monotone, and the
        # radius at which it reaches fov/2
        rho = np.linspace(0.0, self._rho_img, 4096)[1:]
        theta = np.arctan2(rho, np.sign(self.poly[0]) * self._g(rho))
        n_mono = int(np.argmax(np.diff(theta) <= 0)) if np.any(np.diff(theta) <= 0) else rho.size - 1
        self._rho_mono = float(rho[n_mono])
        half = math.radians(self.fov / 2.0)
        inside = theta[:n_mono + 1] <= half
        self._rho_fov = float(rho[:n_mono + 1][inside][-1]) if np.any(inside) else self._rho_mono
        if np.any(self._g(np.linspace(0.0, self._rho_fov, 2048)) *
                  np.sign(self.poly[0]) <= 0.0):
            raise ValueError("g(rho) changes sign inside the field of view")

    def _g(self, rho):
        a0, a2, a3, a4 = self.poly
        return a0 + rho ** 2 * (a2 + rho * (a3 + rho * a4))

    @property
    def optical_axis(self) -> np.ndarray:
        return np.array([0.0, 0.0, math.copysign(1.0, self.poly[0])])


def project_point(x) -> np.ndarray:
    """Central projection of a camera-frame point onto the unit sphere."""
    x = np.asarray(x, dtype=float)
    n = np.linalg.norm(x)
    if n <= 1e-9:
        raise ValueError("point is at the camera center; projection undefined")
    return x / n


def pixel_to_sphere(cam: OmniCameraModel, uv) -> np.ndarray:
    """Unit-sphere direction of an image pixel."""
    uv = np.asarray(uv, dtype=float)
    w, h = cam.image_size
    if not (-1e-9 <= uv[0] <= w + 1e-9 and -1e-9 <= uv[1] <= h + 1e-9):
        raise ValueError(f"pixel {uv} outside image bounds {cam.image_size}")
    ub, vb = cam.affine @ uv + cam.center
    rho = math.hypot(ub, vb)
    d = np.array([ub, vb, cam._g(rho)])
    lam = np.linalg.norm(d)
    if lam < 1e-9:
        raise ValueError("pixel maps to a degenerate (zero-norm) ray")
    return d / lam


def sphere_to_pixel(cam: OmniCameraModel, d) -> np.ndarray:
    """Pixel whose ray matches the unit direction d; inverse of pixel_to_sphere.

    Inverts the radial polynomial by bracketed root-finding, so round trips
    are accurate to solver tolerance rather than a fitted inverse polynomial.
    """
    d = np.asarray(d, dtype=float)
    d = d / np.linalg.norm(d)
    cos_off = float(np.dot(d, cam.optical_axis))
    if math.degrees(math.acos(max(-1.0, min(1.0, cos_off)))) > cam.fov / 2.0 + 1e-6:
        raise OutOfViewError("direction outside the camera field of view")
    rxy = math.hypot(d[0], d[1])
    if rxy < 1e-12:
        ubvb = np.zeros(2)
    else:
        f = lambda rho: cam._g(rho) * rxy - d[2] * rho
        lo, hi = 0.0, cam._rho_mono
        if f(lo) * f(hi) > 0:
            raise OutOfViewError("no radius maps to this direction")
        rho = brentq(f, lo, hi, xtol=1e-12, rtol=8.9e-16)
        ubvb = np.array([d[0], d[1]]) * (rho / rxy)
    return cam._affine_inv @ (ubvb - cam.center)


@dataclass(frozen=True)
class Silhouette:
    """Left/right projected boundary of a tube cross-section on the unit sphere."""

    left: np.ndarray
    right: np.ndarray
    degenerate: bool = False


@dataclass(frozen=True)
class BoundaryObservation:
    """Observed left/right boundary directions at one marker arclength."""

    s: float
    y_r: np.ndarray
    y_l: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y_r", np.asarray(self.y_r, dtype=float))
        object.__setattr__(self, "y_l", np.asarray(self.y_l, dtype=float))
        for y in (self.y_r, self.y_l):
            if abs(np.linalg.norm(y) - 1.0) > 1e-6:
                raise ValueError("boundary observations must be unit vectors")


def tube_silhouette(cam: OmniCameraModel | None, pose: Pose, radius: float) -> Silhouette:
    """Thin-tube silhouette of a cross-section at ``pose`` (camera frame).

    The centerline point is offset by +/- radius along n = normalize(t x p_hat),
    where t is the cross-section tangent and p_hat the viewing direction; the
    +n offset is labeled left. Exact in the limit radius/|p| -> 0. When the
    tangent is aligned with the viewing ray the silhouette is undefined and a
    degenerate result is returned.
    """
    p = pose.p
    dist = np.linalg.norm(p)
    if dist <= radius:
        raise ValueError("cross-section closer to the camera than its own radius")
    p_hat = p / dist
    t = pose.tangent()
    n = np.cross(t, p_hat)
    n_norm = np.linalg.norm(n)
    if n_norm < 1e-6:
        center = project_point(p)
        return Silhouette(center, center, degenerate=True)
    n = n / n_norm
    return Silhouette(project_point(p + radius * n),
                      project_point(p - radius * n))


def synthesize_camera(fov: float, image_size: tuple[int, int]) -> OmniCameraModel:
    """Equidistant-like fisheye model for a given field of view and image size.

    Pixels on the inscribed circle of radius min(w, h)/2 map to rays fov/2
    off-axis; the radial map is fitted with the (a0, a2, a3, a4) polynomial.
    """
    if not 0.0 < fov < 180.0:
        raise ValueError("synthesized fov must be in (0, 180) degrees")
    w, h = image_size
    rho_edge = min(w, h) / 2.0
    k = math.radians(fov / 2.0) / rho_edge
    rho = np.linspace(0.0, rho_edge, 512)
    theta = k * rho
    # target g with g(0) = 1/k (the equidistant focal length)
    target = np.empty_like(rho)
    target[0] = 1.0 / k
    target[1:] = rho[1:] / np.tan(theta[1:])
    basis = np.stack([np.ones_like(rho), rho ** 2, rho ** 3, rho ** 4], axis=1)
    a0, a2, a3, a4 = np.linalg.lstsq(basis, target, rcond=None)[0]
    return OmniCameraModel(
        affine=np.eye(2),
        center=np.array([-w / 2.0, -h / 2.0]),
        poly=(a0, a2, a3, a4),
        image_size=(w, h),
        fov=fov,
    )


def save_camera(cam: OmniCameraModel, path) -> None:
    data = {
        "poly": [cam.poly[0], 0.0, cam.poly[1], cam.poly[2], cam.poly[3]],
        "affine": [float(v) for v in cam.affine.ravel()],
        "center": [float(v) for v in cam.center],
        "size": list(cam.image_size),
        "fov": cam.fov,
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_camera(path) -> OmniCameraModel:
    """Load a calibration file (poly[5] with a zero linear slot, affine[4],
    center[2], size[2], fov)."""
    with open(path) as fh:
        data = json.load(fh)
    for key in ("poly", "affine", "center", "size", "fov"):
        if key not in data:
            raise ValueError(f"calibration file missing key {key!r}")
    poly = [float(v) for v in data["poly"]]
    if len(poly) != 5:
        raise ValueError("poly must have 5 entries (a0, a1=0, a2, a3, a4)")
    if poly[1] != 0.0:
        raise ValueError("the linear polynomial slot a1 must be zero")
    return OmniCameraModel(
        affine=np.asarray(data["affine"], dtype=float).reshape(2, 2),
        center=np.asarray(data["center"], dtype=float),
        poly=(poly[0], poly[2], poly[3], poly[4]),
        image_size=tuple(data["size"]),
        fov=float(data["fov"]),
    )
