"""Rotation and rigid-body pose algebra: hat/vee maps, exponentials, composition.

Conventions: rotations are 3x3 numpy arrays, positions are millimeters,
poses map body-frame coordinates into the parent frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Below this angle (radians) the sin/cos ratio coefficients switch to a
# second-order Taylor expansion to avoid cancellation near zero curvature.
SMALL_ANGLE = 1e-10

_EYE3 = np.eye(3)


def hat3(v) -> np.ndarray:
    """Skew-symmetric matrix of a 3-vector, so that hat3(v) @ w == cross(v, w)."""
    x, y, z = np.asarray(v, dtype=float)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def vee3(m, tol: float = 1e-9) -> np.ndarray:
    """Inverse of hat3. Rejects matrices whose asymmetry exceeds ``tol``."""
    m = np.asarray(m, dtype=float)
    asym = np.max(np.abs(m + m.T))
    if asym > tol:
        raise ValueError(f"matrix is not skew-symmetric (asymmetry {asym:.3e} > {tol:.1e})")
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _rot_coeffs(theta: float) -> tuple[float, float, float]:
    """Coefficients (sin t / t, (1-cos t)/t^2, (t-sin t)/t^3) with Taylor branch."""
    if theta < SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    s, c = math.sin(theta), math.cos(theta)
    return s / theta, (1.0 - c) / (theta * theta), (theta - s) / (theta ** 3)


def exp_rotation(omega, scale: float = 1.0) -> np.ndarray:
    """Rodrigues rotation by angle |omega|*scale about axis omega/|omega|."""
    w = np.asarray(omega, dtype=float) * scale
    theta = float(np.linalg.norm(w))
    a, b, _ = _rot_coeffs(theta)
    wx = hat3(w)
    return _EYE3 + a * wx + b * (wx @ wx)


@dataclass(frozen=True)
class StrainTwist:
    """Body-frame strain: bending/twisting rates kappa plus stretch/shear q."""

    kappa: np.ndarray
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        object.__setattr__(self, "kappa", np.asarray(self.kappa, dtype=float))
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))
        if not (np.all(np.isfinite(self.kappa)) and np.all(np.isfinite(self.q))):
            raise ValueError("strain twist entries must be finite")


@dataclass(eq=False)
class Pose:
    """Rigid transform with rotation ``r`` (3x3) and position ``p`` (mm)."""

    r: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.r.shape != (3, 3) or self.p.shape != (3,):
            raise ValueError("pose requires a 3x3 rotation and a 3-vector position")
        drift = np.max(np.abs(self.r.T @ self.r - _EYE3))
        if not np.isfinite(drift) or drift > 1e-6:
            raise ValueError(f"rotation block is not orthonormal (drift {drift:.3e})")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=float)
        return cls(m[:3, :3].copy(), m[:3, 3].copy())

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.r
        m[:3, 3] = self.p
        return m

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.r @ other.r, self.r @ other.p + self.p)

    def inverse(self) -> "Pose":
        rt = self.r.T
        return Pose(rt, -rt @ self.p)

    def transform(self, x) -> np.ndarray:
        """Map a point from this pose's body frame into the parent frame."""
        return self.r @ np.asarray(x, dtype=float) + self.p

    def tangent(self) -> np.ndarray:
        """Body x-axis expressed in the parent frame."""
        return self.r[:, 0].copy()


def pose_compose(a: Pose, b: Pose) -> Pose:
    return a.compose(b)


def pose_inverse(a: Pose) -> Pose:
    return a.inverse()


def exp_pose(tw: StrainTwist, scale: float = 1.0) -> Pose:
    """Closed-form SE(3) exponential of the twist scaled by ``scale``.

    The translation block uses the left Jacobian V(omega) applied to q*scale.
    """
    w = tw.kappa * scale
    theta = float(np.linalg.norm(w))
    a, b, c = _rot_coeffs(theta)
    wx = hat3(w)
    wx2 = wx @ wx
    r = _EYE3 + a * wx + b * wx2
    v = _EYE3 + b * wx + c * wx2
    return Pose(r, v @ (tw.q * scale))


def se3_exp_batch(omegas: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Vectorized SE(3) exponentials: (K,3) rotation and translation parts -> (K,4,4)."""
    omegas = np.asarray(omegas, dtype=float)
    vs = np.asarray(vs, dtype=float)
    n = omegas.shape[0]
    theta = np.linalg.norm(omegas, axis=1)
    small = theta < SMALL_ANGLE
    t_safe = np.where(small, 1.0, theta)
    s, c = np.sin(t_safe), np.cos(t_safe)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0, s / t_safe)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - c) / (t_safe * t_safe))
    cc = np.where(small, 1.0 / 6.0 - t2 / 120.0, (t_safe - s) / (t_safe ** 3))

    wx = np.zeros((n, 3, 3))
    wx[:, 0, 1] = -omegas[:, 2]
    wx[:, 0, 2] = omegas[:, 1]
    wx[:, 1, 0] = omegas[:, 2]
    wx[:, 1, 2] = -omegas[:, 0]
    wx[:, 2, 0] = -omegas[:, 1]
    wx[:, 2, 1] = omegas[:, 0]
    wx2 = wx @ wx

    out = np.zeros((n, 4, 4))
    out[:, :3, :3] = _EYE3 + a[:, None, None] * wx + b[:, None, None] * wx2
    vmat = _EYE3 + b[:, None, None] * wx + cc[:, None, None] * wx2
    out[:, :3, 3] = np.einsum("kij,kj->ki", vmat, vs)
    out[:, 3, 3] = 1.0
    return out


def orthonormalize(r: np.ndarray) -> np.ndarray:
    """Project a near-orthonormal matrix back onto SO(3) (one polar Newton step)."""
    return r @ (1.5 * _EYE3 - 0.5 * (r.T @ r))


def rotation_angle(r: np.ndarray) -> float:
    """Rotation angle of a rotation matrix, radians in [0, pi]."""
    tr = float(np.trace(np.asarray(r, dtype=float)))
    return math.acos(max(-1.0, min(1.0, (tr - 1.0) / 2.0)))


def rotation_angle_between(ra: np.ndarray, rb: np.ndarray) -> float:
    """Geodesic angle between two rotations, radians."""
    return rotation_angle(np.asarray(ra).T @ np.asarray(rb))
