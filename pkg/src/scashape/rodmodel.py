"""Integrates the pose field of the arm from a strain field and a base pose.

The pose evolves along arclength as dX/ds = X * Omega(s). Two integrators are
provided: a first-order exponential stepper (exact for piecewise-constant
strain when the steps align with segment breakpoints) and a third-order
Crouch-Grossman composition for validation at coarse step counts.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .liegroup import Pose, orthonormalize, se3_exp_batch
from .strainbasis import BasisSpec, StrainField, basis_matrix

# Crouch-Grossman order 3: stage abscissae and composition weights.
_CG3_C = np.array([0.0, 3.0 / 4.0, 17.0 / 24.0])
_CG3_B = np.array([13.0 / 51.0, -2.0 / 3.0, 24.0 / 17.0])

_RENORM_EVERY = 16


@dataclass(frozen=True)
class IntegratorSpec:
    """Integration method ("exp1" or "cg3") and substep budget over [0, L]."""

    method: str = "exp1"
    steps: int = 100

    def __post_init__(self):
        if self.method not in ("exp1", "cg3"):
            raise ValueError(f"unknown integrator {self.method!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass(frozen=True)
class ShapeSample:
    """Cross-section pose at arclength s (mm)."""

    s: float
    pose: Pose


def _knot_sequence(grid: np.ndarray, breakpoints: np.ndarray, steps: int,
                   length: float) -> tuple[np.ndarray, np.ndarray]:
    """Substep knots covering [0, max(grid)], aligned with grid and breakpoints.

    Returns (knots, capture) where knots[capture[i]] == grid[i].
    """
    s_end = float(grid[-1])
    base = {0.0, s_end}
    base.update(float(g) for g in grid)
    base.update(float(b) for b in breakpoints if 0.0 < b < s_end)
    anchors = np.array(sorted(base))
    knots = [0.0]
    for lo, hi in zip(anchors[:-1], anchors[1:]):
        n = max(1, int(round(steps * (hi - lo) / length)))
        knots.extend(np.linspace(lo, hi, n + 1)[1:])
    knots = np.asarray(knots)
    capture = np.searchsorted(knots, grid)
    return knots, capture


class IntegrationPlan:
    """Precomputed substep layout and basis evaluations for repeated integration.

    Building the plan once and calling :meth:`transforms` per coefficient
    vector is the hot path of the shape estimator.
    """

    def __init__(self, basis: BasisSpec, grid, spec: IntegratorSpec,
                 q=(1.0, 0.0, 0.0)):
        grid = np.atleast_1d(np.asarray(grid, dtype=float))
        if grid.size == 0:
            raise ValueError("grid must contain at least one arclength")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if grid[0] < 0 or grid[-1] > basis.arm_length + 1e-9:
            raise ValueError("grid values must lie within [0, arm_length]")
        self.basis = basis
        self.spec = spec
        self.grid = grid
        self.q = np.asarray(q, dtype=float)
        if grid[-1] == 0.0:
            self._knots = np.array([0.0])
            self._capture = np.zeros(grid.size, dtype=int)
            self._hs = np.zeros(0)
            self._bmats = np.zeros((0, 3, 1))
            return
        self._knots, self._capture = _knot_sequence(
            grid, basis.breakpoints, spec.steps, basis.arm_length)
        self._hs = np.diff(self._knots)
        lefts = self._knots[:-1]
        if spec.method == "exp1":
            # strain frozen at the left endpoint of each substep
            self._bmats = basis_matrix(basis, lefts)
        else:
            nodes = (lefts[:, None] + np.outer(self._hs, _CG3_C)).ravel()
            nodes = np.minimum(nodes, basis.arm_length)
            self._bmats = basis_matrix(basis, nodes)  # (3K, 3, N)

    def _increments(self, coeffs: np.ndarray) -> np.ndarray:
        hs = self._hs
        if self.spec.method == "exp1":
            kappas = self._bmats @ coeffs
            return se3_exp_batch(kappas * hs[:, None], np.outer(hs, self.q))
        kappas = (self._bmats @ coeffs).reshape(hs.size, 3, 3)
        parts = []
        for j, b in enumerate(_CG3_B):
            w = b * hs
            parts.append(se3_exp_batch(kappas[:, j, :] * w[:, None],
                                       np.outer(w, self.q)))
        return parts[0] @ parts[1] @ parts[2]

    def transforms(self, coeffs, x0_matrix: np.ndarray) -> np.ndarray:
        """Homogeneous transforms at the grid arclengths, shape (len(grid), 4, 4)."""
        coeffs = np.asarray(coeffs, dtype=float)
        x = np.asarray(x0_matrix, dtype=float)
        out = np.empty((self._knots.size, 4, 4))
        out[0] = x
        incs = self._increments(coeffs)
        for i in range(self._hs.size):
            x = x @ incs[i]
            if (i + 1) % _RENORM_EVERY == 0:
                x[:3, :3] = orthonormalize(x[:3, :3])
            out[i + 1] = x
        return out[self._capture]


def integrate_shape(f: StrainField, x0: Pose, grid, spec: IntegratorSpec | None = None
                    ) -> list[ShapeSample]:
    """Pose samples of the arm at the requested arclengths, starting from x0."""
    spec = spec or IntegratorSpec()
    plan = IntegrationPlan(f.basis, grid, spec, q=f.q)
    mats = plan.transforms(f.coeffs, x0.matrix())
    return [ShapeSample(float(s), Pose.from_matrix(m))
            for s, m in zip(plan.grid, mats)]


def tip_pose(f: StrainField, x0: Pose, spec: IntegratorSpec | None = None) -> Pose:
    """Pose of the arm tip (s = L)."""
    return integrate_shape(f, x0, [f.basis.arm_length], spec)[-1].pose


def tangent_at(sample: ShapeSample) -> np.ndarray:
    """Unit tangent of the centerline at a shape sample."""
    t = sample.pose.tangent()
    return t / np.linalg.norm(t)


def shape_to_csv(samples: list[ShapeSample], path) -> None:
    """Write samples as rows (s, px, py, pz, r00..r22) for external plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["s", "px", "py", "pz"] +
                        [f"r{i}{j}" for i in range(3) for j in range(3)])
        for smp in samples:
            writer.writerow([repr(float(smp.s))] +
                            [repr(float(v)) for v in smp.pose.p] +
                            [repr(float(v)) for v in smp.pose.r.ravel()])
