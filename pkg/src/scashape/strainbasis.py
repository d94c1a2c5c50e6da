"""Curvature profiles as linear combinations of basis functions along the arm.

A curvature profile is kappa(s) = sum_i a_i * phi_i(s) per active axis. The
catalog covers constant, piecewise-constant, and polynomial families plus a
tabulated extension point. Coefficients are laid out block-major: block j
(segment or monomial degree) holds one value per active axis, axes ordered
(twist-x, bend-y, bend-z).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .liegroup import StrainTwist

AXIS_NAMES = ("twist-x", "bend-y", "bend-z")


class BasisFamily(str, Enum):
    CONSTANT = "constant"
    PIECEWISE = "piecewise"
    POLYNOMIAL = "polynomial"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class BasisSpec:
    """Choice of basis family, active strain axes, and arm length (mm).

    Polynomial families use monomials in the normalized arclength s/L, which
    keeps all coefficients in rad/mm and conditions the fit Jacobian.
    Piecewise families partition [0, L] uniformly with half-open segments
    [s_j, s_{j+1}); the last segment is closed at L.
    """

    family: BasisFamily
    arm_length: float
    segments: int = 1
    order: int = 0
    active_axes: tuple[str, ...] = AXIS_NAMES
    # TABULATED only: (s grid, per-function sampled values), linearly interpolated.
    sample_grid: tuple[float, ...] | None = None
    sample_values: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.arm_length <= 0:
            raise ValueError("arm_length must be positive")
        if self.family is BasisFamily.PIECEWISE and self.segments < 1:
            raise ValueError("piecewise basis needs at least one segment")
        if self.family is BasisFamily.POLYNOMIAL and self.order < 0:
            raise ValueError("polynomial order must be non-negative")
        if not self.active_axes:
            raise ValueError("at least one active axis is required")
        for name in self.active_axes:
            if name not in AXIS_NAMES:
                raise ValueError(f"unknown axis {name!r}")
        if tuple(sorted(self.active_axes, key=AXIS_NAMES.index)) != tuple(self.active_axes):
            raise ValueError("active_axes must be ordered (twist-x, bend-y, bend-z)")
        if self.family is BasisFamily.TABULATED:
            if self.sample_grid is None or self.sample_values is None:
                raise ValueError("tabulated basis requires sample_grid and sample_values")
            grid = np.asarray(self.sample_grid, dtype=float)
            if grid[0] > 0.0 or grid[-1] < self.arm_length or np.any(np.diff(grid) <= 0):
                raise ValueError("sample_grid must increase and cover [0, arm_length]")

    @property
    def n_functions(self) -> int:
        """Number of scalar basis functions per active axis."""
        if self.family is BasisFamily.CONSTANT:
            return 1
        if self.family is BasisFamily.PIECEWISE:
            return self.segments
        if self.family is BasisFamily.POLYNOMIAL:
            return self.order + 1
        return len(self.sample_values)

    @property
    def breakpoints(self) -> np.ndarray:
        """Knots where the strain field may be non-smooth."""
        if self.family is BasisFamily.PIECEWISE:
            return np.linspace(0.0, self.arm_length, self.segments + 1)
        if self.family is BasisFamily.TABULATED:
            return np.asarray(self.sample_grid, dtype=float)
        return np.array([0.0, self.arm_length])


def param_count(spec: BasisSpec) -> int:
    return len(spec.active_axes) * spec.n_functions


def _check_arclength(spec: BasisSpec, s: np.ndarray) -> None:
    if np.any(s < -1e-9) or np.any(s > spec.arm_length + 1e-9):
        raise ValueError(f"arclength outside [0, {spec.arm_length}]")


def shape_functions(spec: BasisSpec, s) -> np.ndarray:
    """Scalar basis values phi_j(s): shape (len(s), n_functions)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    _check_arclength(spec, s)
    n = spec.n_functions
    if spec.family is BasisFamily.CONSTANT:
        return np.ones((s.size, 1))
    if spec.family is BasisFamily.PIECEWISE:
        seg_len = spec.arm_length / spec.segments
        idx = np.minimum((s / seg_len).astype(int), spec.segments - 1)
        out = np.zeros((s.size, n))
        out[np.arange(s.size), idx] = 1.0
        return out
    if spec.family is BasisFamily.POLYNOMIAL:
        u = s / spec.arm_length
        return np.vander(u, n, increasing=True)
    grid = np.asarray(spec.sample_grid, dtype=float)
    vals = np.asarray(spec.sample_values, dtype=float)
    return np.stack([np.interp(s, grid, v) for v in vals], axis=1)


def basis_matrix(spec: BasisSpec, s) -> np.ndarray:
    """Linear map from coefficients to kappa: shape (len(s), 3, param_count)."""
    phi = shape_functions(spec, s)
    n_axes = len(spec.active_axes)
    out = np.zeros((phi.shape[0], 3, param_count(spec)))
    for j in range(spec.n_functions):
        for k, name in enumerate(spec.active_axes):
            out[:, AXIS_NAMES.index(name), j * n_axes + k] = phi[:, j]
    return out


@dataclass(frozen=True)
class StrainField:
    """A basis with a concrete coefficient vector, evaluable on [0, L]."""

    basis: BasisSpec
    coeffs: np.ndarray
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0]))

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=float)
        if a.shape != (param_count(self.basis),):
            raise ValueError(
                f"coefficient vector has length {a.size}, basis needs {param_count(self.basis)}"
            )
        if not np.all(np.isfinite(a)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", a)
        object.__setattr__(self, "q", np.asarray(self.q, dtype=float))


def eval_kappa(f: StrainField, s) -> np.ndarray:
    """Curvature/twist 3-vector(s) at arclength s; inactive axes are exactly 0."""
    b = basis_matrix(f.basis, s)
    out = b @ f.coeffs
    return out[0] if np.isscalar(s) or np.ndim(s) == 0 else out


def eval_omega(f: StrainField, s: float) -> StrainTwist:
    """Full body-frame strain at a single arclength."""
    return StrainTwist(eval_kappa(f, float(s)), f.q)


def bend_twist_basis(family: BasisFamily, segments_or_order: int, arm_length: float) -> BasisSpec:
    """Basis for an arm that twists about x and bends about y only (kappa_z = 0)."""
    if family is BasisFamily.PIECEWISE:
        return BasisSpec(family, arm_length, segments=segments_or_order,
                         active_axes=("twist-x", "bend-y"))
    if family is BasisFamily.POLYNOMIAL:
        return BasisSpec(family, arm_length, order=segments_or_order,
                         active_axes=("twist-x", "bend-y"))
    if family is BasisFamily.CONSTANT:
        return BasisSpec(family, arm_length, active_axes=("twist-x", "bend-y"))
    raise ValueError(f"unsupported family for bend/twist default: {family}")


def basis_to_dict(spec: BasisSpec) -> dict:
    d = {
        "family": spec.family.value,
        "arm_length": spec.arm_length,
        "active_axes": list(spec.active_axes),
    }
    if spec.family is BasisFamily.PIECEWISE:
        d["segments"] = spec.segments
    if spec.family is BasisFamily.POLYNOMIAL:
        d["order"] = spec.order
    if spec.family is BasisFamily.TABULATED:
        d["sample_grid"] = list(spec.sample_grid)
        d["sample_values"] = [list(v) for v in spec.sample_values]
    return d


def basis_from_dict(d: dict) -> BasisSpec:
    family = BasisFamily(d["family"])
    kwargs = {}
    if family is BasisFamily.PIECEWISE:
        kwargs["segments"] = int(d.get("segments", 1))
    if family is BasisFamily.POLYNOMIAL:
        kwargs["order"] = int(d.get("order", 0))
    if family is BasisFamily.TABULATED:
        kwargs["sample_grid"] = tuple(d["sample_grid"])
        kwargs["sample_values"] = tuple(tuple(v) for v in d["sample_values"])
    return BasisSpec(family, float(d["arm_length"]),
                     active_axes=tuple(d["active_axes"]), **kwargs)
