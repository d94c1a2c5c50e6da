"""Weighted reprojection fitting of strain-basis coefficients.

The cost is the weighted squared distance, on the unit sphere, between the
observed tube boundary points and the boundaries predicted by integrating the
strain field and projecting each marker cross-section. A damped trust-region
Gauss-Newton (Levenberg-Marquardt) solver with optional box bounds minimizes
it; calibration reuses the same solver through a local-chart recentering hook.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import BoundaryObservation, tube_silhouette
from .liegroup import Pose
from .rodmodel import IntegrationPlan, IntegratorSpec
from .strainbasis import BasisSpec, param_count


class DegenerateSilhouetteError(RuntimeError):
    """A predicted cross-section tangent aligned with its viewing ray."""


@dataclass(frozen=True)
class ObservationSet:
    """Per-image boundary samples plus the (known) base pose and arm radius."""

    samples: tuple[BoundaryObservation, ...]
    base_pose: Pose
    radius: float

    def __post_init__(self):
        # canonical increasing-arclength order: the cost is a sum over markers,
        # so any input permutation denotes the same observation set
        object.__setattr__(self, "samples",
                           tuple(sorted(self.samples, key=lambda o: o.s)))
        if not self.samples:
            raise ValueError("at least one boundary observation is required")
        s = self.arclengths
        if np.any(np.diff(s) <= 0):
            raise ValueError("marker arclengths must be distinct")
        if self.radius <= 0:
            raise ValueError("arm radius must be positive")

    @property
    def arclengths(self) -> np.ndarray:
        return np.array([o.s for o in self.samples])


def linear_weights(s_values, arm_length: float) -> np.ndarray:
    """Weights increasing linearly along the arm, floored at 0.1 for positivity."""
    s = np.asarray(s_values, dtype=float)
    return np.maximum(s / arm_length, 0.1)


class ResidualModel:
    """Precomputed residual evaluator for one observation set and basis."""

    def __init__(self, obs: ObservationSet, basis: BasisSpec,
                 weights=None, integrator: IntegratorSpec | None = None):
        self.obs = obs
        self.basis = basis
        self.integrator = integrator or IntegratorSpec()
        s = obs.arclengths
        w = linear_weights(s, basis.arm_length) if weights is None \
            else np.asarray(weights, dtype=float)
        if w.shape != (len(obs.samples),) or np.any(w <= 0):
            raise ValueError("weights must be strictly positive, one per marker")
        self.weights = w
        self._sqrt_w = np.sqrt(w)
        self._plan = IntegrationPlan(basis, s, self.integrator)
        self._x0 = obs.base_pose.matrix()
        self._y = np.array([[o.y_r, o.y_l] for o in obs.samples])  # (M, 2, 3)

    def marker_poses(self, coeffs) -> np.ndarray:
        return self._plan.transforms(coeffs, self._x0)

    def residuals(self, coeffs) -> np.ndarray:
        """sqrt(w_m) * (y_k - P_k(X(s_m))) stacked over markers and sides, (6M,)."""
        mats = self.marker_poses(coeffs)
        out = np.empty((len(self.obs.samples), 2, 3))
        for m, mat in enumerate(mats):
            sil = tube_silhouette(None, Pose.from_matrix(mat), self.obs.radius)
            if sil.degenerate:
                raise DegenerateSilhouetteError(
                    f"degenerate silhouette at s = {self.obs.samples[m].s}")
            out[m, 0] = self._y[m, 0] - sil.right
            out[m, 1] = self._y[m, 1] - sil.left
        out *= self._sqrt_w[:, None, None]
        return out.ravel()

    def cost(self, coeffs) -> float:
        r = self.residuals(coeffs)
        return float(r @ r)


def residuals(coeffs, basis: BasisSpec, obs: ObservationSet, weights=None,
              integrator: IntegratorSpec | None = None) -> np.ndarray:
    """One-shot residual vector; see :class:`ResidualModel` for repeated use."""
    return ResidualModel(obs, basis, weights, integrator).residuals(
        np.asarray(coeffs, dtype=float))


def finite_difference_jacobian(fun, x, *, rel_step: float = 1e-6) -> np.ndarray:
    """Forward-difference Jacobian with per-parameter step max(h, h*|x_i|)."""
    x = np.asarray(x, dtype=float)
    r0 = fun(x)
    jac = np.empty((r0.size, x.size))
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += h
        jac[:, i] = (fun(xp) - r0) / h
    return jac


def jacobian(coeffs, basis: BasisSpec, obs: ObservationSet, weights=None,
             integrator: IntegratorSpec | None = None) -> np.ndarray:
    """Forward-difference Jacobian of the residual vector, shape (6M, N)."""
    model = ResidualModel(obs, basis, weights, integrator)
    return finite_difference_jacobian(model.residuals, np.asarray(coeffs, dtype=float))


@dataclass
class LMResult:
    x: np.ndarray
    cost: float
    residual_norm_history: list[float]
    iterations: int
    converged: bool
    residuals: np.ndarray
    jacobian: np.ndarray | None = None


def levenberg_marquardt(fun, x0, *, bounds=None, gtol: float = 1e-10,
                        ftol: float = 1e-12, xtol: float = 1e-8,
                        max_iter: int = 200,
                        recenter=None, lambda0: float = 1.0) -> LMResult:
    """Damped Gauss-Newton least squares with monotone accepted steps.

    The damping term is ``mu * I`` with ``mu`` initialized to
    ``lambda0 * max(diag(J^T J))`` and adapted from the gain ratio
    (actual over predicted cost reduction).  The relatively heavy initial
    damping makes the first accepted steps short and gradient-like, which
    keeps a cold start from overshooting into spurious basins.

    ``bounds`` is an optional (lo, hi) pair of vectors enforced by projection.
    ``recenter`` is called with the accepted iterate and may return a
    re-parameterized iterate (used for local charts on SE(3)); the caller's
    ``fun`` must agree with the new chart.
    """
    x = np.asarray(x0, dtype=float).copy()
    if bounds is not None:
        lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        x = np.clip(x, lo, hi)
    r = fun(x)
    if not np.all(np.isfinite(r)):
        raise ValueError("residuals are not finite at the initial point")
    cost = float(r @ r)
    history = [math.sqrt(cost)]
    n = x.size
    eye = np.eye(n)
    try:
        jac = finite_difference_jacobian(fun, x)
    except (ValueError, RuntimeError) as exc:
        raise ValueError(f"Jacobian undefined at the initial point: {exc}") from exc
    jtj = jac.T @ jac
    g = jac.T @ r
    dmax = max(float(np.max(np.diag(jtj))), 1e-300)
    mu = lambda0 * dmax
    nu = 2.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) < gtol:
            converged = True
            break
        try:
            step = np.linalg.solve(jtj + mu * eye, -g)
        except np.linalg.LinAlgError:
            mu *= nu
            nu *= 2.0
            continue
        x_trial = x + step
        if bounds is not None:
            x_trial = np.clip(x_trial, lo, hi)
        step_eff = x_trial - x
        try:
            r_trial = fun(x_trial)
            cost_trial = float(r_trial @ r_trial)
        except (ValueError, RuntimeError):
            cost_trial = np.inf
        predicted = float(step_eff @ (mu * step_eff - g))
        if np.isfinite(cost_trial) and cost_trial < cost and predicted > 0.0:
            gain = (cost - cost_trial) / predicted
            rel_drop = (cost - cost_trial) / max(cost, 1e-300)
            small_step = (np.linalg.norm(step_eff)
                          < xtol * (1.0 + np.linalg.norm(x_trial)))
            x, r, cost = x_trial, r_trial, cost_trial
            history.append(math.sqrt(cost))
            if recenter is not None:
                x = np.asarray(recenter(x), dtype=float)
            if cost == 0.0 or (rel_drop < ftol and small_step):
                converged = True
                break
            try:
                jac = finite_difference_jacobian(fun, x)
            except (ValueError, RuntimeError):
                # residuals undefined within a finite-difference step of the
                # iterate (e.g. a grazing silhouette); report non-convergence
                break
            jtj = jac.T @ jac
            g = jac.T @ r
            mu = max(mu * max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3),
                     1e-14 * dmax)
            nu = 2.0
        else:
            if (np.linalg.norm(step_eff)
                    < xtol * (1.0 + np.linalg.norm(x))):
                # the rejected step is already below the resolution limit
                converged = True
                break
            mu *= nu
            nu *= 2.0
            if mu > 1e12 * dmax:
                # no productive step exists at any damping level
                break
    return LMResult(x=x, cost=cost, residual_norm_history=history,
                    iterations=it if it else 0, converged=converged,
                    residuals=r, jacobian=jac)


@dataclass(frozen=True)
class FitOptions:
    gtol: float = 1e-10
    ftol: float = 1e-12
    # tip position responds to coefficients at roughly arm_length^2 mm per
    # unit of curvature, so the step resolution limit must sit well below
    # (desired tip accuracy) / arm_length^2
    xtol: float = 1e-12
    max_iterations: int = 200
    # per-coefficient bound; defaults to 4*pi/L (excludes wrap-around shapes)
    coeff_bound: float | None = None
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)
    weights: tuple[float, ...] | None = None


@dataclass
class FitResult:
    coeffs: np.ndarray
    final_cost: float
    residual_norm_history: list[float]
    iterations: int
    converged: bool
    per_marker_residuals: list[float]

    def to_dict(self) -> dict:
        return {
            "coeffs": [float(a) for a in self.coeffs],
            "final_cost": self.final_cost,
            "residual_norm_history": [float(v) for v in self.residual_norm_history],
            "iterations": self.iterations,
            "converged": self.converged,
            "per_marker_residuals": [float(v) for v in self.per_marker_residuals],
        }


def solve_shape(obs: ObservationSet, basis: BasisSpec, init_coeffs=None,
                options: FitOptions | None = None) -> FitResult:
    """Fit strain coefficients to one observation set (zero init by default)."""
    options = options or FitOptions()
    n = param_count(basis)
    if init_coeffs is None:
        init_coeffs = np.zeros(n)
    init_coeffs = np.asarray(init_coeffs, dtype=float)
    if init_coeffs.shape != (n,):
        raise ValueError(f"init_coeffs must have length {n}")
    model = ResidualModel(obs, basis, options.weights, options.integrator)
    bound = options.coeff_bound
    if bound is None:
        bound = 4.0 * math.pi / basis.arm_length
    lm = levenberg_marquardt(
        model.residuals, init_coeffs,
        bounds=(np.full(n, -bound), np.full(n, bound)),
        gtol=options.gtol, ftol=options.ftol, xtol=options.xtol,
        max_iter=options.max_iterations)
    per_marker = np.linalg.norm(lm.residuals.reshape(-1, 2, 3), axis=(1, 2))
    return FitResult(coeffs=lm.x, final_cost=lm.cost,
                     residual_norm_history=lm.residual_norm_history,
                     iterations=lm.iterations, converged=lm.converged,
                     per_marker_residuals=list(per_marker))
