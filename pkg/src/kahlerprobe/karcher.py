"""Riemannian center of mass on the space of almost complex structures.

The center of mass of a weighted point set is the minimizer of the average
squared distance energy; inside a convex ball whose diameter satisfies the
curvature-diameter hypothesis it exists, is unique, and is natural under
isometries.  We compute it by Riemannian gradient descent with unit step
and Armijo halving, which is the standard scheme for Karcher means in that
regime.  Measures are always finite weighted sets here (holonomy sampling
discretizes the Haar measure)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import acs
from .acs import OrthoComplexStructure, TangentPhi
from .constants import DeltaConstant
from .errors import ComponentMismatch, ConvexityViolation

WEIGHT_TOL = 1e-12
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True)
class WeightedSampleSet:
    """A finite probability measure on one component of the structure space."""

    points: tuple
    weights: tuple

    def __post_init__(self):
        pts = tuple(self.points)
        if not pts:
            raise ValueError("empty sample set")
        d = pts[0].dim
        if any(p.dim != d for p in pts):
            raise ValueError("mixed dimensions in sample set")
        if self.weights is None:
            w = tuple(1.0 / len(pts) for _ in pts)
        else:
            w = tuple(float(x) for x in self.weights)
        if len(w) != len(pts) or any(x < 0.0 for x in w):
            raise ValueError("weights must be nonnegative, one per point")
        if abs(sum(w) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {sum(w)!r}, not 1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @staticmethod
    def uniform(points) -> "WeightedSampleSet":
        points = tuple(points)
        return WeightedSampleSet(points, tuple(1.0 / len(points) for _ in points))

    @property
    def dim(self) -> int:
        return self.points[0].dim


@dataclass(frozen=True)
class MeanResult:
    mean: OrthoComplexStructure
    iterations: int
    final_grad_norm: float
    energy: float
    converged: bool


@dataclass(frozen=True)
class ConvexityReport:
    ok: bool
    ball_ok: bool
    diameter_ok: bool
    ball_radius: float      # max distance from the best-centered sample
    diameter: float
    diameter_bound: float


def karcher_energy(y: OrthoComplexStructure, s: WeightedSampleSet) -> float:
    """Weighted average squared distance: (1/2) sum_i w_i d(x_i, y)^2."""
    return 0.5 * sum(w * acs.distance(p, y) ** 2
                     for p, w in zip(s.points, s.weights))


def karcher_gradient(y: OrthoComplexStructure, s: WeightedSampleSet) -> TangentPhi:
    """Riemannian gradient of the energy at y: -sum_i w_i log_y(x_i)."""
    g = np.zeros_like(y.mat)
    for p, w in zip(s.points, s.weights):
        if w == 0.0:
            continue
        g -= w * acs.log_map(y, p).mat
    return TangentPhi(y, g)


def karcher_mean(s: WeightedSampleSet, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER,
                 start: OrthoComplexStructure = None) -> MeanResult:
    """Gradient descent with Armijo halving, started at ``start`` or the
    heaviest sample."""
    if tol < 1e-12:
        raise ValueError("tol must be >= 1e-12")
    y = s.points[int(np.argmax(s.weights))] if start is None else start
    energy = karcher_energy(y, s)
    for it in range(1, max_iter + 1):
        grad = karcher_gradient(y, s)
        gn = grad.norm()
        if gn < tol:
            return MeanResult(y, it, gn, energy, True)
        step = 1.0
        while step > 1e-8:
            y_new = acs.exp_map(y, grad, -step)
            try:
                e_new = karcher_energy(y_new, s)
            except ComponentMismatch:
                step *= 0.5
                continue
            # near the optimum the energy plateaus at machine precision;
            # accept the step if it still shrinks the gradient norm
            if e_new < energy or karcher_gradient(y_new, s).norm() < gn:
                y, energy = y_new, e_new
                break
            step *= 0.5
        else:
            # no acceptable step found; gradient norm is the honest residual
            return MeanResult(y, it, gn, energy, gn < tol)
    gn = karcher_gradient(y, s).norm()
    return MeanResult(y, max_iter, gn, energy, gn < tol)


def check_convexity(s: WeightedSampleSet, delta: DeltaConstant) -> ConvexityReport:
    """Diagnostic for the center-of-mass hypothesis.

    (a) some sample point is within 2*delta of every other sample (ball
    containment proxy) and (b) the set's diameter is at most
    pi / (2 sqrt(eps)).
    """
    pts = s.points
    m = len(pts)
    dmat = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            try:
                dmat[i, j] = dmat[j, i] = acs.distance(pts[i], pts[j])
            except ComponentMismatch:
                dmat[i, j] = dmat[j, i] = math.inf
    radius = float(np.min(np.max(dmat, axis=1))) if m > 1 else 0.0
    diameter = float(np.max(dmat))
    bound = math.pi / (2.0 * math.sqrt(delta.epsilon_used))
    ball_ok = radius <= 2.0 * delta.delta
    diameter_ok = diameter <= bound
    return ConvexityReport(ok=ball_ok and diameter_ok, ball_ok=ball_ok,
                           diameter_ok=diameter_ok, ball_radius=radius,
                           diameter=diameter, diameter_bound=bound)


def karcher_mean_checked(s: WeightedSampleSet, delta: DeltaConstant,
                         tol: float = DEFAULT_TOL,
                         max_iter: int = DEFAULT_MAX_ITER,
                         start: OrthoComplexStructure = None) -> MeanResult:
    """karcher_mean preceded by the convexity diagnostic (hard failure)."""
    report = check_convexity(s, delta)
    if not report.ok:
        raise ConvexityViolation(
            f"sample set violates the convexity hypothesis: radius "
            f"{report.ball_radius:.4f} vs 2*delta={2*delta.delta:.4f}, "
            f"diameter {report.diameter:.4f} vs bound {report.diameter_bound:.4f}")
    return karcher_mean(s, tol=tol, max_iter=max_iter, start=start)
