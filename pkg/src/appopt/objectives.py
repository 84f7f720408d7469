"""Benchmark objectives and a quadratic-envelope checker.

All objectives are pure deterministic functions with a unique global
minimum at the origin. The two one-dimensional functions are written
elementwise so arrays of scalars evaluate pointwise (handy for grid scans
and quadrature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ObjectiveSpec


def revised_rastrigin(x) -> float:
    """log((||x||^2 - sum(cos(5 pi x_i))/2 + d/2 + 1/10) / (1/10)).

    Nonnegative with a unique zero at the origin and 5^d local minima in
    [-1, 1]^d. The log argument is >= 1/10 everywhere, so the function is
    defined on all of R^d.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    interior = x @ x - 0.5 * np.sum(np.cos(5.0 * np.pi * x)) + 0.5 * d + 0.1
    assert interior > 0.0
    return float(np.log(interior) - math.log(0.1))


def fig1_left(x):
    """x^2 + x^2 cos(5 pi x) / 2, squeezed between x^2/2 and 3x^2/2."""
    x = np.asarray(x, dtype=float)
    out = x * x + 0.5 * x * x * np.cos(5.0 * np.pi * x)
    return float(out) if out.ndim == 0 else out


def fig1_right(x):
    """x^2 - cos(5 pi x) / 2 + 1/2, squeezed between x^2 and 65 x^2."""
    x = np.asarray(x, dtype=float)
    out = x * x - 0.5 * np.cos(5.0 * np.pi * x) + 0.5
    return float(out) if out.ndim == 0 else out


def sphere(x) -> float:
    """||x||^2; the exact-equality case of the quadratic envelope (l=L=2)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return float(x @ x)


def revised_rastrigin_batch(points: np.ndarray) -> np.ndarray:
    """revised_rastrigin over an (m, d) stack of points."""
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    interior = (
        np.einsum("ij,ij->i", points, points)
        - 0.5 * np.cos(5.0 * np.pi * points).sum(axis=1)
        + 0.5 * d
        + 0.1
    )
    return np.log(interior) - math.log(0.1)


def sphere_batch(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return np.einsum("ij,ij->i", points, points)


def get_objective(name: str, dim: int) -> ObjectiveSpec:
    """Objective registry keyed by harness config names."""
    if name == "revised_rastrigin":
        return ObjectiveSpec(
            dim=dim,
            fun=revised_rastrigin,
            known_minimizer=np.zeros(dim),
            known_minimum=0.0,
            name=name,
            batch_fun=revised_rastrigin_batch,
        )
    if name == "sphere":
        return ObjectiveSpec(
            dim=dim,
            fun=sphere,
            known_minimizer=np.zeros(dim),
            known_minimum=0.0,
            growth_constants=(2.0, 2.0),
            name=name,
            batch_fun=sphere_batch,
        )
    if name == "fig1_left":
        if dim != 1:
            raise ValueError("fig1_left is one-dimensional")
        return ObjectiveSpec(
            dim=1,
            fun=fig1_left,
            known_minimizer=np.zeros(1),
            known_minimum=0.0,
            growth_constants=(1.0, 3.0),
            name=name,
            vectorized=True,
        )
    if name == "fig1_right":
        if dim != 1:
            raise ValueError("fig1_right is one-dimensional")
        return ObjectiveSpec(
            dim=1,
            fun=fig1_right,
            known_minimizer=np.zeros(1),
            known_minimum=0.0,
            growth_constants=(2.0, 130.0),
            name=name,
            vectorized=True,
        )
    raise KeyError(f"unknown objective {name!r}")


OBJECTIVE_NAMES = ("revised_rastrigin", "fig1_left", "fig1_right", "sphere")


@dataclass
class BoundCheckReport:
    """Outcome of sampling the quadratic envelope around the minimizer.

    Worst margins are the largest violation magnitudes (positive numbers);
    None when the corresponding inequality held at every sampled point.
    """

    tested_points: int
    violations_lower: int
    worst_lower_margin: Optional[float]
    violations_upper: int
    worst_upper_margin: Optional[float]
    region: str

    @property
    def passed(self) -> bool:
        return self.violations_lower == 0 and self.violations_upper == 0


def check_assumption_bounds(
    objective: ObjectiveSpec,
    l: float,
    L: float,
    region_radius: float,
    n_samples: int = 2000,
    seed: int = 0,
) -> BoundCheckReport:
    """Sample the ball around the known minimizer and test the envelope
    f* + (l/2) r^2 <= f(x) <= f* + (L/2) r^2 at every sampled point."""
    if objective.known_minimizer is None or objective.known_minimum is None:
        raise ValueError("bound check requires a known minimizer and minimum")
    if not 0 < l <= L:
        raise ValueError("bound check requires 0 < l <= L")
    x_star = objective.known_minimizer
    f_star = objective.known_minimum
    d = objective.dim
    rng = np.random.default_rng(seed)

    # Uniform in the ball: normalized Gaussian direction times U^(1/d) radius.
    directions = rng.standard_normal((n_samples, d))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = region_radius * rng.random(n_samples) ** (1.0 / d)
    points = x_star + radii[:, None] * directions

    viol_lower = 0
    viol_upper = 0
    worst_lower = 0.0
    worst_upper = 0.0
    for p, r in zip(points, radii):
        f = float(objective.fun(p))
        lo = f_star + 0.5 * l * r * r
        hi = f_star + 0.5 * L * r * r
        if f < lo:
            viol_lower += 1
            worst_lower = max(worst_lower, lo - f)
        if f > hi:
            viol_upper += 1
            worst_upper = max(worst_upper, f - hi)
    return BoundCheckReport(
        tested_points=n_samples,
        violations_lower=viol_lower,
        worst_lower_margin=worst_lower if viol_lower else None,
        violations_upper=viol_upper,
        worst_upper_margin=worst_upper if viol_upper else None,
        region=f"ball of radius {region_radius} around the known minimizer",
    )
