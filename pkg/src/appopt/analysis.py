"""Closed-form oracles and diagnostics for the weighted-sample proximal
iteration: two-Gaussian product integrals, finite-sharpness proximal-point
ratios against a brute-force grid oracle, parameter-condition calculators,
and Monte Carlo / quadrature twins for cross-checking them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import ObjectiveSpec, evaluate_batch


@dataclass
class GaussianIntegralParams:
    """Parameters of exp[-alpha(beta/2 ||x-u||^2 + gamma/2 ||x-v||^2)].

    Integrable over R^d iff alpha * (beta + gamma) > 0.
    """

    alpha: float
    beta: float
    gamma: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.atleast_1d(np.asarray(self.u, dtype=float))
        self.v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must share a dimension")

    @property
    def dim(self) -> int:
        return self.u.size


def _check_integrable(p: GaussianIntegralParams) -> float:
    ab = p.alpha * (p.beta + p.gamma)
    if ab <= 0:
        raise ValueError("divergent integral")
    return ab


def gaussian_integral_i1(p: GaussianIntegralParams) -> float:
    """Closed form of the plain integral of the two-Gaussian product."""
    ab = _check_integrable(p)
    diff = p.u - p.v
    expo = -p.alpha * p.beta * p.gamma * float(diff @ diff) / (2.0 * (p.beta + p.gamma))
    return math.exp(expo) * (2.0 * math.pi / ab) ** (p.dim / 2.0)


def gaussian_integral_i2(p: GaussianIntegralParams) -> float:
    """Closed form of the ||x-u||^2-weighted integral."""
    ab = _check_integrable(p)
    diff = p.u - p.v
    dist2 = float(diff @ diff)
    poly = p.dim / ab + p.gamma**2 * dist2 / (p.beta + p.gamma) ** 2
    return gaussian_integral_i1(p) * poly


def gaussian_integral_quadrature(
    p: GaussianIntegralParams,
    which: int = 1,
    tol: float = 1e-11,
    max_nodes: int = 192,
) -> float:
    """Numeric twin of the closed forms: refined tensor Gauss-Legendre.

    The integrand is a Gaussian centered at c = (beta u + gamma v) /
    (beta + gamma) with per-coordinate scale 1/sqrt(alpha(beta+gamma));
    integration runs over the box c +- (10 scales + |u-v|) and refines the
    per-axis node count until successive values agree to `tol` relative.
    The exponent is shifted by its maximum (at c) before exponentiation
    and the factor restored at the end.
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    ab = _check_integrable(p)
    d = p.dim
    if d > 3:
        raise ValueError("quadrature twin supports d <= 3")
    bg = p.beta + p.gamma
    center = (p.beta * p.u + p.gamma * p.v) / bg
    sigma = 1.0 / math.sqrt(ab)
    half = 10.0 * sigma + np.abs(p.u - p.v)

    def exponent(x: np.ndarray) -> np.ndarray:
        du = x - p.u
        dv = x - p.v
        return -p.alpha * (0.5 * p.beta * np.sum(du * du, axis=-1) + 0.5 * p.gamma * np.sum(dv * dv, axis=-1))

    shift = float(exponent(center))

    def integrand(x: np.ndarray) -> np.ndarray:
        val = np.exp(exponent(x) - shift)
        if which == 2:
            du = x - p.u
            val = val * np.sum(du * du, axis=-1)
        return val

    prev = None
    m = 24
    while True:
        t, w = np.polynomial.legendre.leggauss(m)
        axes = [center[j] + half[j] * t for j in range(d)]
        wts = [half[j] * w for j in range(d)]
        if d == 1:
            total = float(wts[0] @ integrand(axes[0][:, None]))
        else:
            # Slab over the first axis keeps memory flat for d in {2, 3}.
            inner_axes = axes[1:]
            grids = np.meshgrid(*inner_axes, indexing="ij")
            inner_pts = np.stack([g.ravel() for g in grids], axis=-1)
            inner_w = wts[1]
            for wt in wts[2:]:
                inner_w = np.outer(inner_w, wt).ravel()
            total = 0.0
            for x0, w0 in zip(axes[0], wts[0]):
                pts = np.concatenate(
                    [np.full((inner_pts.shape[0], 1), x0), inner_pts], axis=1
                )
                total += w0 * float(inner_w @ integrand(pts))
        if prev is not None and abs(total - prev) <= tol * max(abs(total), 1e-300):
            return math.exp(shift) * total
        if m >= max_nodes:
            raise RuntimeError("quadrature failed to converge; raise max_nodes")
        prev = total
        m *= 2


def _objective_values(objective: ObjectiveSpec, nodes: np.ndarray) -> np.ndarray:
    """Evaluate a 1-D objective on an array of scalar nodes."""
    if objective.vectorized:
        return np.asarray(objective.fun(nodes), dtype=float)
    return np.array([float(objective.fun(np.array([x]))) for x in nodes])


def _simpson_weights(a: float, b: float, m: int) -> np.ndarray:
    h = (b - a) / (m - 1)
    w = np.full(m, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    return w * (h / 3.0)


def _ratio_quadrature(
    objective: ObjectiveSpec,
    p: float,
    lam: float,
    alpha: float,
    half_width: float,
    quad_points: int,
    x_star: Optional[float] = None,
    tol: float = 1e-10,
    max_nodes: int = 2**21 + 1,
) -> float:
    """Composite-Simpson ratio of integrals of g(x) exp(E(x)) / exp(E(x))
    with E(x) = -alpha (f(x) + lam/2 (x-p)^2), max-shifted before
    exponentiation; g is x itself or |x - x_star|. Node count doubles until
    two successive refinements agree to `tol`.
    """
    a, b = p - half_width, p + half_width
    m = max(int(quad_points), 17)
    if m % 2 == 0:
        m += 1
    prev = None
    while True:
        nodes = np.linspace(a, b, m)
        fv = _objective_values(objective, nodes)
        expo = -alpha * (fv + 0.5 * lam * (nodes - p) ** 2)
        expo -= expo.max()
        wvals = _simpson_weights(a, b, m) * np.exp(expo)
        den = float(wvals.sum())
        if den <= 0.0 or not math.isfinite(den):
            raise ValueError("vanishing mass; raise quad resolution")
        g = nodes if x_star is None else np.abs(nodes - x_star)
        ratio = float(wvals @ g) / den
        if prev is not None and abs(ratio - prev) <= tol * max(1.0, abs(ratio)):
            return ratio
        if m >= max_nodes:
            raise RuntimeError("ratio quadrature failed to converge; raise resolution")
        prev = ratio
        m = 2 * m - 1


def asymptotic_ratio_estimate(
    objective: ObjectiveSpec,
    p: float,
    lam: float,
    alpha: float,
    quad_radius: float = 2.0,
    quad_points: int = 1025,
) -> float:
    """Finite-sharpness proximal-point ratio
    int x exp[-alpha(f + lam/2 (x-p)^2)] / int exp[...] for a 1-D objective.

    As alpha grows this converges to the proximal point anchored at p.
    The integration interval extends 8 Gaussian standard deviations
    (1/sqrt(alpha lam)) beyond quad_radius on each side of p.
    """
    if objective.dim != 1:
        raise ValueError("ratio estimate is a one-dimensional diagnostic")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    half_width = quad_radius + 8.0 / math.sqrt(alpha * lam)
    return _ratio_quadrature(objective, float(p), lam, alpha, half_width, quad_points)


def proximal_point_bruteforce(
    objective: ObjectiveSpec,
    p,
    lam: float,
    grid_radius: float,
    grid_step: float,
) -> np.ndarray:
    """Grid argmin of f(x) + lam/2 ||x - p||^2 over a box around p.

    Enumeration only; d <= 2. Ties break toward smaller coordinates
    lexicographically (first occurrence on an ascending grid).
    """
    d = objective.dim
    if d > 2:
        raise ValueError("oracle limited to desk-scale dimensions")
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    p = np.atleast_1d(np.asarray(p, dtype=float))
    m = int(round(2.0 * grid_radius / grid_step)) + 1
    axes = [np.linspace(p[j] - grid_radius, p[j] + grid_radius, m) for j in range(d)]
    if d == 1:
        fv = _objective_values(objective, axes[0])
        total = fv + 0.5 * lam * (axes[0] - p[0]) ** 2
        return np.array([axes[0][int(np.argmin(total))]])
    best_val = math.inf
    best_pt = None
    penalty1 = 0.5 * lam * (axes[1] - p[1]) ** 2
    for x0 in axes[0]:
        fv = np.array([float(objective.fun(np.array([x0, x1]))) for x1 in axes[1]])
        total = fv + 0.5 * lam * (x0 - p[0]) ** 2 + penalty1
        j = int(np.argmin(total))
        if total[j] < best_val:
            best_val = float(total[j])
            best_pt = np.array([x0, axes[1][j]])
    return best_pt


def uk_diagnostic(
    objective: ObjectiveSpec,
    x_k: float,
    x_star: float,
    lam: float,
    rho: float,
    k: int,
    quad_radius: float = 2.0,
    quad_points: int = 1025,
) -> float:
    """Quadrature value of the distance-weighted ratio
    int |x-x_star| exp[-rho^{-k}(f + lam/2 (x-x_k)^2)] / int exp[...].

    Bounds (by Jensen) the distance from the exact weighted-mean iterate
    to the minimizer at the same sharpness.
    """
    if objective.dim != 1:
        raise ValueError("diagnostic is one-dimensional")
    alpha = rho ** (-k)
    half_width = quad_radius + 8.0 / math.sqrt(alpha * lam)
    return _ratio_quadrature(
        objective, float(x_k), lam, alpha, half_width, quad_points, x_star=float(x_star)
    )


def rho_lambda(l: float, L: float, lam: float, M: float, d: int) -> float:
    """Computable contraction condition 10 lam^2 L^{d/2} / l^{d/2+2} *
    exp(lam^2 M / (2l)); convergence theory wants this below the
    contraction factor."""
    if not 0 < l <= L:
        raise ValueError("constants require 0 < l <= L")
    if lam <= 0 or M < 0:
        raise ValueError("lam must be positive and M nonnegative")
    return 10.0 * lam**2 * L ** (d / 2.0) / l ** (d / 2.0 + 2.0) * math.exp(lam**2 * M / (2.0 * l))


def n_lower_bound(l: float, L: float, lam: float, M: float, d: int, c_prob: float) -> float:
    """Per-iteration sample-size bound C^2 (L+lam)^d / (2^{d/2} lam^{d/2}
    L^{d/2}) exp(lam M / 2) max{1, 2 l^2 / (5 lam^2)}."""
    if not 0 < l <= L:
        raise ValueError("constants require 0 < l <= L")
    if lam <= 0 or M < 0 or c_prob <= 0:
        raise ValueError("lam and c_prob must be positive and M nonnegative")
    lead = c_prob**2 * (L + lam) ** d / (2 ** (d / 2.0) * lam ** (d / 2.0) * L ** (d / 2.0))
    return lead * math.exp(lam * M / 2.0) * max(1.0, 2.0 * l**2 / (5.0 * lam**2))


def mk_bounds(
    l: float, L: float, lam: float, M: float, d: int, rho: float, k: int
) -> tuple[float, float]:
    """Envelope for the root-mean-square value spread m_k when
    ||x_k - x_star||^2 <= rho^k M:
    rho^k l sqrt(3d) / (2 lam) <= m_k <= rho^k L d sqrt(3 + 6 M lam + (M lam)^2) / (2 lam)."""
    if not 0 < l <= L:
        raise ValueError("constants require 0 < l <= L")
    if lam <= 0 or M < 0:
        raise ValueError("lam must be positive and M nonnegative")
    factor = rho**k / (2.0 * lam)
    lower = factor * l * math.sqrt(3.0 * d)
    upper = factor * L * d * math.sqrt(3.0 + 6.0 * M * lam + (M * lam) ** 2)
    return lower, upper


def mk_monte_carlo(
    objective: ObjectiveSpec,
    x_k,
    f_star: float,
    sigma2: float,
    n: int,
    seed: int = 0,
) -> float:
    """Sampling twin of m_k: sqrt of the mean of (f(theta) - f_star)^2
    over n draws theta ~ N(x_k, sigma2 I_d)."""
    if n < 1:
        raise ValueError("n must be positive")
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    x_k = np.atleast_1d(np.asarray(x_k, dtype=float))
    rng = np.random.default_rng(seed)
    theta = x_k + math.sqrt(sigma2) * rng.standard_normal((n, x_k.size))
    y = evaluate_batch(objective, theta) - f_star
    return math.sqrt(float(np.mean(y * y)))


def sample_size_diagnostic(
    objective: ObjectiveSpec,
    x_k: float,
    lam: float,
    rho: float,
    k: int,
    c_prob: float,
    quad_radius: float = 4.0,
    quad_points: int = 4097,
) -> float:
    """Quadrature estimate (d=1 only) of the per-iteration sample size
    4 C^2 V[w] / E[w]^2 for the unnormalized weight w = exp(-rho^{-k} f)
    under theta ~ N(x_k, rho^k / lam). Diagnostic only; never used inside
    the optimization loop (the moments are unobservable there).
    """
    if objective.dim != 1:
        raise ValueError("diagnostic is one-dimensional")
    alpha = rho ** (-k)
    s2 = rho**k / lam
    s = math.sqrt(s2)
    a, b = x_k - (quad_radius + 10.0 * s), x_k + (quad_radius + 10.0 * s)
    m = max(int(quad_points), 17)
    if m % 2 == 0:
        m += 1
    nodes = np.linspace(a, b, m)
    fv = _objective_values(objective, nodes)
    g = -alpha * fv
    g -= g.max()
    density = np.exp(-0.5 * (nodes - x_k) ** 2 / s2) / math.sqrt(2.0 * math.pi * s2)
    w = _simpson_weights(a, b, m) * density
    e1 = float(w @ np.exp(g))
    e2 = float(w @ np.exp(2.0 * g))
    if e1 <= 0.0:
        raise ValueError("vanishing mass; raise quad resolution")
    ratio = e2 / (e1 * e1)
    return 4.0 * c_prob**2 * max(ratio - 1.0, 0.0)


@dataclass
class ConvergenceEnvelope:
    """Reporting-only envelope err_sq(k) <= rho^k * M with its probability
    constant, slack factor and success-window length. Never consumed by
    the optimizer; `violations` checks a recorded error sequence."""

    M: float
    rho_lambda: float
    c_prob: float
    gamma_env: float
    s: int

    def __post_init__(self):
        if self.M <= 0 or self.c_prob <= 0:
            raise ValueError("M and c_prob must be positive")
        if self.gamma_env <= 1.0:
            raise ValueError("gamma_env must exceed 1")
        if self.s < 1:
            raise ValueError("s must be a positive integer")

    def is_valid_for(self, rho: float) -> bool:
        return self.rho_lambda < rho

    def bound(self, k: int, rho: float) -> float:
        return rho**k * self.M

    def violations(self, errors_sq, rho: float) -> list[int]:
        """Indices k (1-based) where err_sq exceeds the envelope."""
        return [
            k
            for k, e in enumerate(errors_sq, start=1)
            if e is not None and e > self.bound(k, rho)
        ]
