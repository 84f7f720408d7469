"""Weighted-sample proximal search: the original and stable iterations.

Each iteration draws n Gaussian samples centered at the current iterate
with per-coordinate variance rho^k / lambda, then moves to an
exponentially weighted average of the batch. The original variant weights
sample i by exp(-rho^{-k} f(theta_i)); the stable variant first shifts
function values by the running best and normalizes by their root mean
square, which keeps every exponent in [-sqrt(n), 0] and so can never
underflow. A third variant, original_naive, computes the original weights
without the ratio-preserving max-shift and reproduces the floating-point
failure mode the stable variant exists to avoid.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .sampling import SamplerStream, SampleBatch, gaussian_batch

VARIANTS = ("original", "original_naive", "stable")

# Salt for the initial-iterate draw, kept distinct from the sampler stream.
_INIT_SALT = 0x1B57


class WeightUnderflowError(ArithmeticError):
    """Every naive weight rounded to zero, making the update ratio 0/0.

    Carries the iteration index `k` at which the weights degenerated and,
    when raised out of `run`, the partial `trace` up to the failure point.
    """

    def __init__(self, k: int):
        super().__init__(f"degenerate weights (underflow) at k={k}")
        self.k = k
        self.trace: Optional["RunTrace"] = None


@dataclass
class ObjectiveSpec:
    """A black-box objective plus optional ground-truth metadata.

    `fun` maps a point in R^dim to a finite scalar. `known_minimizer` /
    `known_minimum` enable error tracking in traces; `growth_constants`
    (l, L) declare the quadratic envelope
    f* + (l/2)||x-x*||^2 <= f(x) <= f* + (L/2)||x-x*||^2 inside the
    objective's validity region. `vectorized` marks 1-D objectives whose
    `fun` also maps an array of scalars elementwise (used by quadrature);
    `batch_fun`, when given, maps an (m, dim) stack of points to m values
    in one call (a fast path for whole-batch evaluation).
    """

    dim: int
    fun: Callable[[np.ndarray], float]
    known_minimizer: Optional[np.ndarray] = None
    known_minimum: Optional[float] = None
    growth_constants: Optional[tuple[float, float]] = None
    name: str = ""
    vectorized: bool = False
    batch_fun: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if self.known_minimizer is not None:
            x_star = np.asarray(self.known_minimizer, dtype=float)
            if x_star.shape != (self.dim,):
                raise ValueError("known_minimizer dimension mismatch")
            self.known_minimizer = x_star
        if self.growth_constants is not None:
            l, L = self.growth_constants
            if not 0 < l <= L:
                raise ValueError("growth constants require 0 < l <= L")

    def __call__(self, x) -> float:
        return float(self.fun(np.asarray(x, dtype=float)))


@dataclass
class AppParams:
    """Iteration parameters: regularization lam > 0, contraction factor
    rho in (0, 1), batch size n >= 1, plus run plumbing (variant, budget,
    sampler selection, seed, optional initializer overrides)."""

    lam: float
    rho: float
    n: int
    variant: str = "original"
    max_iters: int = 100
    sampler: str = "pseudo_random"
    seed: int = 0
    initial_point: Optional[np.ndarray] = None
    init_radius: Optional[float] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.initial_point is not None:
            self.initial_point = np.asarray(self.initial_point, dtype=float)


@dataclass
class IterateState:
    """State after k-1 completed iterations (k starts at 1).

    sigma2 is always recomputed as rho^k / lam, never accumulated, so the
    variance schedule cannot drift. `m_hat` is the weight normalizer of
    the stable step that produced this state (None otherwise).
    """

    k: int
    x: np.ndarray
    f_best: float
    x_best: np.ndarray
    sigma2: float
    eval_count: int
    m_hat: Optional[float] = None


@dataclass
class IterateRecord:
    """One trace row; None fields are absent quantities, not zeros."""

    k: int
    eval_count: int
    err_sq: Optional[float]
    f_best: float
    m_hat: Optional[float]
    sigma2: Optional[float]
    wall_ms: Optional[float]


@dataclass
class RunTrace:
    """Ordered per-iteration records plus the parameters that produced them.

    `header` is a flat provenance mapping (solver, objective, every
    parameter, seed) that trace files reproduce verbatim.
    """

    header: dict
    records: list[IterateRecord]
    x_final: Optional[np.ndarray] = None
    x_best: Optional[np.ndarray] = None
    f_best: Optional[float] = None


def weighted_mean(points, exponents) -> np.ndarray | float:
    """Exponentially weighted average sum_i p_i e^{g_i} / sum_i e^{g_i}.

    The maximum exponent is subtracted before exponentiation (a no-op on
    the ratio) so the largest weight is exactly 1 and the denominator can
    never underflow. Per-coordinate sums use math.fsum (correctly rounded),
    which makes the result exactly invariant under permutation of the
    (point, exponent) pairs; the result is clipped to the batch's
    coordinate-wise hull, where it already lies up to rounding.
    """
    pts = np.asarray(points, dtype=float)
    g = np.asarray(exponents, dtype=float)
    if pts.size == 0 or g.size == 0:
        raise ValueError("empty batch")
    if g.ndim != 1 or pts.shape[0] != g.shape[0]:
        raise ValueError("points and exponents must pair one-to-one")
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite weight exponent")
    scalar = pts.ndim == 1
    cols = pts[:, None] if scalar else pts
    w = np.exp(g - g.max())
    den = math.fsum(w)
    num = np.array([math.fsum(w * cols[:, j]) for j in range(cols.shape[1])])
    out = np.clip(num / den, cols.min(axis=0), cols.max(axis=0))
    return float(out[0]) if scalar else out


def evaluate_batch(objective: ObjectiveSpec, pts: np.ndarray) -> np.ndarray:
    """Objective values for an (m, dim) stack of points."""
    if objective.batch_fun is not None:
        return np.asarray(objective.batch_fun(pts), dtype=float)
    return np.array([float(objective.fun(p)) for p in pts])


def _advance(
    state: IterateState,
    params: AppParams,
    pts: np.ndarray,
    fvals: np.ndarray,
    x_next: np.ndarray,
    m_hat: Optional[float],
) -> IterateState:
    i = int(np.argmin(fvals))
    if fvals[i] < state.f_best:
        f_best, x_best = float(fvals[i]), pts[i].copy()
    else:
        f_best, x_best = state.f_best, state.x_best
    k_next = state.k + 1
    return IterateState(
        k=k_next,
        x=np.asarray(x_next, dtype=float),
        f_best=f_best,
        x_best=x_best,
        sigma2=params.rho**k_next / params.lam,
        eval_count=state.eval_count + len(fvals),
        m_hat=m_hat,
    )


def app_step_original(
    state: IterateState, objective: ObjectiveSpec, params: AppParams, batch: SampleBatch
) -> IterateState:
    """One original-variant step: weights exp(-rho^{-k} f(theta_i)).

    Variant "original" routes through weighted_mean (max-shift applied,
    mathematically identical). Variant "original_naive" exponentiates the
    raw values; once rho^{-k} f exceeds ~745 every weight is stored as 0.0
    in float64 and the step raises WeightUnderflowError.
    """
    pts = batch.points
    fvals = evaluate_batch(objective, pts)
    exponents = -params.rho ** (-state.k) * fvals
    if params.variant == "original_naive":
        if not np.all(np.isfinite(exponents)):
            raise ValueError("non-finite weight exponent")
        w = np.exp(exponents)
        den = math.fsum(w)
        if den == 0.0:
            raise WeightUnderflowError(state.k)
        num = np.array([math.fsum(w * pts[:, j]) for j in range(pts.shape[1])])
        x_next = np.clip(num / den, pts.min(axis=0), pts.max(axis=0))
    else:
        x_next = weighted_mean(pts, exponents)
    return _advance(state, params, pts, fvals, x_next, m_hat=None)


def app_step_stable(
    state: IterateState, objective: ObjectiveSpec, params: AppParams, batch: SampleBatch
) -> IterateState:
    """One stable-variant step.

    The running best f is updated over the batch first, so the shifted
    values y_i = f(theta_i) - f_best are nonnegative; the weight exponents
    -y_i / rms(y) then lie in [-sqrt(n), 0] and cannot underflow. A batch
    on which the objective is constant (rms 0) falls back to the plain
    batch mean with m_hat recorded as 0; no division happens.
    """
    pts = batch.points
    fvals = evaluate_batch(objective, pts)
    if not np.all(np.isfinite(fvals)):
        raise ValueError("non-finite weight exponent")
    f_best_new = min(state.f_best, float(fvals.min()))
    y = fvals - f_best_new
    m_hat = math.sqrt(float(np.mean(y * y)))
    if m_hat == 0.0:
        x_next = np.clip(pts.mean(axis=0), pts.min(axis=0), pts.max(axis=0))
    else:
        x_next = weighted_mean(pts, -y / m_hat)
    return _advance(state, params, pts, fvals, x_next, m_hat=m_hat)


def initial_iterate(dim: int, seed: int, radius: Optional[float] = None) -> np.ndarray:
    """Uniform random point on the sphere of radius sqrt(dim) (or given)."""
    rng = np.random.default_rng([_INIT_SALT, int(seed)])
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    r = math.sqrt(dim) if radius is None else float(radius)
    return r * v


def solver_name(params: AppParams) -> str:
    return {"original": "app_original", "original_naive": "app_original_naive", "stable": "app_stable"}[
        params.variant
    ]


def trace_header(objective: ObjectiveSpec, params: AppParams) -> dict:
    header = {
        "solver": solver_name(params),
        "objective": objective.name or "custom",
        "dim": objective.dim,
        "lambda": params.lam,
        "rho": params.rho,
        "n": params.n,
        "variant": params.variant,
        "sampler": params.sampler,
        "seed": params.seed,
        "max_iters": params.max_iters,
    }
    if params.initial_point is not None:
        header["initial_point"] = " ".join(repr(float(v)) for v in params.initial_point)
    else:
        header["init_radius"] = (
            math.sqrt(objective.dim) if params.init_radius is None else float(params.init_radius)
        )
    return header


def _record(state: IterateState, x_star: Optional[np.ndarray], wall_ms: float) -> IterateRecord:
    err_sq = None
    if x_star is not None:
        diff = state.x - x_star
        err_sq = float(diff @ diff)
    return IterateRecord(
        k=state.k,
        eval_count=state.eval_count,
        err_sq=err_sq,
        f_best=state.f_best,
        m_hat=state.m_hat,
        sigma2=state.sigma2,
        wall_ms=wall_ms,
    )


def run(
    objective: ObjectiveSpec,
    params: AppParams,
    initial_point=None,
    stop_when: Optional[Callable[[IterateState], bool]] = None,
) -> RunTrace:
    """Run the configured variant for max_iters iterations.

    Batches come from a single non-repeating sampler stream across all
    iterations; the result is deterministic in (seed, params, objective)
    apart from wall-time columns. The trace's initial record describes the
    starting iterate (eval_count 0, f_best infinite: nothing has been
    evaluated yet). On a step failure the partial trace is attached to the
    raised error as `.trace`. `stop_when` is an optional end-of-iteration
    predicate used by the harness's target-error stop; core itself applies
    only the fixed iteration budget.
    """
    d = objective.dim
    x1 = initial_point if initial_point is not None else params.initial_point
    if x1 is None:
        x1 = initial_iterate(d, params.seed, params.init_radius)
    x1 = np.asarray(x1, dtype=float)
    if x1.shape != (d,):
        raise ValueError("initial point dimension does not match the objective")

    stream = SamplerStream(params.sampler, params.seed, d)
    step = app_step_stable if params.variant == "stable" else app_step_original
    state = IterateState(
        k=1,
        x=x1.copy(),
        f_best=math.inf,
        x_best=x1.copy(),
        sigma2=params.rho / params.lam,
        eval_count=0,
    )
    x_star = objective.known_minimizer
    header = trace_header(objective, params)
    records = [_record(state, x_star, wall_ms=0.0)]

    def _trace() -> RunTrace:
        return RunTrace(
            header=header,
            records=records,
            x_final=state.x.copy(),
            x_best=state.x_best.copy(),
            f_best=state.f_best,
        )

    for _ in range(params.max_iters):
        t0 = time.perf_counter()
        batch = gaussian_batch(stream, state.x, state.sigma2, params.n)
        try:
            state = step(state, objective, params, batch)
        except WeightUnderflowError as err:
            err.trace = _trace()
            raise
        records.append(_record(state, x_star, (time.perf_counter() - t0) * 1e3))
        if stop_when is not None and stop_when(state):
            break
    return _trace()
