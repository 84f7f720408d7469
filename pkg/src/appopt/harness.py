"""Experiment front end: config parsing, seeded multi-run experiments,
trace files, rate fitting, solver comparisons and the self-validation
suite behind the `validate` CLI subcommand.

Trace file format: UTF-8 CSV. Provenance lines prefixed with '# ' (one
`key=value` per line) come first, then exactly one header row with the
fixed column order (k, eval_count, err_sq, f_best, m_hat, sigma2_k,
wall_ms), then the data rows. Absent quantities are written as empty
fields, never 0. Wall time is excluded from all determinism guarantees.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import analysis
from .baselines import DEConfig, de_run, default_pop_size
from .core import AppParams, IterateRecord, ObjectiveSpec, RunTrace, run
from .objectives import get_objective

OUTPUT_DIR_ENV = "APPOPT_OUTPUT_DIR"

APP_SOLVERS = {
    "app_original": "original",
    "app_original_naive": "original_naive",
    "app_stable": "stable",
}
SOLVER_NAMES = tuple(APP_SOLVERS) + ("de_rand_1_bin",)


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


@dataclass
class ExperimentConfig:
    """One solver bound to one objective with seeding and output wiring."""

    objective_name: str
    dim: int
    solver: str
    app_params: Optional[AppParams] = None
    de_config: Optional[DEConfig] = None
    n_seeds: int = 1
    seed0: int = 0
    output_dir: str = "results"
    target_err_sq: Optional[float] = None

    def objective(self) -> ObjectiveSpec:
        return get_objective(self.objective_name, self.dim)


@dataclass
class RateFit:
    """Fitted per-iteration contraction of the squared error.

    rho_hat = exp(least-squares slope of log err_sq against k); values
    >= 1 report non-contracting (divergent or stalled) runs.
    """

    rho_hat: float
    r_squared: float
    window: tuple[int, int]


# --------------------------------------------------------------------------
# Config files
# --------------------------------------------------------------------------


def _number(value):
    """Coerce YAML scalars that should be numeric (e.g. '1e-6' parses as a
    string under YAML 1.1)."""
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            try:
                return float(value)
            except ValueError:
                return value
    return value


def _solver_from_section(section: dict, dim: int, budget: Optional[int]) -> tuple[str, object]:
    section = {k: _number(v) for k, v in dict(section).items()}
    name = section.pop("name", None)
    if name not in SOLVER_NAMES:
        raise ConfigError(f"unknown solver {name!r}; expected one of {SOLVER_NAMES}")
    try:
        if name in APP_SOLVERS:
            lam = section.pop("lambda", None)
            if lam is None:
                lam = 1.0 / math.sqrt(dim)
            rho = section.pop("rho", None)
            n = section.pop("n", None)
            if rho is None or n is None:
                raise ConfigError("app solvers require rho and n (unpublished per dimension)")
            max_iters = section.pop("max_iters", None)
            if max_iters is None:
                if budget is None:
                    raise ConfigError("app solvers require max_iters or an experiment budget")
                max_iters = int(budget) // int(n)
            initial_point = section.pop("initial_point", None)
            params = AppParams(
                lam=float(lam),
                rho=float(rho),
                n=int(n),
                variant=APP_SOLVERS[name],
                max_iters=int(max_iters),
                sampler=section.pop("sampler", "pseudo_random"),
                seed=0,
                initial_point=None if initial_point is None else np.asarray(initial_point, float),
                init_radius=section.pop("init_radius", None),
            )
            if section:
                raise ConfigError(f"unknown keys in solver section: {sorted(section)}")
            return name, params
        pop_size = int(section.pop("np", default_pop_size(dim)))
        max_generations = section.pop("max_generations", None)
        if max_generations is None:
            if budget is None:
                raise ConfigError("de solver requires max_generations or an experiment budget")
            max_generations = max(int(budget) // pop_size - 1, 0)
        config = DEConfig(
            pop_size=pop_size,
            f_weight=float(section.pop("f", 0.5)),
            cr=float(section.pop("cr", 0.9)),
            lo=float(section.pop("lo", -1.0)),
            hi=float(section.pop("hi", 1.0)),
            max_generations=int(max_generations),
            seed=0,
        )
        if section:
            raise ConfigError(f"unknown keys in solver section: {sorted(section)}")
        return name, config
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def _experiment_fields(doc: dict) -> dict:
    exp = {k: _number(v) for k, v in dict(doc.get("experiment", {})).items()}
    if "objective" not in exp or "dim" not in exp:
        raise ConfigError("experiment section requires objective and dim")
    return exp


def _build_config(exp: dict, section: dict) -> ExperimentConfig:
    name, params = _solver_from_section(section, int(exp["dim"]), exp.get("budget"))
    cfg = ExperimentConfig(
        objective_name=exp["objective"],
        dim=int(exp["dim"]),
        solver=name,
        n_seeds=int(exp.get("n_seeds", 1)),
        seed0=int(exp.get("seed0", 0)),
        output_dir=str(exp.get("output_dir", "results")),
        target_err_sq=exp.get("target_err_sq"),
    )
    if name in APP_SOLVERS:
        cfg.app_params = params
    else:
        cfg.de_config = params
    if cfg.n_seeds < 1:
        raise ConfigError("n_seeds must be positive")
    try:
        cfg.objective()
    except (KeyError, ValueError) as err:
        raise ConfigError(str(err)) from err
    return cfg


def _load_yaml(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except yaml.YAMLError as err:
        raise ConfigError(f"malformed config {path}: {err}") from err
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping with an experiment section")
    return doc


def parse_config(path) -> ExperimentConfig:
    """Read a single-solver experiment config (see README for the schema)."""
    doc = _load_yaml(path)
    exp = _experiment_fields(doc)
    if "solver" not in doc:
        raise ConfigError("config requires a solver section")
    return _build_config(exp, doc["solver"])


def parse_compare_config(path) -> tuple[ExperimentConfig, ExperimentConfig]:
    """Read a two-sided comparison config (side_a / side_b sections)."""
    doc = _load_yaml(path)
    exp = _experiment_fields(doc)
    if "side_a" not in doc or "side_b" not in doc:
        raise ConfigError("compare config requires side_a and side_b sections")
    return _build_config(exp, doc["side_a"]), _build_config(exp, doc["side_b"])


# --------------------------------------------------------------------------
# Trace files
# --------------------------------------------------------------------------

TRACE_COLUMNS = ("k", "eval_count", "err_sq", "f_best", "m_hat", "sigma2_k", "wall_ms")


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_trace(path, trace: RunTrace) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for key, value in trace.header.items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for r in trace.records:
            writer.writerow(
                [
                    _format_cell(r.k),
                    _format_cell(r.eval_count),
                    _format_cell(r.err_sq),
                    _format_cell(r.f_best),
                    _format_cell(r.m_hat),
                    _format_cell(r.sigma2),
                    _format_cell(r.wall_ms),
                ]
            )


def _parse_header_value(raw: str):
    try:
        return int(raw)
    except ValueError:
        try:
            return float(raw)
        except ValueError:
            return raw


def read_trace(path) -> RunTrace:
    """Re-read a trace file; header and records round-trip exactly."""
    header: dict = {}
    records: list[IterateRecord] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = []
        for line in fh:
            if line.startswith("# "):
                key, _, raw = line[2:].rstrip("\n").partition("=")
                header[key] = _parse_header_value(raw)
            else:
                rows.append(line)
        reader = csv.reader(rows)
        columns = tuple(next(reader))
        if columns != TRACE_COLUMNS:
            raise ValueError(f"unexpected trace columns {columns}")
        for row in reader:
            k, evals, err_sq, f_best, m_hat, sigma2, wall = row
            records.append(
                IterateRecord(
                    k=int(k),
                    eval_count=int(evals),
                    err_sq=None if err_sq == "" else float(err_sq),
                    f_best=float(f_best),
                    m_hat=None if m_hat == "" else float(m_hat),
                    sigma2=None if sigma2 == "" else float(sigma2),
                    wall_ms=None if wall == "" else float(wall),
                )
            )
    return RunTrace(header=header, records=records)


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------


def run_one(config: ExperimentConfig, seed: int) -> RunTrace:
    """Execute a single seeded run of the configured solver."""
    objective = config.objective()
    if config.solver in APP_SOLVERS:
        params = dataclasses.replace(config.app_params, seed=seed)
        stop_when = None
        if config.target_err_sq is not None and objective.known_minimizer is not None:
            x_star = objective.known_minimizer
            target = float(config.target_err_sq)

            def stop_when(state):
                diff = state.x - x_star
                return float(diff @ diff) <= target

        return run(objective, params, stop_when=stop_when)
    de_config = dataclasses.replace(config.de_config, seed=seed)
    return de_run(objective, de_config)


@dataclass
class ExperimentSummary:
    solver: str
    objective: str
    dim: int
    n_seeds: int
    seed0: int
    target_err_sq: Optional[float]
    per_seed: list[dict]
    median_final_err_sq: Optional[float]
    all_ok: bool
    output_dir: str

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def run_experiment(config: ExperimentConfig, output_dir=None) -> ExperimentSummary:
    """Run seeds seed0 ... seed0+n_seeds-1, writing one trace file per run
    plus summary.json. A failing seed is recorded and does not abort the
    remaining seeds."""
    out = Path(
        output_dir
        if output_dir is not None
        else os.environ.get(OUTPUT_DIR_ENV, config.output_dir)
    )
    out.mkdir(parents=True, exist_ok=True)
    per_seed = []
    finals = []
    for seed in range(config.seed0, config.seed0 + config.n_seeds):
        entry = {"seed": seed, "trace": f"trace_seed{seed}.csv"}
        try:
            trace = run_one(config, seed)
        except Exception as err:  # per-seed isolation
            partial = getattr(err, "trace", None)
            if partial is not None:
                write_trace(out / entry["trace"], partial)
            entry.update(status="error", error=str(err))
            per_seed.append(entry)
            continue
        write_trace(out / entry["trace"], trace)
        last = trace.records[-1]
        entry.update(
            status="ok",
            final_err_sq=last.err_sq,
            final_f_best=last.f_best,
            eval_count=last.eval_count,
        )
        if config.target_err_sq is not None and last.err_sq is not None:
            entry["passed"] = bool(last.err_sq <= config.target_err_sq)
        if last.err_sq is not None:
            finals.append(last.err_sq)
        per_seed.append(entry)
    summary = ExperimentSummary(
        solver=config.solver,
        objective=config.objective_name,
        dim=config.dim,
        n_seeds=config.n_seeds,
        seed0=config.seed0,
        target_err_sq=config.target_err_sq,
        per_seed=per_seed,
        median_final_err_sq=float(np.median(finals)) if finals else None,
        all_ok=all(e["status"] == "ok" for e in per_seed),
        output_dir=str(out),
    )
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary.to_json(), fh, indent=2)
    return summary


# --------------------------------------------------------------------------
# Rate fitting
# --------------------------------------------------------------------------


def fit_rate(trace: RunTrace, window: Optional[tuple[int, int]] = None) -> RateFit:
    """Least-squares slope of log err_sq against k.

    The default window drops the first 10% of iterations as transient.
    The series is truncated before the first exact zero (log undefined);
    fewer than 3 usable points is an error.
    """
    series = [(r.k, r.err_sq) for r in trace.records if r.err_sq is not None]
    if not series:
        raise ValueError("trace has no squared-error column to fit")
    if window is None:
        drop = math.ceil(0.1 * len(series))
        series = series[drop:]
    else:
        a, b = window
        series = [(k, e) for k, e in series if a <= k <= b]
    truncated = []
    for k, e in series:
        if e <= 0.0:
            break
        truncated.append((k, e))
    if len(truncated) < 3:
        raise ValueError("rate fit needs at least 3 positive squared-error values")
    ks = np.array([k for k, _ in truncated], dtype=float)
    ys = np.log([e for _, e in truncated])
    slope, intercept = np.polyfit(ks, ys, 1)
    resid = ys - (slope * ks + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ys - ys.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(
        rho_hat=float(np.exp(slope)),
        r_squared=r_squared,
        window=(int(ks[0]), int(ks[-1])),
    )


# --------------------------------------------------------------------------
# Comparison
# --------------------------------------------------------------------------


def _solver_family(name: str) -> str:
    return "app" if name.startswith("app") else "de"


@dataclass
class ComparisonTable:
    solver_a: str
    solver_b: str
    budgets: list[int]
    median_a: list[float]
    median_b: list[float]
    final_budget: int
    finals_a: list[float]
    finals_b: list[float]
    wins_a: int
    wins_b: int
    ties: int
    verdict: str

    def write_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# solver_a={self.solver_a}\n# solver_b={self.solver_b}\n")
            fh.write(f"# verdict={self.verdict}\n")
            writer = csv.writer(fh)
            writer.writerow(["eval_count", "median_err_sq_a", "median_err_sq_b"])
            for row in zip(self.budgets, self.median_a, self.median_b):
                writer.writerow([row[0], repr(row[1]), repr(row[2])])


def _err_at_budget(trace: RunTrace, budget: int) -> float:
    value = None
    for r in trace.records:
        if r.eval_count <= budget:
            value = r.err_sq
        else:
            break
    if value is None:  # budget precedes the first record; report initialization
        value = trace.records[0].err_sq
    if value is None:
        raise ValueError("comparison requires a known minimizer (err_sq column)")
    return value


def compare(config_a: ExperimentConfig, config_b: ExperimentConfig) -> ComparisonTable:
    """Run both sides seed-by-seed, align on cumulative evaluation count,
    and report median squared errors plus a dominance verdict at the
    largest budget both sides reached."""
    if (config_a.objective_name, config_a.dim) != (config_b.objective_name, config_b.dim):
        raise ValueError("mismatched objectives")
    n_pairs = min(config_a.n_seeds, config_b.n_seeds)
    seeds_a = range(config_a.seed0, config_a.seed0 + n_pairs)
    seeds_b = range(config_b.seed0, config_b.seed0 + n_pairs)
    traces_a = [run_one(config_a, s) for s in seeds_a]
    traces_b = [run_one(config_b, s) for s in seeds_b]

    final_budget = min(t.records[-1].eval_count for t in traces_a + traces_b)
    grid = sorted(
        {r.eval_count for t in traces_a + traces_b for r in t.records if r.eval_count <= final_budget}
    )
    median_a = [float(np.median([_err_at_budget(t, b) for t in traces_a])) for b in grid]
    median_b = [float(np.median([_err_at_budget(t, b) for t in traces_b])) for b in grid]
    finals_a = [_err_at_budget(t, final_budget) for t in traces_a]
    finals_b = [_err_at_budget(t, final_budget) for t in traces_b]
    med_a, med_b = float(np.median(finals_a)), float(np.median(finals_b))
    if med_a < med_b:
        verdict = _solver_family(config_a.solver)
    elif med_b < med_a:
        verdict = _solver_family(config_b.solver)
    else:
        verdict = "tie"
    wins_a = sum(1 for fa, fb in zip(finals_a, finals_b) if fa < fb)
    wins_b = sum(1 for fa, fb in zip(finals_a, finals_b) if fb < fa)
    return ComparisonTable(
        solver_a=config_a.solver,
        solver_b=config_b.solver,
        budgets=grid,
        median_a=median_a,
        median_b=median_b,
        final_budget=final_budget,
        finals_a=finals_a,
        finals_b=finals_b,
        wins_a=wins_a,
        wins_b=wins_b,
        ties=n_pairs - wins_a - wins_b,
        verdict=verdict,
    )


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_error: float
    detail: str


@dataclass
class ValidationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def format(self) -> str:
        lines = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            lines.append(f"{status} {c.name}: max_error={c.max_error:.3e} ({c.detail})")
        lines.append("validation " + ("passed" if self.passed else "FAILED"))
        return "\n".join(lines)


def _draw_integral_params(rng: np.random.Generator, d: int) -> analysis.GaussianIntegralParams:
    while True:
        alpha, beta, gamma = rng.uniform(-2.0, 2.0, size=3)
        if alpha * (beta + gamma) < 0.2:
            continue
        u = rng.uniform(-1.0, 1.0, size=d)
        v = rng.uniform(-1.0, 1.0, size=d)
        diff = u - v
        # Keep the exponential prefactor within float range on both routes.
        if abs(alpha * beta * gamma) * float(diff @ diff) / (2.0 * abs(beta + gamma)) > 50.0:
            continue
        return analysis.GaussianIntegralParams(alpha=alpha, beta=beta, gamma=gamma, u=u, v=v)


def check_lemma1(
    seed: int = 0,
    sets_per_dim: int = 20,
    tol: float = 1e-8,
    i1_impl=None,
    i2_impl=None,
) -> CheckResult:
    """Closed forms against the refined quadrature twin; the *_impl hooks
    exist so a deliberately wrong implementation is visibly reported."""
    i1_impl = i1_impl or analysis.gaussian_integral_i1
    i2_impl = i2_impl or analysis.gaussian_integral_i2
    rng = np.random.default_rng(seed)
    worst = 0.0
    for d in (1, 2, 3):
        for _ in range(sets_per_dim):
            p = _draw_integral_params(rng, d)
            for which, impl in ((1, i1_impl), (2, i2_impl)):
                reference = analysis.gaussian_integral_quadrature(p, which=which)
                err = abs(impl(p) - reference) / abs(reference)
                worst = max(worst, err)
    return CheckResult(
        name="lemma1_integrals",
        passed=worst <= tol,
        max_error=worst,
        detail=f"{3 * sets_per_dim} parameter sets, d in (1,2,3), tol {tol:g}",
    )


THEOREM1_PAIRS = ((0.3, 0.5), (-0.45, 1.0), (0.8, 2.0))


def check_theorem1(tol: float = 1e-3, alpha_max: int = 4096) -> CheckResult:
    """Sharpness sweep of the proximal-point ratio against the grid oracle
    on both one-dimensional benchmark objectives. Reports the largest
    final gap and the largest of the smallest tested sharpness values that
    reached the tolerance (no theoretical threshold is claimed)."""
    worst = 0.0
    alpha_needed = 0
    for name in ("fig1_left", "fig1_right"):
        objective = get_objective(name, 1)
        for p, lam in THEOREM1_PAIRS:
            oracle = analysis.proximal_point_bruteforce(
                objective, np.array([p]), lam, grid_radius=1.5, grid_step=1e-4
            )[0]
            alpha, gap, first_hit = 1, math.inf, None
            while alpha <= alpha_max:
                gap = abs(
                    analysis.asymptotic_ratio_estimate(objective, p, lam, float(alpha)) - oracle
                )
                if first_hit is None and gap <= tol:
                    first_hit = alpha
                alpha *= 2
            worst = max(worst, gap)
            alpha_needed = max(alpha_needed, first_hit if first_hit is not None else alpha_max + 1)
    return CheckResult(
        name="theorem1_proximal_limit",
        passed=worst <= tol,
        max_error=worst,
        detail=(
            f"alpha doubling to {alpha_max}; smallest tested alpha reaching "
            f"{tol:g} across cases: {alpha_needed}"
        ),
    )


def check_mk_envelope(n_seeds: int = 10, n_samples: int = 100_000) -> CheckResult:
    """Monte Carlo value spread stays inside the closed-form envelope on
    the sphere objective with the iterate on the shrinking error shell."""
    lam, rho, M = 1.0, 0.9, 1.0
    d = 2
    objective = get_objective("sphere", d)
    worst = 0.0
    passed = True
    rng = np.random.default_rng(20240)
    for seed in range(n_seeds):
        direction = rng.standard_normal(d)
        direction /= np.linalg.norm(direction)
        for k in range(4):
            x_k = math.sqrt(rho**k * M) * direction
            lower, upper = analysis.mk_bounds(2.0, 2.0, lam, M, d, rho, k)
            m_hat = analysis.mk_monte_carlo(
                objective, x_k, 0.0, rho**k / lam, n_samples, seed=seed * 7 + k
            )
            if not lower <= m_hat <= upper:
                passed = False
                worst = max(worst, lower - m_hat, m_hat - upper)
    return CheckResult(
        name="mk_envelope",
        passed=passed,
        max_error=worst,
        detail=f"sphere, k in 0..3, {n_seeds} seeds, n={n_samples}",
    )


def check_rho_lambda_monotone() -> CheckResult:
    """The contraction condition must grow with lambda and with M."""
    l, L, d = 1.0, 2.0, 3
    lams = np.linspace(0.01, 0.5, 25)
    values = [analysis.rho_lambda(l, L, lam, 1.0, d) for lam in lams]
    worst = 0.0
    ok = True
    for a, b in zip(values, values[1:]):
        if b <= a:
            ok = False
            worst = max(worst, a - b)
    ms = np.linspace(0.0, 5.0, 25)
    values_m = [analysis.rho_lambda(l, L, 0.2, m, d) for m in ms]
    for a, b in zip(values_m, values_m[1:]):
        if b <= a:
            ok = False
            worst = max(worst, a - b)
    return CheckResult(
        name="rho_lambda_monotone",
        passed=ok,
        max_error=worst,
        detail="strictly increasing on lambda and M grids",
    )


def validate(i1_impl=None, i2_impl=None, seed: int = 0) -> ValidationReport:
    """Run every oracle self-check; individual failures are aggregated,
    never aborting the suite."""
    checks = [
        check_lemma1(seed=seed, i1_impl=i1_impl, i2_impl=i2_impl),
        check_theorem1(),
        check_mk_envelope(),
        check_rho_lambda_monotone(),
    ]
    return ValidationReport(checks=checks)
