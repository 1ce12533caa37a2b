"""Simulation experiments, CSV reporting, and visitation analysis.

Drives the line optimizer against simulated subjects over repeated runs,
aggregates traces, times iterations for scaling comparisons against the
full-grid baseline, and correlates where the optimizer spent its queries
with where the posterior believes utility is high.

All CSV floats are written with 17 significant digits so reruns with the
same seed reproduce files byte-for-byte (timing columns excepted).
"""

from __future__ import annotations

import csv
import dataclasses
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .actions import unit_space
from .gp import GpConfig, PriorFactor
from .objectives import ObjectiveKind, ObjectiveSpec, PreferenceSide, SimSubject
from .optimizer import (GRID_POINT_LIMIT, FeedbackBundle, LineOptimizer,
                        Preference, make_grid, run_baseline_grid)

_POLY_STREAM = 7919  # keeps polynomial seeds clear of per-run streams


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, str) else v
                             for v in row])


@dataclass
class ExperimentConfig:
    objective: str = "hartmann3"   # hartmann3 | hartmann6 | polynomial | polynomial2
    dims: int | None = None        # required for polynomial
    granularity: int = 30
    iterations: int = 100
    runs: int = 30
    noise: float = 0.0             # preference noise scale of the subject
    coactive: bool = False
    seed: int = 0
    poly_count: int | None = None  # cycle this many polynomials across runs
    out: Path | None = None
    gp: GpConfig = field(default_factory=GpConfig)

    def resolved_dims(self) -> int:
        if self.objective == "hartmann3":
            return 3
        if self.objective == "hartmann6":
            return 6
        if self.objective in ("polynomial", "polynomial2"):
            if self.dims is None:
                raise ValueError("polynomial objective requires dims")
            return self.dims
        raise ValueError(f"unknown objective {self.objective!r}")


@dataclass
class RunTrace:
    """Everything recorded about one optimization run."""

    sampled_values: list[float]
    posterior_max_values: list[float]
    v_sizes: list[int]
    wall_seconds: list[float]
    visited: np.ndarray        # (T, d) proposed actions in order
    final_points: np.ndarray   # (P, d) points of the final posterior
    final_mean: np.ndarray     # (P,) posterior mean utility
    best_coords: np.ndarray
    best_value: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    runs: list[RunTrace]

    def sampled_matrix(self) -> np.ndarray:
        return np.array([r.sampled_values for r in self.runs])

    def posterior_max_matrix(self) -> np.ndarray:
        return np.array([r.posterior_max_values for r in self.runs])


def _objective_for_run(config: ExperimentConfig, run: int) -> ObjectiveSpec:
    if config.objective == "hartmann3":
        return ObjectiveSpec(ObjectiveKind.HARTMANN3)
    if config.objective == "hartmann6":
        return ObjectiveSpec(ObjectiveKind.HARTMANN6)
    if config.poly_count:
        poly_index = run % config.poly_count
    else:
        poly_index = run
    rng = np.random.default_rng([config.seed, _POLY_STREAM, poly_index])
    if config.objective == "polynomial2":
        return ObjectiveSpec.random_quadratic(config.resolved_dims(), rng)
    return ObjectiveSpec.random_polynomial(config.resolved_dims(), rng)


_PREF_OF_SIDE = {PreferenceSide.FIRST: Preference.FIRST_PREFERRED,
                 PreferenceSide.SECOND: Preference.SECOND_PREFERRED}


def run_single(objective: ObjectiveSpec, *, granularity: int, iterations: int,
               noise: float, coactive: bool, seed_key, gp: GpConfig) -> RunTrace:
    """One optimization run against a simulated subject.

    seed_key seeds two independent streams (optimizer, subject).  Wall
    times cover propose + absorb only, never the subject's answers.
    """
    dims = objective.dims
    rng_opt = np.random.default_rng([*seed_key, 0])
    rng_sub = np.random.default_rng([*seed_key, 1])
    subject = SimSubject(objective, rng_sub, noise=noise, coactive=coactive)
    opt = LineOptimizer(dims, granularity, gp, rng_opt)
    step = 1.0 / (granularity - 1)

    trace = RunTrace([], [], [], [], None, None, None, None, 0.0)
    visited = []
    for t in range(1, iterations + 1):
        tic = time.perf_counter()
        action = opt.propose_next()
        elapsed = time.perf_counter() - tic

        if t >= 2:
            pref = _PREF_OF_SIDE[subject.preference(action, opt.last_action)]
        else:
            pref = Preference.NO_PREFERENCE
        improved = subject.coactive_suggestion(action, step)

        tic = time.perf_counter()
        opt.absorb_feedback(action, FeedbackBundle(pref, improved))
        elapsed += time.perf_counter() - tic

        trace.sampled_values.append(subject.value(action))
        trace.posterior_max_values.append(subject.value(opt.incumbent))
        trace.v_sizes.append(len(opt.posterior))
        trace.wall_seconds.append(elapsed)
        visited.append(action.coords)

    final = opt.evidence_posterior()
    best_idx = int(np.argmax(final.mean))
    trace.visited = np.array(visited)
    trace.final_points = np.stack([p.coords for p in final.points])
    trace.final_mean = np.asarray(final.mean)
    trace.best_coords = final.points[best_idx].coords
    trace.best_value = subject.value(final.points[best_idx])
    return trace


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Repeated runs with seeds derived from config.seed + run index."""
    runs = []
    for run in range(config.runs):
        objective = _objective_for_run(config, run)
        runs.append(run_single(
            objective, granularity=config.granularity,
            iterations=config.iterations, noise=config.noise,
            coactive=config.coactive, seed_key=(config.seed, run),
            gp=config.gp))
    result = ExperimentResult(config, runs)
    if config.out is not None:
        write_experiment_csvs(result, Path(config.out))
    return result


def write_experiment_csvs(result: ExperimentResult, out: Path) -> None:
    config = result.config
    dims = config.resolved_dims()
    coord_names = [f"x{i}" for i in range(dims)]

    trace_rows = []
    visit_rows = []
    posterior_rows = []
    summary_rows = []
    for run, tr in enumerate(result.runs):
        for t in range(len(tr.sampled_values)):
            trace_rows.append((run, t + 1, tr.sampled_values[t],
                               tr.posterior_max_values[t], tr.v_sizes[t],
                               tr.wall_seconds[t] * 1e3))
            visit_rows.append((run, t + 1, *tr.visited[t]))
        for point, mu in zip(tr.final_points, tr.final_mean):
            posterior_rows.append((run, *point, mu))
        summary_rows.append((run, tr.best_value, *tr.best_coords))

    _write_csv(out / "trace.csv",
               ["run", "t", "sampled_obj", "posterior_max_obj", "v_size",
                "wall_ms"], trace_rows)
    _write_csv(out / "visits.csv", ["run", "t", *coord_names], visit_rows)
    _write_csv(out / "posterior.csv", ["run", *coord_names, "mean"],
               posterior_rows)
    _write_csv(out / "summary.csv", ["run", "best_obj", *coord_names],
               summary_rows)

    sampled = result.sampled_matrix()
    agg_rows = [(t + 1, sampled[:, t].mean(), sampled[:, t].std())
                for t in range(sampled.shape[1])]
    _write_csv(out / "aggregate.csv", ["t", "mean", "sd"], agg_rows)


def run_noise_sweep(config: ExperimentConfig,
                    noise_levels: list[float]) -> dict[float, ExperimentResult]:
    """The same experiment at several subject noise scales.

    Per-level artifacts land in out/ch_<level>/; the combined
    noise_sweep.csv aggregates the posterior-max objective per iteration.
    """
    results = {}
    sweep_rows = []
    for level in noise_levels:
        sub = dataclasses.replace(
            config, noise=level,
            out=(Path(config.out) / f"ch_{level:g}"
                 if config.out is not None else None))
        result = run_experiment(sub)
        results[level] = result
        pm = result.posterior_max_matrix()
        for t in range(pm.shape[1]):
            sweep_rows.append((level, t + 1, pm[:, t].mean(), pm[:, t].std()))
    if config.out is not None:
        _write_csv(Path(config.out) / "noise_sweep.csv",
                   ["ch", "t", "mean", "sd"], sweep_rows)
    return results


@dataclass
class ScalingRow:
    algo: str          # "line" or "grid"
    dims: int
    mean_iter_ms: float | None
    skipped: bool


def run_scaling(dims_list: list[int], granularity: int = 10,
                iterations: int = 20, runs: int = 5, seed: int = 0,
                out: Path | None = None,
                gp: GpConfig | None = None) -> list[ScalingRow]:
    """Per-iteration wall time of line search vs the full-grid baseline.

    Grid dimensions whose m^d exceeds the point guard produce a skipped
    row.  The grid prior factorization is computed once per dimension
    and shared across runs; it is setup, not iteration time.
    """
    gp = gp if gp is not None else GpConfig()
    rows = []
    for d in dims_list:
        walls = []
        for run in range(runs):
            rng = np.random.default_rng([seed, _POLY_STREAM, d * 1000 + run])
            objective = ObjectiveSpec.random_polynomial(d, rng)
            tr = run_single(objective, granularity=granularity,
                            iterations=iterations, noise=0.0, coactive=False,
                            seed_key=(seed, d, run), gp=gp)
            walls.extend(tr.wall_seconds)
        rows.append(ScalingRow("line", d, float(np.mean(walls)) * 1e3, False))

    for d in dims_list:
        if granularity ** d > GRID_POINT_LIMIT:
            rows.append(ScalingRow("grid", d, None, True))
            continue
        space = unit_space(d, granularity)
        prior = PriorFactor.from_coords(make_grid(d, granularity), gp)
        walls = []
        for run in range(runs):
            rng = np.random.default_rng([seed, _POLY_STREAM, d * 1000 + run])
            objective = ObjectiveSpec.random_polynomial(d, rng)
            subject = SimSubject(
                objective, np.random.default_rng([seed, d, run, 1]))
            tr = run_baseline_grid(space, subject, iterations,
                                   np.random.default_rng([seed, d, run, 0]),
                                   gp, prior=prior)
            walls.extend(tr.iteration_seconds)
        rows.append(ScalingRow("grid", d, float(np.mean(walls)) * 1e3, False))

    if out is not None:
        _write_csv(Path(out) / "scaling.csv",
                   ["algo", "d", "mean_iter_ms", "skipped"],
                   [(r.algo, r.dims, r.mean_iter_ms, int(r.skipped))
                    for r in rows])
    return rows


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 400):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            return h
    raise RuntimeError("incomplete beta continued fraction did not converge")


def _betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def pearson_r_p(x, y) -> tuple[float, float]:
    """Pearson correlation and two-sided p-value (t distribution).

    Returns (nan, nan) when either input has zero variance.  The p-value
    uses the exact identity p = I_{nu/(nu+t^2)}(nu/2, 1/2) with
    nu = n - 2 degrees of freedom.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 3:
        raise ValueError("need two equal-length vectors of at least 3 points")
    xm = x - x.mean()
    ym = y - y.mean()
    sx = float(np.sqrt(np.dot(xm, xm)))
    sy = float(np.sqrt(np.dot(ym, ym)))
    if sx == 0.0 or sy == 0.0:
        return math.nan, math.nan
    r = float(np.dot(xm, ym) / (sx * sy))
    r = max(-1.0, min(1.0, r))
    nu = x.size - 2
    if abs(r) == 1.0:
        return r, 0.0
    t2 = r * r * nu / (1.0 - r * r)
    return r, _betainc_reg(nu / 2.0, 0.5, nu / (nu + t2))


def visitation_correlation(visited: np.ndarray, posterior_points: np.ndarray,
                           posterior_means: np.ndarray, bins: int = 10):
    """Per-dimension binned visit counts vs mean posterior utility.

    Returns (rows, r, p) where rows are (dim, bin, visits, mean_utility)
    tuples; bins without posterior points have mean_utility None and are
    excluded from the correlation.
    """
    visited = np.atleast_2d(np.asarray(visited, dtype=float))
    posterior_points = np.atleast_2d(np.asarray(posterior_points, dtype=float))
    posterior_means = np.asarray(posterior_means, dtype=float)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    dims = visited.shape[1]
    edges = np.linspace(0.0, 1.0, bins + 1)

    rows = []
    counts, utilities = [], []
    for dim in range(dims):
        vbin = np.clip(np.digitize(visited[:, dim], edges) - 1, 0, bins - 1)
        pbin = np.clip(np.digitize(posterior_points[:, dim], edges) - 1,
                       0, bins - 1)
        for b in range(bins):
            visits = int(np.sum(vbin == b))
            mask = pbin == b
            if mask.any():
                utility = float(posterior_means[mask].mean())
                counts.append(visits)
                utilities.append(utility)
            else:
                utility = None
            rows.append((dim, b, visits, utility))
    if len(counts) < 3:
        return rows, math.nan, math.nan
    r, p = pearson_r_p(counts, utilities)
    return rows, r, p


def write_correlation_csv(path: Path, rows, r: float, p: float) -> None:
    """Data rows then footer rows labeled r and p in the first column."""
    out_rows = list(rows) + [("r", _fmt(r), "", ""), ("p", _fmt(p), "", "")]
    _write_csv(Path(path), ["dim", "bin", "visits", "mean_utility"], out_rows)


def load_visits_csv(path: Path) -> np.ndarray:
    """Pooled visited coordinates from a visits.csv (drops run/t columns)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        coord_cols = [i for i, name in enumerate(header)
                      if name not in ("run", "t")]
        data = [[float(row[i]) for i in coord_cols] for row in reader]
    return np.array(data)


def load_posterior_csv(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """Pooled posterior points and means from a posterior.csv."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        coord_cols = [i for i, name in enumerate(header)
                      if name not in ("run", "mean")]
        mean_col = header.index("mean")
        points, means = [], []
        for row in reader:
            points.append([float(row[i]) for i in coord_cols])
            means.append(float(row[mean_col]))
    return np.array(points), np.array(means)
