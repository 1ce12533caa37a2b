"""Experiment harness tests: CSV artifacts, determinism, correlation."""
import csv
import math
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from prefline import (
    ExperimentConfig,
    pearson_r_p,
    run_experiment,
    run_noise_sweep,
    run_scaling,
    visitation_correlation,
)
from prefline.experiments import (
    load_posterior_csv,
    load_visits_csv,
    write_correlation_csv,
)

SMALL = dict(objective="hartmann3", granularity=8, iterations=4, runs=2)


def _read(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


# -- run_experiment and CSV artifacts -----------------------------------


def test_trace_row_count_and_headers(tmp_path):
    result = run_experiment(ExperimentConfig(**SMALL, seed=3, out=tmp_path))
    header, rows = _read(tmp_path / "trace.csv")
    assert header == ["run", "t", "sampled_obj", "posterior_max_obj",
                      "v_size", "wall_ms"]
    assert len(rows) == 2 * 4
    for row in rows:
        t = int(row[1])
        assert 1 <= t <= 4
        assert int(row[4]) <= 8 + 2 * (t - 1)

    assert _read(tmp_path / "aggregate.csv")[0] == ["t", "mean", "sd"]
    assert _read(tmp_path / "visits.csv")[0] == ["run", "t", "x0", "x1", "x2"]
    assert _read(tmp_path / "posterior.csv")[0] == ["run", "x0", "x1", "x2",
                                                   "mean"]
    assert _read(tmp_path / "summary.csv")[0] == ["run", "best_obj",
                                                  "x0", "x1", "x2"]
    assert result.sampled_matrix().shape == (2, 4)


def test_floats_roundtrip_seventeen_digits(tmp_path):
    run_experiment(ExperimentConfig(**SMALL, seed=4, out=tmp_path))
    _, rows = _read(tmp_path / "trace.csv")
    for row in rows:
        cell = row[2]
        assert cell == f"{float(cell):.17g}"


def test_aggregate_matches_recomputation(tmp_path):
    run_experiment(ExperimentConfig(**SMALL, seed=5, out=tmp_path))
    _, trace = _read(tmp_path / "trace.csv")
    _, agg = _read(tmp_path / "aggregate.csv")
    by_t: dict[int, list[float]] = {}
    for row in trace:
        by_t.setdefault(int(row[1]), []).append(float(row[2]))
    assert len(agg) == 4
    for row in agg:
        vals = np.array(by_t[int(row[0])])
        assert float(row[1]) == pytest.approx(vals.mean(), abs=1e-9)
        assert float(row[2]) == pytest.approx(vals.std(), abs=1e-9)


def test_rerun_byte_identical_except_timing(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        run_experiment(ExperimentConfig(**SMALL, seed=6, out=out))
    for name in ("visits.csv", "posterior.csv", "summary.csv",
                 "aggregate.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    ha, ra = _read(a / "trace.csv")
    hb, rb = _read(b / "trace.csv")
    keep = [i for i, name in enumerate(ha) if name != "wall_ms"]
    assert ha == hb
    assert [[r[i] for i in keep] for r in ra] == \
        [[r[i] for i in keep] for r in rb]


def test_loaders_roundtrip(tmp_path):
    result = run_experiment(ExperimentConfig(**SMALL, seed=7, out=tmp_path))
    visits = load_visits_csv(tmp_path / "visits.csv")
    want = np.vstack([tr.visited for tr in result.runs])
    np.testing.assert_array_equal(visits, want)
    points, means = load_posterior_csv(tmp_path / "posterior.csv")
    np.testing.assert_array_equal(
        points, np.vstack([tr.final_points for tr in result.runs]))
    np.testing.assert_array_equal(
        means, np.concatenate([tr.final_mean for tr in result.runs]))


def test_polynomial_objectives_resolve():
    cfg = ExperimentConfig(objective="polynomial", dims=2, granularity=6,
                           iterations=2, runs=2, seed=8)
    assert len(run_experiment(cfg).runs) == 2
    cfg2 = ExperimentConfig(objective="polynomial2", dims=2, granularity=6,
                            iterations=2, runs=1, seed=8)
    assert len(run_experiment(cfg2).runs) == 1
    with pytest.raises(ValueError):
        ExperimentConfig(objective="polynomial").resolved_dims()
    with pytest.raises(ValueError):
        ExperimentConfig(objective="nope").resolved_dims()


# -- noise sweep --------------------------------------------------------


def test_noise_sweep_rows_and_ideal_level(tmp_path):
    cfg = ExperimentConfig(**SMALL, seed=9, out=tmp_path)
    results = run_noise_sweep(cfg, [0.0, 0.5])
    header, rows = _read(tmp_path / "noise_sweep.csv")
    assert header == ["ch", "t", "mean", "sd"]
    assert len(rows) == 2 * 4
    assert (tmp_path / "ch_0" / "trace.csv").exists()
    assert (tmp_path / "ch_0.5" / "trace.csv").exists()
    # the zero-noise leg is exactly a plain ideal-feedback experiment
    plain = run_experiment(ExperimentConfig(**SMALL, seed=9))
    np.testing.assert_array_equal(results[0.0].posterior_max_matrix(),
                                  plain.posterior_max_matrix())


# -- scaling ------------------------------------------------------------


def test_scaling_rows_and_guard(tmp_path):
    rows = run_scaling([1, 5], granularity=10, iterations=3, runs=1,
                       seed=0, out=tmp_path)
    by_key = {(r.algo, r.dims): r for r in rows}
    assert not by_key[("line", 1)].skipped
    assert not by_key[("line", 5)].skipped
    assert not by_key[("grid", 1)].skipped
    guard = by_key[("grid", 5)]   # 10^5 grid points exceed the guard
    assert guard.skipped and guard.mean_iter_ms is None

    header, data = _read(tmp_path / "scaling.csv")
    assert header == ["algo", "d", "mean_iter_ms", "skipped"]
    skipped_row = next(r for r in data if r[0] == "grid" and r[1] == "5")
    assert skipped_row[2] == "" and skipped_row[3] == "1"


# -- Pearson r / p ------------------------------------------------------


def test_pearson_matches_scipy_on_random_fixtures():
    rng = np.random.default_rng(123)
    for k in range(20):
        n = int(rng.integers(5, 101))
        x = rng.standard_normal(n)
        y = 0.4 * x + rng.standard_normal(n) * (0.1 + k / 10)
        r, p = pearson_r_p(x, y)
        want = stats.pearsonr(x, y)
        assert abs(r - want.statistic) < 1e-10
        assert abs(p - want.pvalue) < 1e-10


def test_pearson_edge_cases():
    x = np.arange(10.0)
    r, p = pearson_r_p(x, 2.0 * x + 1.0)
    assert r == 1.0 and p == 0.0
    r, p = pearson_r_p(x, -x)
    assert r == -1.0 and p == 0.0
    r, p = pearson_r_p(x, np.full(10, 3.3))
    assert math.isnan(r) and math.isnan(p)
    with pytest.raises(ValueError):
        pearson_r_p(np.array([1.0, 2.0]), np.array([3.0, 4.0]))
    with pytest.raises(ValueError):
        pearson_r_p(x, x[:5])


# -- visitation correlation ---------------------------------------------


def test_visitation_perfectly_proportional():
    visited = np.array([[0.1]] * 1 + [[0.5]] * 2 + [[0.9]] * 3)
    points = np.array([[0.1], [0.5], [0.9]])
    means = np.array([10.0, 20.0, 30.0])
    rows, r, p = visitation_correlation(visited, points, means, bins=3)
    assert [row[2] for row in rows] == [1, 2, 3]
    assert r == pytest.approx(1.0, abs=1e-12)
    assert p < 1e-6


def test_visitation_constant_utility_undefined():
    visited = np.array([[0.1], [0.5], [0.9]])
    points = np.array([[0.1], [0.5], [0.9]])
    rows, r, p = visitation_correlation(visited, points, np.full(3, 2.0),
                                        bins=3)
    assert math.isnan(r) and math.isnan(p)
    assert len(rows) == 3


def test_visitation_empty_bins_excluded():
    visited = np.array([[0.05], [0.55], [0.95], [0.96]])
    points = np.array([[0.05], [0.55], [0.95]])
    means = np.array([1.0, 2.0, 3.0])
    rows, r, p = visitation_correlation(visited, points, means, bins=5)
    utilities = [row[3] for row in rows]
    assert utilities.count(None) == 2
    assert not math.isnan(r)


def test_visitation_too_few_populated_bins():
    visited = np.array([[0.1], [0.2]])
    points = np.array([[0.1]])
    rows, r, p = visitation_correlation(visited, points, np.array([1.0]),
                                        bins=4)
    assert math.isnan(r) and math.isnan(p)
    assert len(rows) == 4
    with pytest.raises(ValueError):
        visitation_correlation(visited, points, np.array([1.0]), bins=1)


def test_correlation_csv_footer(tmp_path):
    visited = np.array([[0.1]] * 2 + [[0.5]] * 3 + [[0.9]] * 4)
    points = np.array([[0.1], [0.5], [0.9]])
    rows, r, p = visitation_correlation(visited, points,
                                        np.array([1.0, 5.0, 9.0]), bins=3)
    out = tmp_path / "correlation.csv"
    write_correlation_csv(out, rows, r, p)
    header, data = _read(out)
    assert header == ["dim", "bin", "visits", "mean_utility"]
    assert data[-2][0] == "r" and data[-1][0] == "p"
    assert float(data[-2][1]) == pytest.approx(r)
    assert float(data[-1][1]) == pytest.approx(p)
    assert len(data) == 3 + 2
