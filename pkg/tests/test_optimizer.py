"""Main-loop tests: proposals, feedback bookkeeping, bounds, baseline."""
import numpy as np
import pytest
from scipy import stats

from prefline import (
    FeedbackBundle,
    FeedbackSource,
    GridTooLarge,
    LineOptimizer,
    ObjectiveKind,
    ObjectiveSpec,
    Preference,
    SimSubject,
    StaleFeedback,
    run_baseline_grid,
)
from prefline.actions import unit_space
from prefline.lines import discretize_line


def _drive(opt, value, rounds):
    """Run `rounds` iterations with an ideal subject given by `value`."""
    for _ in range(rounds):
        a = opt.propose_next()
        pref = (Preference.FIRST_PREFERRED if value(a) > value(opt.last_action)
                else Preference.SECOND_PREFERRED)
        opt.absorb_feedback(a, FeedbackBundle(pref))


# -- first-iteration proposal distribution ------------------------------


@pytest.fixture(scope="module")
def first_proposal_counts():
    """Position of the t=1 proposal on its line, 5000 full-length lines."""
    counts = np.zeros(10)
    seed, used = 0, 0
    while used < 5000:
        opt = LineOptimizer(2, 10, rng=seed)
        seed += 1
        a = opt.propose_next()
        pts = opt.current_line.points
        if len(pts) != 10:
            continue
        counts[next(i for i, p in enumerate(pts) if p.id == a.id)] += 1
        used += 1
    return counts


def test_first_proposal_hits_every_position(first_proposal_counts):
    assert first_proposal_counts.sum() == 5000
    assert first_proposal_counts.min() > 0


def test_first_proposal_symmetric_under_reversal(first_proposal_counts):
    # the prior has no preferred line direction, so position i and its
    # mirror 9-i must be equally likely
    c = first_proposal_counts
    chi2 = sum((c[i] - c[9 - i]) ** 2 / (c[i] + c[9 - i]) for i in range(5))
    assert stats.chi2.sf(chi2, df=5) > 0.01


@pytest.mark.xfail(
    strict=True,
    reason="argmax of a draw from a smoothly correlated prior favors the "
    "segment endpoints; uniformity over positions holds only for "
    "uncorrelated draws")
def test_first_proposal_uniform_over_positions(first_proposal_counts):
    assert stats.chisquare(first_proposal_counts).pvalue > 0.01


# -- Thompson concentration ---------------------------------------------


def test_proposal_mean_rank_concentrates():
    """After many records favoring one region, the sampled argmax lands
    in the top half of the posterior-mean ranking in >= 90% of seeds."""
    target = np.array([0.7, 0.3])

    def top_half(seed):
        opt = LineOptimizer(2, 10, rng=seed)
        value = lambda a: -float(np.sum((a.coords - target) ** 2))
        _drive(opt, value, 45)
        a = opt.propose_next()
        mean = opt.posterior.mean
        k = next(i for i, p in enumerate(opt.posterior.points)
                 if p.id == a.id)
        return np.sum(mean > mean[k]) < len(mean) / 2

    hits = sum(top_half(s) for s in range(1000))
    assert hits >= 900


# -- feedback bookkeeping -----------------------------------------------


def test_first_iteration_skips_preference():
    opt = LineOptimizer(3, 8, rng=0)
    a = opt.propose_next()
    opt.absorb_feedback(a, FeedbackBundle(Preference.FIRST_PREFERRED))
    assert len(opt.dataset) == 0
    assert opt.iteration == 2
    b = opt.propose_next()
    opt.absorb_feedback(b, FeedbackBundle(Preference.FIRST_PREFERRED,
                                          source=FeedbackSource.HUMAN))
    assert len(opt.dataset) == 1
    rec = opt.dataset.records[0]
    assert rec.winner.id == b.id and rec.loser.id == a.id
    assert rec.source is FeedbackSource.HUMAN


def test_second_preferred_orientation():
    opt = LineOptimizer(2, 8, rng=1)
    a = opt.propose_next()
    opt.absorb_feedback(a, FeedbackBundle(Preference.NO_PREFERENCE))
    b = opt.propose_next()
    opt.absorb_feedback(b, FeedbackBundle(Preference.SECOND_PREFERRED))
    rec = opt.dataset.records[0]
    assert rec.winner.id == a.id and rec.loser.id == b.id


def test_no_preference_keeps_dataset():
    opt = LineOptimizer(2, 8, rng=2)
    for _ in range(3):
        a = opt.propose_next()
        pre = opt.posterior
        opt.absorb_feedback(a, FeedbackBundle(Preference.NO_PREFERENCE))
        # incumbent still recomputed from the pre-feedback posterior mean
        k = int(np.argmax(pre.mean))
        assert opt.incumbent.id == pre.points[k].id
    assert len(opt.dataset) == 0


def test_coactive_recorded_even_at_t1():
    opt = LineOptimizer(2, 8, rng=3)
    a = opt.propose_next()
    nudge = np.clip(a.coords + np.array([0.05, 0.0]), 0.0, 1.0)
    opt.absorb_feedback(a, FeedbackBundle(Preference.NO_PREFERENCE,
                                          coactive=nudge))
    assert len(opt.dataset) == 1
    rec = opt.dataset.records[0]
    assert rec.loser.id == a.id
    assert rec.source is FeedbackSource.COACTIVE
    np.testing.assert_allclose(rec.winner.coords, nudge)


def test_coactive_identical_to_proposal_ignored():
    opt = LineOptimizer(2, 8, rng=4)
    a = opt.propose_next()
    opt.absorb_feedback(a, FeedbackBundle(Preference.NO_PREFERENCE,
                                          coactive=a.coords.copy()))
    assert len(opt.dataset) == 0


def test_preference_plus_coactive_adds_two_records():
    opt = LineOptimizer(2, 8, rng=5)
    a = opt.propose_next()
    opt.absorb_feedback(a, FeedbackBundle(Preference.NO_PREFERENCE))
    b = opt.propose_next()
    before = len(opt.store)
    nudge = np.clip(b.coords + 0.03, 0.0, 1.0)
    opt.absorb_feedback(b, FeedbackBundle(Preference.FIRST_PREFERRED,
                                          coactive=nudge))
    assert len(opt.dataset) == 2
    assert len(opt.store) - before <= 1  # only the nudge can be new


def test_stale_feedback_paths():
    opt = LineOptimizer(2, 8, rng=6)
    with pytest.raises(StaleFeedback):
        opt.absorb_feedback(opt.incumbent,
                            FeedbackBundle(Preference.NO_PREFERENCE))
    a = opt.propose_next()
    with pytest.raises(StaleFeedback):
        opt.propose_next()
    wrong = opt.store.intern(np.array([0.123456, 0.654321]))
    if wrong.id != a.id:
        with pytest.raises(StaleFeedback):
            opt.absorb_feedback(wrong,
                                FeedbackBundle(Preference.NO_PREFERENCE))
    opt.absorb_feedback(a, FeedbackBundle(Preference.NO_PREFERENCE))
    with pytest.raises(StaleFeedback):
        opt.absorb_feedback(a, FeedbackBundle(Preference.NO_PREFERENCE))


def test_constructor_validation():
    with pytest.raises(ValueError):
        LineOptimizer(0, 10)
    with pytest.raises(ValueError):
        LineOptimizer(2, 1)


# -- structural invariants ----------------------------------------------


def test_candidate_set_bound_and_growth():
    opt = LineOptimizer(3, 8, rng=7)
    rng = np.random.default_rng(70)
    seen_ids: set[int] = set()
    for t in range(1, 26):
        a = opt.propose_next()
        assert len(opt.posterior.points) <= 8 + 2 * (t - 1)
        line_ids = {p.id for p in opt.current_line.points}
        ref_ids = {p.id for p in opt.dataset.referenced_actions()}
        assert a.id in line_ids | ref_ids
        bundle = FeedbackBundle(
            Preference.FIRST_PREFERRED if rng.random() < 0.5
            else Preference.SECOND_PREFERRED)
        if rng.random() < 0.3:
            bundle.coactive = np.clip(a.coords + 0.06 * rng.standard_normal(3),
                                      0.0, 1.0)
        opt.absorb_feedback(a, bundle)
        now = {p.id for p in opt.dataset.referenced_actions()}
        assert seen_ids <= now  # referenced actions never disappear
        seen_ids = now


def test_incumbent_maximizes_pre_update_mean():
    opt = LineOptimizer(2, 10, rng=8)
    value = lambda a: float(np.sum(a.coords))
    for _ in range(10):
        a = opt.propose_next()
        pre = opt.posterior
        pref = (Preference.FIRST_PREFERRED if value(a) > value(opt.last_action)
                else Preference.SECOND_PREFERRED)
        opt.absorb_feedback(a, FeedbackBundle(pref))
        k = int(np.argmax(pre.mean))
        assert opt.incumbent.id == pre.points[k].id


def test_identical_seeds_identical_traces():
    def trace(seed):
        opt = LineOptimizer(3, 9, rng=seed)
        value = lambda a: float(a.coords[0] - a.coords[2])
        out = []
        for _ in range(12):
            a = opt.propose_next()
            out.append((a.id, tuple(a.coords)))
            pref = (Preference.FIRST_PREFERRED
                    if value(a) > value(opt.last_action)
                    else Preference.SECOND_PREFERRED)
            opt.absorb_feedback(a, FeedbackBundle(pref))
        return out

    assert trace(42) == trace(42)
    assert trace(42) != trace(43)


def test_monotone_1d_reaches_best_visited():
    for seed in range(5):
        opt = LineOptimizer(1, 11, rng=seed)
        value = lambda a: float(a.coords[0])
        _drive(opt, value, 30)
        best = opt.posterior_max()
        w_best = max(value(x) for x in opt.dataset.referenced_actions())
        assert value(best) >= w_best - 1e-12


# -- posterior_max ------------------------------------------------------


def test_posterior_max_two_point_winner():
    # force a candidate set of exactly two points so the argmax is the
    # record's winner (larger sets can peak past the winner)
    opt = LineOptimizer(2, 3, rng=9)
    anchor = opt.store.intern(np.array([0.3, 0.5]))
    line = discretize_line(anchor, np.array([1.0, 0.0]), 3, store=opt.store)
    assert len(line.points) == 2
    opt.current_line = line
    a1, a2 = line.points
    opt.dataset.add(a1, a2)
    assert opt.posterior_max().id == a1.id


def test_posterior_max_empty_dataset_lowest_index():
    opt = LineOptimizer(2, 3, rng=10)
    anchor = opt.store.intern(np.array([0.3, 0.5]))
    opt.current_line = discretize_line(anchor, np.array([1.0, 0.0]), 3,
                                       store=opt.store)
    assert opt.posterior_max().id == opt.current_line.points[0].id


def test_posterior_max_pure_recomputation():
    opt = LineOptimizer(2, 8, rng=11)
    value = lambda a: float(a.coords[0])
    _drive(opt, value, 6)
    n_records = len(opt.dataset)
    t = opt.iteration
    first = opt.posterior_max()
    second = opt.posterior_max()
    assert first.id == second.id
    assert len(opt.dataset) == n_records and opt.iteration == t


def test_posterior_max_before_first_iteration():
    with pytest.raises(RuntimeError):
        LineOptimizer(2, 8, rng=12).posterior_max()


# -- full-grid baseline -------------------------------------------------


def test_baseline_grid_trace_shape():
    space = unit_space(2, 5)
    subject = SimSubject(
        ObjectiveSpec(ObjectiveKind.RANDOM_POLYNOMIAL,
                      np.ones(2), np.ones(2)),
        np.random.default_rng(0))
    trace = run_baseline_grid(space, subject, 6, np.random.default_rng(1))
    assert len(trace.sampled_values) == 6
    assert trace.v_sizes == [25] * 6
    assert all(np.isfinite(v) for v in trace.sampled_values)
    assert all(s >= 0 for s in trace.iteration_seconds)
    assert len(trace.posterior_max_values) == 6


def test_baseline_grid_guard():
    with pytest.raises(GridTooLarge):
        run_baseline_grid(unit_space(5, 10),
                          SimSubject(ObjectiveSpec(
                              ObjectiveKind.RANDOM_POLYNOMIAL,
                              np.ones(5), np.ones(5)),
                              np.random.default_rng(0)),
                          3, np.random.default_rng(1))
