"""Preference-based optimization over random line subspaces.

Each iteration: draw a random line through the current best point,
compute the Laplace posterior over that line's points plus every action
referenced by past preferences, Thompson-sample a utility function, and
propose its argmax.  Feedback (a pairwise preference against the
previous proposal, optionally a coactive improvement) is absorbed into
the dataset; the incumbent for the next line is the posterior-mean
argmax computed before absorbing.

A dense full-grid baseline without line subspaces is provided for
scaling comparisons.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass

import numpy as np

from .actions import Action, ActionSpace, ActionStore
from .gp import (FeedbackSource, GpConfig, PreferenceDataset, PriorFactor,
                 UtilityPosterior, laplace_posterior, sample_utility)
from .lines import DegenerateLine, LineSubspace, discretize_line, random_direction
from .objectives import PreferenceSide

MAX_LINE_RETRIES = 100
GRID_POINT_LIMIT = 20_000  # a dense Gram matrix above this does not fit in memory


class StaleFeedback(Exception):
    """Feedback does not match the proposal currently awaiting it."""


class GridTooLarge(Exception):
    """The requested full grid exceeds the point-count guard."""


class Preference(enum.Enum):
    FIRST_PREFERRED = "first"    # the new proposal beat the previous action
    SECOND_PREFERRED = "second"  # the previous action beat the new proposal
    NO_PREFERENCE = "none"


@dataclass
class FeedbackBundle:
    """One round of feedback about a proposed action.

    coactive may be an Action or a raw coordinate vector in the unit
    cube; it is recorded as preferred over the proposal it amends.
    """

    preference: Preference
    coactive: Action | np.ndarray | None = None
    source: FeedbackSource = FeedbackSource.SIMULATED


class LineOptimizer:
    """Stateful optimizer; drive with propose_next / absorb_feedback."""

    def __init__(self, dims: int, granularity: int = 30,
                 config: GpConfig | None = None,
                 rng: np.random.Generator | int | None = None):
        if dims < 1:
            raise ValueError("dims must be >= 1")
        if granularity < 2:
            raise ValueError("granularity must be >= 2")
        self.dims = dims
        self.granularity = granularity
        self.config = config if config is not None else GpConfig()
        self.rng = (rng if isinstance(rng, np.random.Generator)
                    else np.random.default_rng(rng))
        self.store = ActionStore(dims)
        # both the first incumbent and the comparison partner for the
        # first proposal start uniformly at random
        self.incumbent: Action = self.store.intern(self.rng.random(dims))
        self.last_action: Action = self.store.intern(self.rng.random(dims))
        self.dataset = PreferenceDataset()
        self.iteration = 1
        self.current_line: LineSubspace | None = None
        self.posterior: UtilityPosterior | None = None
        self._pending: Action | None = None

    def _assemble_points(self, line: LineSubspace) -> list[Action]:
        """Current line's points plus every record-referenced action."""
        line_ids = {a.id for a in line.points}
        extras = [a for a in self.dataset.referenced_actions()
                  if a.id not in line_ids]
        return list(line.points) + extras

    def propose_next(self) -> Action:
        if self._pending is not None:
            raise StaleFeedback(
                "previous proposal has not received feedback yet")
        for _ in range(MAX_LINE_RETRIES):
            direction = random_direction(self.dims, self.rng)
            try:
                line = discretize_line(self.incumbent, direction,
                                       self.granularity, store=self.store)
                break
            except DegenerateLine:
                continue
        else:
            raise DegenerateLine(
                f"no usable line through {self.incumbent.coords} "
                f"after {MAX_LINE_RETRIES} attempts")

        points = self._assemble_points(line)
        assert len(points) <= self.granularity + 2 * (self.iteration - 1)
        posterior = laplace_posterior(points, self.dataset, self.config)
        sample = sample_utility(posterior, self.rng)
        proposal = points[int(np.argmax(sample))]

        self.current_line = line
        self.posterior = posterior
        self._pending = proposal
        return proposal

    def absorb_feedback(self, action: Action, feedback: FeedbackBundle) -> None:
        if self._pending is None:
            raise StaleFeedback("no proposal is awaiting feedback")
        if action.id != self._pending.id:
            raise StaleFeedback(
                f"feedback targets action {action.id}, "
                f"expected {self._pending.id}")

        # next incumbent comes from the posterior used for this proposal,
        # before today's feedback enters the dataset
        mean = self.posterior.mean
        next_incumbent = self.posterior.points[int(np.argmax(mean))]

        if self.iteration >= 2 and feedback.preference is not Preference.NO_PREFERENCE:
            if feedback.preference is Preference.FIRST_PREFERRED:
                winner, loser = action, self.last_action
            else:
                winner, loser = self.last_action, action
            if winner.id != loser.id:
                self.dataset.add(winner, loser, feedback.source)

        if feedback.coactive is not None:
            improved = feedback.coactive
            if not isinstance(improved, Action):
                improved = self.store.intern(np.asarray(improved, dtype=float))
            if improved.id != action.id:
                self.dataset.add(improved, action, FeedbackSource.COACTIVE)

        self.incumbent = next_incumbent
        self.last_action = action
        self.iteration += 1
        self._pending = None

    def evidence_posterior(self) -> UtilityPosterior:
        """Fresh posterior over the current line plus all referenced actions."""
        if self.current_line is None:
            raise RuntimeError("no iteration has run yet")
        points = self._assemble_points(self.current_line)
        return laplace_posterior(points, self.dataset, self.config)

    def posterior_max(self) -> Action:
        """Best action under the posterior mean over everything visited."""
        posterior = self.evidence_posterior()
        return posterior.points[int(np.argmax(posterior.mean))]


def make_grid(dims: int, granularity: int) -> np.ndarray:
    """All lattice points of the m^d grid over the unit cube, C-ordered."""
    axes = [np.linspace(0.0, 1.0, granularity)] * dims
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class BaselineTrace:
    """Per-iteration log of a full-grid baseline run."""

    sampled_values: list[float]
    posterior_max_values: list[float]
    v_sizes: list[int]
    iteration_seconds: list[float]


def run_baseline_grid(space: ActionSpace, subject, iterations: int,
                      rng: np.random.Generator,
                      config: GpConfig | None = None,
                      prior: PriorFactor | None = None) -> BaselineTrace:
    """Thompson sampling over the full m^d grid, no line subspaces.

    The subject must offer value(action) and preference(first, second).
    Timing covers posterior + proposal + bookkeeping, not the subject.
    A precomputed PriorFactor for this grid skips the one-off Cholesky.
    """
    config = config if config is not None else GpConfig()
    d, m = space.dims, space.granularity
    if m ** d > GRID_POINT_LIMIT:
        raise GridTooLarge(f"{m}^{d} = {m**d} exceeds {GRID_POINT_LIMIT} points")

    coords = make_grid(d, m)
    store = ActionStore(d)
    actions = store.intern_many(coords)
    if prior is None:
        prior = PriorFactor.from_coords(coords, config)

    dataset = PreferenceDataset()
    trace = BaselineTrace([], [], [], [])
    previous: Action | None = None
    for t in range(1, iterations + 1):
        tic = time.perf_counter()
        posterior = laplace_posterior(actions, dataset, config,
                                      method="lowrank", prior=prior)
        sample = sample_utility(posterior, rng)
        proposal = actions[int(np.argmax(sample))]
        best = actions[int(np.argmax(posterior.mean))]
        elapsed = time.perf_counter() - tic

        if t >= 2:
            side = subject.preference(proposal, previous)
            tic2 = time.perf_counter()
            if side is PreferenceSide.FIRST:
                winner, loser = proposal, previous
            else:
                winner, loser = previous, proposal
            if winner.id != loser.id:
                dataset.add(winner, loser)
            elapsed += time.perf_counter() - tic2

        trace.sampled_values.append(subject.value(proposal))
        trace.posterior_max_values.append(subject.value(best))
        trace.v_sizes.append(len(actions))
        trace.iteration_seconds.append(elapsed)
        previous = proposal
    return trace
