"""Benchmark objectives and a simulated preference-giving subject.

The Hartmann functions are negated so that higher is better everywhere
in this package.  The random polynomial family draws coefficients
uniformly from [-1, 1] and is evaluated on normalized coordinates.
A SimSubject turns objective values into (optionally noisy) pairwise
preferences and coactive improvement suggestions, mimicking a human in
the loop.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .actions import Action
from .gp import sigmoid_link

HARTMANN3_A = np.array([
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
])
HARTMANN3_P = np.array([
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.03815, 0.5743, 0.8828],
])
HARTMANN6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
HARTMANN6_P = 1e-4 * np.array([
    [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
    [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
    [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
    [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
])
HARTMANN_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])


class DimensionMismatch(ValueError):
    """Coordinates have the wrong length for the objective."""


class ObjectiveKind(enum.Enum):
    HARTMANN3 = "hartmann3"
    HARTMANN6 = "hartmann6"
    RANDOM_POLYNOMIAL = "polynomial"
    QUADRATIC_POLYNOMIAL = "polynomial2"


_POLY_KINDS = (ObjectiveKind.RANDOM_POLYNOMIAL,
               ObjectiveKind.QUADRATIC_POLYNOMIAL)


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: ObjectiveKind
    poly_alpha: np.ndarray | None = None
    poly_beta: np.ndarray | None = None

    def __post_init__(self):
        if self.kind in _POLY_KINDS:
            alpha = np.asarray(self.poly_alpha, dtype=float)
            beta = np.asarray(self.poly_beta, dtype=float)
            if alpha.ndim != 1 or alpha.shape != beta.shape or alpha.size == 0:
                raise ValueError("poly_alpha/poly_beta must be matching 1-D vectors")
            if np.max(np.abs(alpha)) > 1.0 or np.max(np.abs(beta)) > 1.0:
                raise ValueError("polynomial coefficients must lie in [-1, 1]")
            alpha.flags.writeable = False
            beta.flags.writeable = False
            object.__setattr__(self, "poly_alpha", alpha)
            object.__setattr__(self, "poly_beta", beta)
        elif self.poly_alpha is not None or self.poly_beta is not None:
            raise ValueError("coefficients only apply to polynomial objectives")

    @property
    def dims(self) -> int:
        if self.kind is ObjectiveKind.HARTMANN3:
            return 3
        if self.kind is ObjectiveKind.HARTMANN6:
            return 6
        return self.poly_alpha.size

    @classmethod
    def random_polynomial(cls, dims: int, rng: np.random.Generator) -> "ObjectiveSpec":
        alpha = rng.uniform(-1.0, 1.0, size=dims)
        beta = rng.uniform(-1.0, 1.0, size=dims)
        return cls(ObjectiveKind.RANDOM_POLYNOMIAL, alpha, beta)

    @classmethod
    def random_quadratic(cls, dims: int, rng: np.random.Generator) -> "ObjectiveSpec":
        """Genuinely second-order variant: alpha weights the coordinates,
        beta weights their squares."""
        alpha = rng.uniform(-1.0, 1.0, size=dims)
        beta = rng.uniform(-1.0, 1.0, size=dims)
        return cls(ObjectiveKind.QUADRATIC_POLYNOMIAL, alpha, beta)


def _hartmann(x: np.ndarray, A: np.ndarray, P: np.ndarray) -> float:
    inner = np.sum(A * (x[None, :] - P) ** 2, axis=1)
    return float(np.dot(HARTMANN_ALPHA, np.exp(-inner)))


def evaluate(objective: ObjectiveSpec, action) -> float:
    """Objective value (higher is better) at an Action or coordinate vector."""
    coords = action.coords if isinstance(action, Action) else np.asarray(action, float)
    if coords.shape != (objective.dims,):
        raise DimensionMismatch(
            f"expected {objective.dims} coordinates, got {coords.shape}")
    if objective.kind is ObjectiveKind.HARTMANN3:
        return _hartmann(coords, HARTMANN3_A, HARTMANN3_P)
    if objective.kind is ObjectiveKind.HARTMANN6:
        return _hartmann(coords, HARTMANN6_A, HARTMANN6_P)
    if objective.kind is ObjectiveKind.QUADRATIC_POLYNOMIAL:
        return float(np.dot(objective.poly_alpha, coords)
                     + np.dot(objective.poly_beta, coords**2))
    return float(np.sum(objective.poly_alpha) * np.dot(objective.poly_beta, coords))


class PreferenceSide(enum.Enum):
    FIRST = "first"
    SECOND = "second"


class SimSubject:
    """Simulated subject: answers preference queries about objective values.

    noise scale 0 gives the ideal subject (ties go to the second action);
    positive noise answers "first" with probability
    1 / (1 + exp(-(v1 - v2)/noise)).
    """

    def __init__(self, objective: ObjectiveSpec, rng: np.random.Generator,
                 noise: float = 0.0, coactive: bool = False):
        if noise < 0:
            raise ValueError("noise must be >= 0")
        self.objective = objective
        self.rng = rng
        self.noise = noise
        self.coactive = coactive

    def value(self, action) -> float:
        return evaluate(self.objective, action)

    def preference(self, first, second) -> PreferenceSide:
        gap = self.value(first) - self.value(second)
        if self.noise == 0.0:
            return PreferenceSide.FIRST if gap > 0 else PreferenceSide.SECOND
        p_first = float(sigmoid_link(gap / self.noise))
        return (PreferenceSide.FIRST if self.rng.random() < p_first
                else PreferenceSide.SECOND)

    def coactive_suggestion(self, action, step: float) -> np.ndarray | None:
        """One random axis nudge of size `step`, returned only if it helps.

        Draws a dimension and a sign, perturbs, clips to the cube, and
        returns the new coordinates when they score strictly higher.
        """
        if not self.coactive:
            return None
        coords = (action.coords if isinstance(action, Action)
                  else np.asarray(action, float))
        dim = int(self.rng.integers(coords.size))
        sign = 1.0 if self.rng.random() < 0.5 else -1.0
        cand = coords.copy()
        cand[dim] += sign * step
        np.clip(cand, 0.0, 1.0, out=cand)
        if self.value(cand) > self.value(coords):
            return cand
        return None
