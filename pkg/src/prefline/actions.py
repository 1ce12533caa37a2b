"""Actions, action interning, and physical parameter spaces.

Everything downstream works on normalized coordinates in the unit cube.
An ActionStore assigns stable integer ids so that the same point (within
a tight tolerance) is always the same Action object, which keeps
preference records unambiguous.  ActionSpace maps between normalized
coordinates and physical units for user-facing surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Two coordinate vectors closer than this (max-norm) are the same action.
MATCH_TOL = 1e-12

EXOSKELETON_LOWER = (0.08, 0.85, 0.25, 0.065, 5.5, 10.5)
EXOSKELETON_UPPER = (0.18, 1.15, 0.30, 0.075, 9.5, 14.5)
EXOSKELETON_NAMES = (
    "step_length_m",
    "step_duration_s",
    "step_width_m",
    "max_step_height_m",
    "pelvis_roll_deg",
    "pelvis_pitch_deg",
)


@dataclass(frozen=True)
class Action:
    """A candidate point in the normalized search space."""

    id: int
    coords: np.ndarray  # shape (d,), values in [0, 1], read-only

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 1 or coords.size == 0:
            raise ValueError("coords must be a nonempty 1-D vector")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords must be finite")
        # tolerate sub-tolerance excursions from upstream arithmetic
        clipped = np.clip(coords, 0.0, 1.0)
        if np.max(np.abs(clipped - coords)) > MATCH_TOL:
            raise ValueError("coords must lie in the unit cube")
        clipped.flags.writeable = False
        object.__setattr__(self, "coords", clipped)

    @property
    def dims(self) -> int:
        return self.coords.size

    def __eq__(self, other):
        return isinstance(other, Action) and other.id == self.id

    def __hash__(self):
        return hash(self.id)


class ActionStore:
    """Interns coordinate vectors into Actions with stable ids.

    Lookup is by rounded-coordinate key with a neighbor check, so points
    within MATCH_TOL of an existing action reuse its id.
    """

    def __init__(self, dims: int):
        if dims < 1:
            raise ValueError("dims must be >= 1")
        self.dims = dims
        self._actions: list[Action] = []
        self._by_key: dict[tuple, int] = {}

    def __len__(self) -> int:
        return len(self._actions)

    def __iter__(self):
        return iter(self._actions)

    def get(self, action_id: int) -> Action:
        return self._actions[action_id]

    def _key(self, coords: np.ndarray) -> tuple:
        # quantize at half the tolerance; check neighbors on collision risk
        return tuple(np.round(coords / MATCH_TOL).astype(np.int64))

    def intern(self, coords) -> Action:
        coords = np.asarray(coords, dtype=float)
        if coords.shape != (self.dims,):
            raise ValueError(f"expected shape ({self.dims},), got {coords.shape}")
        key = self._key(coords)
        hit = self._by_key.get(key)
        if hit is not None:
            return self._actions[hit]
        # rounding can split near-identical points across adjacent keys
        for neighbor in self._neighbor_keys(key, coords):
            hit = self._by_key.get(neighbor)
            if hit is not None:
                cand = self._actions[hit]
                if np.max(np.abs(cand.coords - np.clip(coords, 0.0, 1.0))) <= MATCH_TOL:
                    return cand
        action = Action(id=len(self._actions), coords=coords)
        self._actions.append(action)
        self._by_key[key] = action.id
        return action

    def _neighbor_keys(self, key: tuple, coords: np.ndarray):
        # only keys whose quantization cell the tolerance ball can touch
        base = np.asarray(key, dtype=np.int64)
        frac = coords / MATCH_TOL - base
        out = []
        for i in range(self.dims):
            for delta in (-1, 1):
                if delta * frac[i] > 0.25:
                    shifted = base.copy()
                    shifted[i] += delta
                    out.append(tuple(shifted))
        return out

    def intern_many(self, coords: np.ndarray) -> list[Action]:
        return [self.intern(row) for row in np.asarray(coords, dtype=float)]


@dataclass(frozen=True)
class ActionSpace:
    """Physical bounds plus per-axis grid granularity.

    granularity m means candidate points sit at spacing 1/(m-1) in
    normalized coordinates.
    """

    lower: np.ndarray
    upper: np.ndarray
    granularity: int = 30
    names: tuple = field(default=None)

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.ndim != 1 or lower.shape != upper.shape or lower.size == 0:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise ValueError("bounds must be finite")
        if not np.all(upper > lower):
            raise ValueError("upper must exceed lower in every dimension")
        if self.granularity < 2:
            raise ValueError("granularity must be >= 2")
        names = self.names
        if names is None:
            names = tuple(f"x{i}" for i in range(lower.size))
        else:
            names = tuple(names)
            if len(names) != lower.size:
                raise ValueError("names length must match bounds")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "names", names)

    @property
    def dims(self) -> int:
        return self.lower.size

    @property
    def step(self) -> float:
        """Normalized grid spacing."""
        return 1.0 / (self.granularity - 1)

    def to_physical(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=float)
        return self.lower + coords * (self.upper - self.lower)

    def to_normalized(self, physical) -> np.ndarray:
        physical = np.asarray(physical, dtype=float)
        return (physical - self.lower) / (self.upper - self.lower)


def unit_space(dims: int, granularity: int = 30) -> ActionSpace:
    return ActionSpace(np.zeros(dims), np.ones(dims), granularity)


def exoskeleton_space(granularity: int = 10) -> ActionSpace:
    """Six gait parameters of a lower-body exoskeleton, physical units."""
    return ActionSpace(
        np.array(EXOSKELETON_LOWER),
        np.array(EXOSKELETON_UPPER),
        granularity,
        EXOSKELETON_NAMES,
    )
