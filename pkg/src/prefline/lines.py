"""Random one-dimensional subspaces through an anchor point.

Each iteration of the optimizer searches along a random line through the
current best point, clipped to the unit cube and discretized at the grid
spacing 1/(m-1).  Offsets are anchored at the anchor (offset zero), so
the anchor itself is always one of the points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .actions import Action, ActionStore

# slack when counting grid steps against the clipped interval, so points
# that land on the cube boundary up to fp error are kept
STEP_TOL = 1e-9


class DegenerateLine(Exception):
    """The clipped segment is too short to hold distinct points."""


@dataclass(frozen=True)
class LineSubspace:
    anchor: Action
    direction: np.ndarray       # unit vector
    points: list[Action]        # ordered along the line, contains anchor
    offsets: np.ndarray         # signed distance of each point from anchor


def random_direction(dims: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction on the unit sphere (normalized Gaussian draw)."""
    while True:
        v = rng.standard_normal(dims)
        norm = float(np.linalg.norm(v))
        if norm > 0.0:
            return v / norm


def discretize_line(anchor: Action, direction: np.ndarray, granularity: int,
                    store: ActionStore | None = None) -> LineSubspace:
    """Grid points along anchor + s*direction inside the unit cube.

    Points sit at offsets k/(granularity-1) for integer k, clipped to the
    cube; at most `granularity` survive (excess trimmed alternately from
    whichever end is farther from the anchor).  Raises DegenerateLine
    when the clipped segment cannot hold two distinct points.
    """
    if granularity < 2:
        raise ValueError("granularity must be >= 2")
    direction = np.asarray(direction, dtype=float)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0 or not np.all(np.isfinite(direction)):
        raise ValueError("direction must be a nonzero finite vector")
    unit = direction / norm
    origin = anchor.coords

    s_min, s_max = -math.inf, math.inf
    for i in range(origin.size):
        u = unit[i]
        if abs(u) < 1e-15:
            continue
        a = (0.0 - origin[i]) / u
        b = (1.0 - origin[i]) / u
        lo, hi = (a, b) if a <= b else (b, a)
        s_min = max(s_min, lo)
        s_max = min(s_max, hi)
    # the anchor sits inside the cube, so zero belongs to the interval
    s_min = min(s_min, 0.0)
    s_max = max(s_max, 0.0)

    step = 1.0 / (granularity - 1)
    k_min = math.ceil(s_min / step - STEP_TOL)
    k_max = math.floor(s_max / step + STEP_TOL)
    if k_max - k_min < 1:
        raise DegenerateLine(
            f"segment [{s_min:.3g}, {s_max:.3g}] holds fewer than two points")

    offsets = np.arange(k_min, k_max + 1, dtype=float) * step
    keep = _trim_to(offsets, granularity)
    offsets = offsets[keep]

    coords = origin[None, :] + offsets[:, None] * unit[None, :]
    np.clip(coords, 0.0, 1.0, out=coords)
    if store is None:
        store = ActionStore(origin.size)
    points = []
    anchor_pos = 0
    for k, row in enumerate(coords):
        if offsets[k] == 0.0:
            anchor_pos = k
            points.append(store.intern(origin))  # exact anchor, same action
        else:
            points.append(store.intern(row))

    offsets = offsets.copy()
    offsets.flags.writeable = False
    return LineSubspace(anchor=points[anchor_pos], direction=unit,
                        points=points, offsets=offsets)


def _trim_to(offsets: np.ndarray, limit: int) -> slice:
    """Slice keeping at most `limit` entries, trimming the far ends first."""
    lo, hi = 0, len(offsets)
    drop_high_next = True
    while hi - lo > limit:
        if abs(offsets[lo]) > abs(offsets[hi - 1]):
            lo += 1
        elif abs(offsets[hi - 1]) > abs(offsets[lo]):
            hi -= 1
        elif drop_high_next:
            hi -= 1
            drop_high_next = False
        else:
            lo += 1
            drop_high_next = True
    return slice(lo, hi)
