"""Fitting walking-cost weights to gait preference data.

Treats the walker as a linear inverted pendulum (LIPM).  Each gait
trajectory yields four time-averaged squared-norm features (CoM goal
tracking, CoM velocity, CoP velocity, swing-foot goal tracking); a
pairwise preference between two gaits gives a feature difference delta
(preferred minus not preferred).  Weights w are fit so the preferred
gait always has the lower cost: min ||w||^2 subject to delta_k . w <=
-eps, with a soft-margin fallback for contradictory data.  A small RK4
simulator of the LIPM dynamics generates synthetic trajectories.

Cost candidates scored for predictive power: the fitted four-term cost,
the static-stability cost ||CoM - CoP||^2, and the dynamic-stability
cost ||p_goal - p||^2.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import lsq_linear

MARGIN = 1e-6           # strict-to-weak conversion of delta . w < 0
SOFT_RIDGE = 1e-3       # lambda of the soft-margin fallback
OBJECTIVE_TOL = 1e-10

TRAJECTORY_COLUMNS = ["t", "x_com", "y_com", "x_cop", "y_cop", "xg_com",
                      "yg_com", "px", "py", "pxg", "pyg"]
VELOCITY_COLUMNS = ["vx_com", "vy_com", "vx_cop", "vy_cop"]


class MalformedTrajectory(ValueError):
    """Trajectory series disagree in length or are too short."""


class DegenerateFeatures(ValueError):
    """No informative preference pairs remain."""


def central_difference(series: np.ndarray, dt: float) -> np.ndarray:
    """Derivative by central differences, one-sided at the ends."""
    series = np.asarray(series, dtype=float)
    out = np.empty_like(series)
    out[1:-1] = (series[2:] - series[:-2]) / (2.0 * dt)
    out[0] = (series[1] - series[0]) / dt
    out[-1] = (series[-1] - series[-2]) / dt
    return out


@dataclass
class GaitTrajectory:
    """Uniformly sampled gait data; velocities differenced when absent."""

    gait_id: str
    dt: float
    x_com: np.ndarray
    y_com: np.ndarray
    x_cop: np.ndarray
    y_cop: np.ndarray
    xg_com: np.ndarray
    yg_com: np.ndarray
    px: np.ndarray
    py: np.ndarray
    pxg: np.ndarray
    pyg: np.ndarray
    vx_com: np.ndarray | None = None
    vy_com: np.ndarray | None = None
    vx_cop: np.ndarray | None = None
    vy_cop: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise MalformedTrajectory("dt must be positive")
        series = [self.x_com, self.y_com, self.x_cop, self.y_cop,
                  self.xg_com, self.yg_com, self.px, self.py,
                  self.pxg, self.pyg]
        lengths = {len(s) for s in series}
        if len(lengths) != 1:
            raise MalformedTrajectory("series lengths disagree")
        n = lengths.pop()
        if n < 2:
            raise MalformedTrajectory("need at least 2 samples")
        for name in ("x_com", "y_com", "x_cop", "y_cop", "xg_com", "yg_com",
                     "px", "py", "pxg", "pyg"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.vx_com is None:
            self.vx_com = central_difference(self.x_com, self.dt)
            self.vy_com = central_difference(self.y_com, self.dt)
        if self.vx_cop is None:
            self.vx_cop = central_difference(self.x_cop, self.dt)
            self.vy_cop = central_difference(self.y_cop, self.dt)
        for name in ("vx_com", "vy_com", "vx_cop", "vy_cop"):
            vel = np.asarray(getattr(self, name), dtype=float)
            if len(vel) != n:
                raise MalformedTrajectory(f"{name} length disagrees")
            setattr(self, name, vel)

    def __len__(self) -> int:
        return len(self.x_com)


def extract_features(traj: GaitTrajectory) -> np.ndarray:
    """Four time-averaged squared-norm cost terms, x and y summed."""
    term1 = np.mean((traj.xg_com - traj.x_com) ** 2
                    + (traj.yg_com - traj.y_com) ** 2)
    term2 = np.mean(traj.vx_com ** 2 + traj.vy_com ** 2)
    term3 = np.mean(traj.vx_cop ** 2 + traj.vy_cop ** 2)
    term4 = np.mean((traj.pxg - traj.px) ** 2 + (traj.pyg - traj.py) ** 2)
    return np.array([term1, term2, term3, term4])


def static_cost(traj: GaitTrajectory) -> float:
    """Mean squared CoM-CoP offset (static-stability cost)."""
    return float(np.mean((traj.x_com - traj.x_cop) ** 2
                         + (traj.y_com - traj.y_cop) ** 2))


def dynamic_cost(traj: GaitTrajectory) -> float:
    """Mean squared swing-foot goal error (dynamic-stability cost)."""
    return float(np.mean((traj.pxg - traj.px) ** 2
                         + (traj.pyg - traj.py) ** 2))


@dataclass(frozen=True)
class PreferencePair:
    """Feature difference of one preference, preferred minus other."""

    subject_id: str
    delta: np.ndarray         # shape (4,)
    static_delta: float       # static_cost difference, same orientation
    dynamic_delta: float

    @classmethod
    def from_trajectories(cls, subject_id: str, preferred: GaitTrajectory,
                          other: GaitTrajectory) -> "PreferencePair":
        return cls(subject_id,
                   extract_features(preferred) - extract_features(other),
                   static_cost(preferred) - static_cost(other),
                   dynamic_cost(preferred) - dynamic_cost(other))


@dataclass
class CostWeights:
    w1: float
    w2: float
    w3: float
    w4: float
    feasible: bool

    def as_array(self) -> np.ndarray:
        return np.array([self.w1, self.w2, self.w3, self.w4])


def simulate_lipm(z0: float, duration: float, dt: float, *, g: float = 9.81,
                  initial_state=(0.0, 0.0, 0.0, 0.0), cop=(0.0, 0.0),
                  com_goal=(0.0, 0.0), foot=(0.0, 0.0), foot_goal=(0.0, 0.0),
                  gait_id: str = "lipm") -> GaitTrajectory:
    """Integrate the LIPM dynamics with classical RK4.

    State is (x_com, y_com, vx, vy); acceleration (g/z0)(com - cop).
    cop may be a constant (x, y) pair or a callable t -> (x, y); the
    goal and swing-foot inputs are constants recorded into the output.
    """
    if z0 <= 0:
        raise ValueError("z0 must be positive")
    if dt <= 0 or duration < dt:
        raise ValueError("need duration >= dt > 0")
    cop_at = cop if callable(cop) else (lambda t: cop)
    omega2 = g / z0

    def deriv(t, state):
        cx, cy = cop_at(t)
        return np.array([state[2], state[3],
                         omega2 * (state[0] - cx), omega2 * (state[1] - cy)])

    steps = int(round(duration / dt))
    states = np.empty((steps + 1, 4))
    states[0] = np.asarray(initial_state, dtype=float)
    for k in range(steps):
        t = k * dt
        y = states[k]
        k1 = deriv(t, y)
        k2 = deriv(t + dt / 2.0, y + dt / 2.0 * k1)
        k3 = deriv(t + dt / 2.0, y + dt / 2.0 * k2)
        k4 = deriv(t + dt, y + dt * k3)
        states[k + 1] = y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    times = np.arange(steps + 1) * dt
    cops = np.array([cop_at(t) for t in times], dtype=float)
    n = steps + 1
    return GaitTrajectory(
        gait_id=gait_id, dt=dt,
        x_com=states[:, 0], y_com=states[:, 1],
        x_cop=cops[:, 0], y_cop=cops[:, 1],
        xg_com=np.full(n, com_goal[0]), yg_com=np.full(n, com_goal[1]),
        px=np.full(n, foot[0]), py=np.full(n, foot[1]),
        pxg=np.full(n, foot_goal[0]), pyg=np.full(n, foot_goal[1]),
        vx_com=states[:, 2], vy_com=states[:, 3],
        vx_cop=central_difference(cops[:, 0], dt),
        vy_cop=central_difference(cops[:, 1], dt))


def _max_violation(deltas: np.ndarray, w: np.ndarray) -> float:
    return float(np.max(deltas @ w + MARGIN))


def _least_distance(deltas: np.ndarray) -> np.ndarray | None:
    """Min-norm point of {v : deltas v <= -1}, or None when it is empty.

    Classical least-distance reduction: stack the constraint normals on a
    row of ones, solve one nonnegative least-squares problem, and read the
    primal point off the residual.  BVLS is a finite active-set method, so
    the result is exact up to roundoff.
    """
    count = deltas.shape[0]
    stacked = np.vstack([-deltas.T, np.ones((1, count))])
    target = np.zeros(stacked.shape[0])
    target[-1] = 1.0
    fit = lsq_linear(stacked, target, bounds=(0.0, np.inf), method="bvls")
    residual = stacked @ fit.x - target
    if np.linalg.norm(residual) < 1e-9 or residual[-1] >= 0.0:
        return None
    return residual[:-1] / (-residual[-1])


def fit_weights(pairs) -> CostWeights:
    """Min-norm weights ranking every preferred gait strictly cheaper.

    Accepts PreferencePair objects or raw delta rows.  All-zero rows
    carry no information and are dropped with a warning; if none remain
    the fit is degenerate.  Contradictory data falls back to a
    soft-margin fit with feasible=False.
    """
    deltas = np.atleast_2d(np.array(
        [p.delta if isinstance(p, PreferencePair) else p for p in pairs],
        dtype=float))
    if deltas.size == 0:
        raise DegenerateFeatures("no preference pairs given")
    if deltas.shape[1] != 4:
        raise ValueError("each delta must have 4 components")
    keep = np.any(deltas != 0.0, axis=1)
    if not np.all(keep):
        warnings.warn(f"dropping {int(np.sum(~keep))} all-zero delta rows, "
                      "they carry no preference information")
        deltas = deltas[keep]
    if deltas.shape[0] == 0:
        raise DegenerateFeatures("all delta rows are zero")

    # solve at unit margin (the solution scales linearly with the margin,
    # so the subproblem stays away from 1e-12 objective magnitudes), then
    # scale down and stretch out any last-ulp shortfall
    unit = _least_distance(deltas)
    if unit is None:
        return _soft_margin_fit(deltas)
    attained = -float(np.max(deltas @ unit))
    if attained <= 0.0:
        return _soft_margin_fit(deltas)
    w = (MARGIN / min(attained, 1.0)) * unit
    # dot-product roundoff can leave a last-ulp shortfall; stretch until
    # every row clears the margin outright
    stretch = np.finfo(float).eps
    while _max_violation(deltas, w) > 0.0:
        w = (1.0 + stretch) * w
        stretch *= 2.0
    return CostWeights(*w, feasible=True)


def _soft_margin_fit(deltas: np.ndarray) -> CostWeights:
    """Subgradient descent on hinge loss + ridge for contradictory data."""
    w = np.zeros(4)

    def objective(wv):
        return (float(np.sum(np.maximum(0.0, deltas @ wv + MARGIN)))
                + SOFT_RIDGE * float(wv @ wv))

    previous = objective(w)
    stall = 0
    for step in range(1, 200_000):
        active = (deltas @ w + MARGIN) > 0.0
        grad = deltas[active].sum(axis=0) + 2.0 * SOFT_RIDGE * w
        w = w - (0.5 / np.sqrt(step)) * grad
        current = objective(w)
        if abs(previous - current) < OBJECTIVE_TOL * (1.0 + current):
            stall += 1
            if stall >= 20:
                break
        else:
            stall = 0
        previous = current
    return CostWeights(*w, feasible=False)


def rank_accuracy(weights: CostWeights | np.ndarray, pairs) -> float:
    """Percent of pairs whose preferred gait has strictly lower cost."""
    w = weights.as_array() if isinstance(weights, CostWeights) else np.asarray(weights)
    deltas = np.array([p.delta for p in pairs])
    correct = np.sum(deltas @ w < 0.0)  # ties count as incorrect
    return 100.0 * float(correct) / len(pairs)


def predictive_power(pairs: list[PreferencePair], kind: str = "lipm",
                     holdout: bool = False) -> dict:
    """Per-subject rank-consistency of a candidate cost function.

    kind "lipm" scores the fitted four-term cost (fit on all data, or
    on the other subjects when holdout is set); "static" and "dynamic"
    score their fixed single-term costs directly.  Returns
    {subject_id: {"accuracy_pct": ..., "weights": CostWeights | None}}.
    """
    if kind not in ("lipm", "static", "dynamic"):
        raise ValueError(f"unknown cost kind {kind!r}")
    subjects = sorted({p.subject_id for p in pairs})
    if not subjects:
        raise ValueError("no pairs given")
    report = {}
    shared = None
    for subject in subjects:
        own = [p for p in pairs if p.subject_id == subject]
        if kind == "lipm":
            if holdout:
                train = [p for p in pairs if p.subject_id != subject]
                if not train:
                    raise ValueError(
                        "holdout needs at least two subjects")
                weights = fit_weights(train)
            else:
                if shared is None:
                    shared = fit_weights(pairs)
                weights = shared
            accuracy = rank_accuracy(weights, own)
        else:
            signed = np.array([p.static_delta if kind == "static"
                               else p.dynamic_delta for p in own])
            accuracy = 100.0 * float(np.sum(signed < 0.0)) / len(own)
            weights = None
        report[subject] = {"accuracy_pct": accuracy, "weights": weights}
    return report


def write_trajectory_csv(path: Path, traj: GaitTrajectory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS + VELOCITY_COLUMNS)
        times = np.arange(len(traj)) * traj.dt
        for i in range(len(traj)):
            row = [times[i], traj.x_com[i], traj.y_com[i], traj.x_cop[i],
                   traj.y_cop[i], traj.xg_com[i], traj.yg_com[i], traj.px[i],
                   traj.py[i], traj.pxg[i], traj.pyg[i], traj.vx_com[i],
                   traj.vy_com[i], traj.vx_cop[i], traj.vy_cop[i]]
            writer.writerow(f"{v:.17g}" for v in row)


def load_trajectory_csv(path: Path, gait_id: str | None = None) -> GaitTrajectory:
    """Trajectory from CSV; velocity columns optional."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = TRAJECTORY_COLUMNS
        if header[:len(expected)] != expected:
            raise MalformedTrajectory(
                f"{path.name}: expected columns {expected}, got {header}")
        has_velocity = header[len(expected):len(expected) + 4] == VELOCITY_COLUMNS
        rows = [[float(v) for v in row] for row in reader if row]
    if len(rows) < 2:
        raise MalformedTrajectory(f"{path.name}: need at least 2 samples")
    data = np.array(rows)
    times = data[:, 0]
    steps = np.diff(times)
    if steps.size and (np.min(steps) <= 0
                      or np.max(np.abs(steps - steps[0])) > 1e-9):
        raise MalformedTrajectory(f"{path.name}: time column must be uniform")
    kwargs = {}
    if has_velocity:
        kwargs = {name: data[:, len(expected) + i]
                  for i, name in enumerate(VELOCITY_COLUMNS)}
    return GaitTrajectory(
        gait_id=gait_id if gait_id is not None else path.stem,
        dt=float(steps[0]),
        x_com=data[:, 1], y_com=data[:, 2], x_cop=data[:, 3],
        y_cop=data[:, 4], xg_com=data[:, 5], yg_com=data[:, 6],
        px=data[:, 7], py=data[:, 8], pxg=data[:, 9], pyg=data[:, 10],
        **kwargs)


def load_preferences_csv(path: Path) -> list[tuple[str, str, str]]:
    """(subject_id, preferred_gait_id, other_gait_id) rows."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["subject_id", "preferred_gait_id", "other_gait_id"]:
            raise ValueError(f"unexpected preference columns {header}")
        return [(row[0], row[1], row[2]) for row in reader if row]


def build_pairs(trajectories: dict[str, GaitTrajectory],
                preferences: list[tuple[str, str, str]]) -> list[PreferencePair]:
    pairs = []
    for subject, preferred, other in preferences:
        try:
            a, b = trajectories[preferred], trajectories[other]
        except KeyError as exc:
            raise KeyError(f"preference references unknown gait {exc.args[0]}")
        pairs.append(PreferencePair.from_trajectories(subject, a, b))
    return pairs


def write_report_csv(path: Path, pairs: list[PreferencePair],
                     holdout: bool = False) -> None:
    """Accuracy rows for the fitted cost and both fixed costs.

    cost_kind is one of lipm, lipm_holdout (when requested), static,
    dynamic; weight columns stay empty for the fixed costs.
    """
    kinds = [("lipm", False)]
    if holdout:
        kinds.append(("lipm_holdout", True))
    kinds += [("static", False), ("dynamic", False)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cost_kind", "subject_id", "accuracy_pct",
                         "w1", "w2", "w3", "w4", "feasible"])
        for kind, hold in kinds:
            base = kind.removesuffix("_holdout")
            report = predictive_power(pairs, kind=base, holdout=hold)
            for subject in sorted(report):
                entry = report[subject]
                weights = entry["weights"]
                if weights is None:
                    wcols = ["", "", "", "", ""]
                else:
                    wcols = [f"{weights.w1:.17g}", f"{weights.w2:.17g}",
                             f"{weights.w3:.17g}", f"{weights.w4:.17g}",
                             str(int(weights.feasible))]
                writer.writerow([kind, subject,
                                 f"{entry['accuracy_pct']:.17g}", *wcols])
