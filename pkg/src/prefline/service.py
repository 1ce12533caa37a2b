"""Live human-in-the-loop optimization sessions over HTTP.

A session walks a subject through 30 learning trials (each trial presents
one new candidate and asks for a preference against the previous one,
plus optional coactive feedback), then silently validates the
posterior-maximizing candidate against four random ones over six more
trials.  The subject-facing payloads never reveal the phase switch.

State is event-sourced: each session appends its creation parameters and
every accepted feedback body to a JSON-lines file, and replaying that
file through the same code path reproduces the session exactly,
including the frozen final report bytes.
"""
from __future__ import annotations

import enum
import json
import secrets
import threading
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response

from .actions import Action, ActionSpace, exoskeleton_space
from .experiments import pearson_r_p, visitation_correlation
from .gp import (FeedbackSource, GpConfig, PreferenceDataset,
                 laplace_posterior)
from .optimizer import FeedbackBundle, LineOptimizer, Preference

LEARNING_TRIALS = 30
VALIDATION_COMPARISONS = 4
VALIDATION_TRIALS = 6
HISTOGRAM_BINS = 10

_PRESETS = {"exoskeleton": exoskeleton_space}
_GP_OVERRIDES = ("lengthscale", "signal_variance", "noise_variance",
                 "preference_noise")


class Phase(str, enum.Enum):
    LEARNING = "learning"
    VALIDATION = "validation"
    DONE = "done"


@dataclass(frozen=True)
class _Presentation:
    """One planned validation trial.

    `scored` marks whether the pair (previous presentation, this one)
    counts toward validation accuracy; `amax_current` says which side of
    that pair is the posterior maximizer.
    """

    action: Action
    scored: bool
    amax_current: bool | None


def _as_floats(values) -> list[float]:
    return [float(v) for v in np.asarray(values, dtype=float)]


class Session:
    """Single optimization session; mutate only under `lock`."""

    def __init__(self, sid: str, space: ActionSpace, seed: int,
                 learning_trials: int, gp_config: GpConfig):
        self.id = sid
        self.space = space
        self.seed = seed
        self.learning_trials = learning_trials
        self.gp_config = gp_config
        self.lock = threading.Lock()
        self.rng = np.random.default_rng(seed)
        self.optimizer = LineOptimizer(space.dims,
                                       granularity=space.granularity,
                                       config=gp_config, rng=self.rng)
        self.phase = Phase.LEARNING
        # each entry: {"index", "action": Action, "preference": str|None,
        # "coactive": dict|None}; the last entry is pending until its
        # feedback arrives
        self.trials: list[dict] = []
        self.amax: Action | None = None
        self.plan: list[_Presentation] = []
        self.plan_cursor = 0
        self.validation_outcomes: list[bool] = []
        self.frozen_report: str | None = None
        self.report_snapshot: dict = {}
        self.state_snapshot: dict = {}
        self._present(self.optimizer.propose_next())
        self._refresh_snapshots()

    # -- presentation plumbing ------------------------------------------

    def _present(self, action: Action) -> None:
        self.trials.append({"index": len(self.trials) + 1, "action": action,
                            "preference": None, "coactive": None})

    def _physical(self, action: Action) -> list[float]:
        return _as_floats(self.space.to_physical(action.coords))

    def trial_payload(self) -> dict | None:
        """The pending trial as the subject sees it (phase-blind)."""
        if self.phase is Phase.DONE:
            return None
        current = self.trials[-1]
        previous = self.trials[-2] if len(self.trials) >= 2 else None
        return {"index": current["index"],
                "action": self._physical(current["action"]),
                "previous": (self._physical(previous["action"])
                             if previous else None)}

    def space_payload(self) -> dict:
        return {"names": list(self.space.names),
                "lower": _as_floats(self.space.lower),
                "upper": _as_floats(self.space.upper),
                "granularity": int(self.space.granularity)}

    def completed_trials(self) -> list[dict]:
        return [t for t in self.trials if t["preference"] is not None]

    # -- feedback --------------------------------------------------------

    def apply_feedback(self, body: dict) -> dict:
        """Validate and absorb one feedback body; returns the response.

        Caller holds the lock.  Raises HTTPException on any rejection,
        in which case no state changed.
        """
        response = self._apply_feedback(body)
        self._refresh_snapshots()
        return response

    def _apply_feedback(self, body: dict) -> dict:
        if self.phase is Phase.DONE:
            raise HTTPException(410, "session is done")
        preference = body.get("preference")
        if preference not in ("first", "second", "none"):
            raise HTTPException(400, "preference must be first|second|none")
        pending_index = self.trials[-1]["index"]
        if "trial" in body and body["trial"] is not None:
            if not isinstance(body["trial"], int) or isinstance(body["trial"], bool):
                raise HTTPException(400, "trial must be an integer")
            if body["trial"] != pending_index:
                raise HTTPException(
                    409, f"feedback targets trial {body['trial']}, "
                         f"pending trial is {pending_index}")
        coactive = body.get("coactive")
        if coactive is not None:
            coactive = self._validate_coactive(coactive)

        trial = self.trials[-1]
        if self.phase is Phase.LEARNING:
            bundle = FeedbackBundle(
                preference=Preference(preference),
                coactive=(self._coactive_coords(coactive, trial["action"])
                          if coactive else None),
                source=FeedbackSource.HUMAN)
            self.optimizer.absorb_feedback(trial["action"], bundle)
            trial["preference"] = preference
            trial["coactive"] = coactive
            if len(self.trials) == self.learning_trials:
                self._begin_validation()
            else:
                self._present(self.optimizer.propose_next())
            return {"trial": self.trial_payload()}

        # validation: record, score when the pair involves a_max, never
        # touch the optimizer; coactive offers are accepted (the subject
        # does not know the phase changed) but carry no effect
        presentation = self.plan[self.plan_cursor]
        trial["preference"] = preference
        trial["coactive"] = coactive
        if presentation.scored:
            wanted = "first" if presentation.amax_current else "second"
            self.validation_outcomes.append(preference == wanted)
        self.plan_cursor += 1
        if self.plan_cursor < len(self.plan):
            self._present(self.plan[self.plan_cursor].action)
            return {"trial": self.trial_payload()}
        self.phase = Phase.DONE
        return {"summary": self._summary()}

    def _validate_coactive(self, body: dict) -> dict:
        if not isinstance(body, dict):
            raise HTTPException(400, "coactive must be an object")
        try:
            dim = int(body["dim"])
            direction = int(body["direction"])
            magnitude = float(body["magnitude"])
        except (KeyError, TypeError, ValueError):
            raise HTTPException(
                400, "coactive needs dim, direction, magnitude") from None
        if not 0 <= dim < self.space.dims:
            raise HTTPException(400, f"coactive dim out of range 0..{self.space.dims - 1}")
        if direction not in (-1, 1):
            raise HTTPException(400, "coactive direction must be +1 or -1")
        if not np.isfinite(magnitude) or magnitude <= 0.0:
            raise HTTPException(400, "coactive magnitude must be positive")
        return {"dim": dim, "direction": direction, "magnitude": magnitude}

    def _coactive_coords(self, coactive: dict, base: Action) -> np.ndarray:
        """Suggested action: one coordinate nudged, snapped to the grid."""
        dim = coactive["dim"]
        span = float(self.space.upper[dim] - self.space.lower[dim])
        coords = np.array(base.coords, dtype=float)
        coords[dim] += coactive["direction"] * coactive["magnitude"] / span
        step = self.space.step
        coords[dim] = float(np.clip(round(coords[dim] / step) * step, 0.0, 1.0))
        return coords

    # -- learning -> validation transition ------------------------------

    def _amax_candidates(self) -> list[Action]:
        """Final line, every record-referenced action, every presented one."""
        assert self.optimizer.current_line is not None
        ordered = (list(self.optimizer.current_line.points)
                   + self.optimizer.dataset.referenced_actions()
                   + [t["action"] for t in self.trials])
        seen: set[int] = set()
        out = []
        for action in ordered:
            if action.id not in seen:
                seen.add(action.id)
                out.append(action)
        return out

    def _begin_validation(self) -> None:
        candidates = self._amax_candidates()
        posterior = laplace_posterior(candidates, self.optimizer.dataset,
                                      self.gp_config)
        self.amax = candidates[int(np.argmax(posterior.mean))]
        randoms = [self.optimizer.store.intern(self.rng.random(self.space.dims))
                   for _ in range(VALIDATION_COMPARISONS)]
        slots = [randoms[i] for i in self.rng.permutation(VALIDATION_COMPARISONS)]
        # chained presentations r,M,r,r,M,r give four scored pairs, each
        # a_max against a distinct random action (twice as the current
        # candidate, twice as the previous), plus two unscored pairs
        m = self.amax
        self.plan = [
            _Presentation(slots[0], scored=False, amax_current=None),
            _Presentation(m, scored=True, amax_current=True),
            _Presentation(slots[1], scored=True, amax_current=False),
            _Presentation(slots[2], scored=False, amax_current=None),
            _Presentation(m, scored=True, amax_current=True),
            _Presentation(slots[3], scored=True, amax_current=False),
        ]
        self.plan_cursor = 0
        self.phase = Phase.VALIDATION
        self._present(self.plan[0].action)

    # -- reporting -------------------------------------------------------

    def _summary(self) -> dict:
        scored = len(self.validation_outcomes)
        preferred = int(sum(self.validation_outcomes))
        return {"a_max": self._physical(self.amax) if self.amax else None,
                "validation": {"scored": scored, "preferred": preferred,
                               "accuracy_pct": (100.0 * preferred / scored
                                                if scored else None)},
                "trials_completed": len(self.completed_trials())}

    def _correlation(self, completed: list[dict]) -> list[dict] | None:
        if not completed:
            return None
        visited = np.array([t["action"].coords for t in completed])
        dataset = self._dataset_snapshot()
        # posterior over everything presented plus coactive suggestions
        # (records may reference actions that were never walked)
        unique: dict[int, Action] = {}
        for t in completed:
            unique.setdefault(t["action"].id, t["action"])
        for action in dataset.referenced_actions():
            unique.setdefault(action.id, action)
        points = list(unique.values())
        posterior = laplace_posterior(points, dataset, self.gp_config)
        coords = np.array([p.coords for p in points])
        rows, _, _ = visitation_correlation(visited, coords, posterior.mean,
                                            bins=HISTOGRAM_BINS)
        out = []
        for dim in range(self.space.dims):
            dim_rows = [r for r in rows if r[0] == dim]
            visits = [r[2] for r in dim_rows]
            utilities = [r[3] for r in dim_rows]
            kept = [(v, u) for v, u in zip(visits, utilities) if u is not None]
            r_val = p_val = None
            if len(kept) >= 3:
                r, p = pearson_r_p([k[0] for k in kept], [k[1] for k in kept])
                if np.isfinite(r):
                    r_val, p_val = float(r), float(p)
            out.append({"dim": dim, "name": self.space.names[dim],
                        "visits": visits,
                        "mean_utility": [None if u is None else float(u)
                                         for u in utilities],
                        "r": r_val, "p": p_val})
        return out

    def _dataset_snapshot(self) -> PreferenceDataset:
        snapshot = PreferenceDataset()
        for rec in list(self.optimizer.dataset.records):
            snapshot.add(rec.winner, rec.loser, rec.source)
        return snapshot

    def report_dict(self) -> dict:
        completed = self.completed_trials()
        scored = len(self.validation_outcomes)
        preferred = int(sum(self.validation_outcomes))
        return {
            "id": self.id,
            "phase": self.phase.value,
            "seed": self.seed,
            "space": self.space_payload(),
            "trials_completed": len(completed),
            "trials": [{"index": t["index"],
                        "action": self._physical(t["action"]),
                        "preference": t["preference"],
                        "coactive": t["coactive"]} for t in completed],
            "a_max": self._physical(self.amax) if self.amax else None,
            "validation": ({"scored": scored, "preferred": preferred,
                            "accuracy_pct": (100.0 * preferred / scored
                                             if scored else None)}
                           if self.phase is not Phase.LEARNING else None),
            "correlation": self._correlation(completed),
        }

    def state_dict(self) -> dict:
        return {"id": self.id, "phase": self.phase.value, "seed": self.seed,
                "space": self.space_payload(),
                "learning_trials": self.learning_trials,
                "trials_completed": len(self.completed_trials()),
                "trial": self.trial_payload()}

    def _refresh_snapshots(self) -> None:
        """Immutable snapshots for lock-free reads; called per mutation."""
        self.report_snapshot = self.report_dict()
        self.state_snapshot = self.state_dict()
        if self.phase is Phase.DONE and self.frozen_report is None:
            self.frozen_report = json.dumps(self.report_snapshot)


# -- session construction and persistence -------------------------------


def _build_space(body: dict) -> ActionSpace:
    preset = body.get("preset")
    custom = body.get("space")
    if (preset is None) == (custom is None):
        raise HTTPException(400, "give exactly one of preset or space")
    if preset is not None:
        if preset not in _PRESETS:
            raise HTTPException(400, f"unknown preset {preset!r}")
        space = _PRESETS[preset]()
    else:
        if not isinstance(custom, dict):
            raise HTTPException(400, "space must be an object")
        try:
            space = ActionSpace(
                lower=np.asarray(custom["lower"], dtype=float),
                upper=np.asarray(custom["upper"], dtype=float),
                granularity=int(custom.get("granularity", 30)),
                names=custom.get("names"))
        except (KeyError, TypeError, ValueError) as exc:
            raise HTTPException(400, f"invalid bounds: {exc}") from None
    config = body.get("config") or {}
    if "granularity" in config:
        try:
            space = replace(space, granularity=int(config["granularity"]))
        except (TypeError, ValueError) as exc:
            raise HTTPException(400, f"invalid granularity: {exc}") from None
    return space


def _build_session(sid: str, body: dict) -> Session:
    space = _build_space(body)
    config = body.get("config") or {}
    if not isinstance(config, dict):
        raise HTTPException(400, "config must be an object")
    seed = body["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise HTTPException(400, "seed must be an integer")
    learning_trials = config.get("learning_trials", LEARNING_TRIALS)
    if (not isinstance(learning_trials, int) or isinstance(learning_trials, bool)
            or learning_trials < 1):
        raise HTTPException(400, "learning_trials must be a positive integer")
    overrides = {}
    for key in _GP_OVERRIDES:
        if key in config:
            try:
                overrides[key] = float(config[key])
            except (TypeError, ValueError):
                raise HTTPException(400, f"{key} must be a number") from None
    try:
        gp_config = replace(GpConfig(), **overrides)
    except ValueError as exc:
        raise HTTPException(400, str(exc)) from None
    return Session(sid, space, seed, learning_trials, gp_config)


def replay_session(log_path: Path) -> Session:
    """Rebuild a session by running its event log through the live code."""
    events = []
    with open(log_path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                events.append(json.loads(line))
    if not events or events[0].get("event") != "created":
        raise ValueError(f"{log_path} does not start with a created event")
    head = events[0]
    session = _build_session(head["id"], head["body"])
    for event in events[1:]:
        if event.get("event") != "feedback":
            raise ValueError(f"unknown event {event.get('event')!r}")
        session.apply_feedback(event["body"])
    return session


def create_app(log_dir: Path | str | None = None) -> FastAPI:
    """Service instance; sessions persist under log_dir when given.

    Existing logs in log_dir are replayed at startup, so a restarted
    service resumes every session where it left off.
    """
    app = FastAPI(title="prefline session service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    directory = Path(log_dir) if log_dir is not None else None

    if directory is not None:
        directory.mkdir(parents=True, exist_ok=True)
        for path in sorted(directory.glob("*.jsonl")):
            session = replay_session(path)
            sessions[session.id] = session

    def _append_event(session: Session, event: dict) -> None:
        if directory is None:
            return
        with open(directory / f"{session.id}.jsonl", "a") as fh:
            fh.write(json.dumps(event) + "\n")

    def _get(sid: str) -> Session:
        session = sessions.get(sid)
        if session is None:
            raise HTTPException(404, f"unknown session {sid!r}")
        return session

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(body: dict):
        body = dict(body)
        if "seed" not in body or body["seed"] is None:
            body["seed"] = secrets.randbits(32)
        sid = secrets.token_hex(16)
        session = _build_session(sid, body)
        with registry_lock:
            sessions[sid] = session
        _append_event(session, {"event": "created", "id": sid,
                                "body": body})
        return {"id": sid, "seed": session.seed,
                "space": session.space_payload(),
                "trial": session.trial_payload()}

    @app.post("/sessions/{sid}/feedback")
    def submit_feedback(sid: str, body: dict):
        session = _get(sid)
        with session.lock:
            response = session.apply_feedback(body)
            _append_event(session, {"event": "feedback", "body": body})
        return response

    @app.get("/sessions/{sid}/state")
    def get_state(sid: str):
        return _get(sid).state_snapshot

    @app.get("/sessions/{sid}/report")
    def get_report(sid: str):
        session = _get(sid)
        frozen = session.frozen_report
        if frozen is not None:
            return Response(content=frozen, media_type="application/json")
        return session.report_snapshot

    return app
