"""Event-sourced session engine driving the optimization loop one
preference at a time.

A session's full state is a pure fold over its append-only event log;
replaying the log reproduces the live state exactly. Mutations serialize
through a per-session lock. The model-fitting/acquisition step runs on a
background thread so request handlers return immediately; clients poll
the session state for phase changes.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from ..loop import (
    ExperimentConfig,
    draw_initial_designs,
    pareto_front,
    refit_models,
    refresh_theta,
    select_next,
    select_query_pair,
)
from ..preference import PreferenceRecord
from ..problems import get_problem
from .store import EventStore, canonical_json


class UnknownSessionError(KeyError):
    pass


class PhaseError(RuntimeError):
    def __init__(self, message: str, phase: str):
        super().__init__(message)
        self.phase = phase


class ConflictError(RuntimeError):
    pass


PHASES = (
    "initializing",
    "awaiting_preference",
    "optimizing",
    "evaluating",
    "menu_ready",
)


@dataclass
class _State:
    """Materialized fold of the event log."""

    config: ExperimentConfig | None = None
    evaluator: dict = field(default_factory=dict)
    init_points: list = field(default_factory=list)
    designs: list = field(default_factory=list)
    attrs: list = field(default_factory=list)
    queries: dict = field(default_factory=dict)
    responses: dict = field(default_factory=dict)
    selected: list | None = None
    selected_n: int | None = None
    acq_values: dict = field(default_factory=dict)
    posterior_summary: dict | None = None
    completed: bool = False
    last_error: str | None = None
    seq: int = 0

    @property
    def init_count(self) -> int:
        return self.config.effective_init_count

    @property
    def pending_m(self) -> int | None:
        m = len(self.responses) + 1
        return m if m in self.queries and m not in self.responses else None

    @property
    def phase(self) -> str:
        if self.completed:
            return "menu_ready"
        if len(self.attrs) < self.init_count:
            return "initializing"
        if self.selected is not None:
            return "evaluating"
        if self.pending_m is not None:
            return "awaiting_preference"
        return "optimizing"

    def pending_evaluation(self):
        """Design awaiting an externally supplied attribute vector."""
        if self.evaluator.get("kind") != "manual":
            return None
        done = len(self.attrs)
        if done < len(self.init_points):
            return done, self.init_points[done]
        if self.selected is not None:
            return self.selected_n, self.selected
        return None


def _apply(state: _State, event: dict, strict_indifference: bool) -> _State:
    etype, data = event["type"], event["data"]
    if etype == "session_created":
        state.config = ExperimentConfig.from_dict(data["config"])
        state.evaluator = data["evaluator"]
    elif etype == "initial_design_chosen":
        state.init_points = data["points"]
    elif etype == "design_evaluated":
        state.designs.append(data["x"])
        state.attrs.append(data["y"])
        state.selected = None
        state.selected_n = None
    elif etype == "query_posed":
        state.queries[data["m"]] = (data["i"], data["j"])
    elif etype == "preference_received":
        m = data["m"]
        state.responses[m] = data["a"]
        state.posterior_summary = _posterior_summary(state, strict_indifference)
        state.last_error = None
    elif etype == "design_selected":
        state.selected = data["x"]
        state.selected_n = data["n"]
        state.acq_values[data["n"]] = data.get("acq_value")
    elif etype == "step_failed":
        state.last_error = data["message"]
        state.selected = None
        state.selected_n = None
    elif etype == "session_completed":
        state.completed = True
    state.seq = event["seq"]
    return state


def _records(state: _State) -> list[PreferenceRecord]:
    out = []
    for m in sorted(state.responses):
        i, j = state.queries[m]
        out.append(
            PreferenceRecord(
                m=m,
                y=np.asarray(state.attrs[i], dtype=float),
                y_other=np.asarray(state.attrs[j], dtype=float),
                a=state.responses[m],
            )
        )
    return out


def _posterior_summary(state: _State, strict_indifference: bool) -> dict:
    config = state.config
    fam = config.build_family()
    prior = config.build_prior()
    m = len(state.responses)
    thetas = refresh_theta(
        config, _records(state), fam, prior, m, strict_indifference=strict_indifference
    )
    summary = thetas.summary()
    summary["num_records"] = m
    return summary


class SessionEngine:
    """One session: event log, materialized state, and the step worker."""

    def __init__(self, session_id: str, store: EventStore, *, strict_indifference=False):
        self.id = session_id
        self.store = store
        self.strict_indifference = strict_indifference
        self._lock = threading.RLock()
        self._state = _State()
        self._worker: threading.Thread | None = None

    # -- construction -------------------------------------------------

    @classmethod
    def create(
        cls, store: EventStore, config: ExperimentConfig, evaluator: dict,
        session_id: str | None = None,
    ) -> "SessionEngine":
        kind = evaluator.get("kind")
        if kind not in ("builtin", "manual"):
            raise ContractError("evaluator.kind must be 'builtin' or 'manual'")
        if kind == "builtin" and config.problem is None:
            raise ContractError("builtin evaluator needs config.problem")
        engine = cls(session_id or uuid.uuid4().hex, store)
        engine._append("session_created", {"config": config.to_dict(), "evaluator": evaluator})
        init = draw_initial_designs(
            config.lower, config.upper, config.effective_init_count,
            [config.seeds.evaluation, 0],
        )
        engine._append(
            "initial_design_chosen", {"points": [[float(v) for v in x] for x in init]}
        )
        if kind == "builtin":
            problem = get_problem(config.problem)
            for n, x in enumerate(init):
                y = problem.evaluate(x)
                engine._append(
                    "design_evaluated",
                    {"n": n, "x": [float(v) for v in x], "y": [float(v) for v in y]},
                )
            engine._after_evaluation()
        return engine

    @classmethod
    def load(cls, store: EventStore, session_id: str) -> "SessionEngine":
        engine = cls(session_id, store)
        for event in store.read_all():
            _apply(engine._state, event, engine.strict_indifference)
        return engine

    def resume(self):
        """Restart background work interrupted by a crash or shutdown."""
        with self._lock:
            phase = self._state.phase
            if phase == "optimizing":
                self._spawn_worker()
            elif phase in ("initializing", "evaluating") and (
                self._state.evaluator.get("kind") == "builtin"
            ):
                self._spawn_worker()

    # -- event plumbing ------------------------------------------------

    def _append(self, etype: str, data: dict):
        with self._lock:
            event = self.store.append(etype, data, self._state.seq + 1)
            _apply(self._state, event, self.strict_indifference)

    # -- views ----------------------------------------------------------

    def state_view(self) -> dict:
        with self._lock:
            s = self._state
            config = s.config
            pending = None
            if s.phase == "awaiting_preference":
                pending = self._query_view_locked()
            pending_eval = s.pending_evaluation()
            menu = self._menu_view_locked()
            return {
                "id": self.id,
                "phase": s.phase,
                "config": config.to_dict(),
                "evaluator": s.evaluator,
                "init_count": s.init_count,
                "iterations_total": config.num_evaluations,
                "iterations_done": len(s.responses),
                "evaluations": [
                    {
                        "n": n,
                        "x": list(s.designs[n]),
                        "y": list(s.attrs[n]),
                        "acq_value": s.acq_values.get(n),
                    }
                    for n in range(len(s.attrs))
                ],
                "preferences": [
                    {
                        "m": m,
                        "i": s.queries[m][0],
                        "j": s.queries[m][1],
                        "a": s.responses[m],
                    }
                    for m in sorted(s.responses)
                ],
                "posterior": s.posterior_summary,
                "pending_query": pending,
                "pending_evaluation": None
                if pending_eval is None
                else {"n": pending_eval[0], "x": list(pending_eval[1])},
                "menu": menu,
                "attribute_labels": list(config.attribute_labels)
                if config.attribute_labels
                else None,
                "last_error": s.last_error,
                "seq": s.seq,
            }

    def canonical_state(self) -> str:
        return canonical_json(self.state_view())

    def _query_view_locked(self) -> dict:
        s = self._state
        m = s.pending_m
        i, j = s.queries[m]
        return {
            "m": m,
            "left": {"index": i, "x": list(s.designs[i]), "y": list(s.attrs[i])},
            "right": {"index": j, "x": list(s.designs[j]), "y": list(s.attrs[j])},
            "attribute_labels": list(s.config.attribute_labels)
            if s.config.attribute_labels
            else None,
        }

    def query_view(self) -> dict:
        with self._lock:
            phase = self._state.phase
            if phase != "awaiting_preference":
                raise PhaseError(f"no pending query in phase {phase!r}", phase)
            return self._query_view_locked()

    def _menu_view_locked(self) -> list[dict]:
        s = self._state
        if not s.attrs:
            return []
        front = pareto_front(np.asarray(s.attrs))
        return [
            {"index": n, "x": list(s.designs[n]), "y": list(s.attrs[n])}
            for n in front
        ]

    def menu_view(self) -> list[dict]:
        with self._lock:
            return self._menu_view_locked()

    def events_since(self, since: int) -> list[dict]:
        return [e for e in self.store.read_all() if e["seq"] > since]

    # -- mutations --------------------------------------------------------

    def submit_preference(self, m: int, a: int) -> dict:
        if a not in (-1, 0, 1):
            raise ContractError("response must be one of -1, 0, 1")
        with self._lock:
            s = self._state
            phase = s.phase
            if phase != "awaiting_preference":
                raise PhaseError(
                    f"preferences can only be submitted in 'awaiting_preference', "
                    f"current phase is {phase!r}",
                    phase,
                )
            if m != s.pending_m:
                raise ConflictError(
                    f"iteration {m} is not pending (expected {s.pending_m})"
                )
            self._append("preference_received", {"m": m, "a": int(a)})
            summary = s.posterior_summary
            self._spawn_worker()
            return {"accepted": True, "m": m, "phase": s.phase, "posterior": summary}

    def submit_evaluation(self, y) -> dict:
        with self._lock:
            s = self._state
            pending = s.pending_evaluation()
            if pending is None:
                raise PhaseError(
                    f"no evaluation pending in phase {s.phase!r}", s.phase
                )
            n, x = pending
            y = [float(v) for v in y]
            if len(y) != s.config.num_attributes:
                raise ContractError(
                    f"expected {s.config.num_attributes} attribute values"
                )
            if not all(np.isfinite(y)):
                raise ContractError("attribute values must be finite")
            self._append("design_evaluated", {"n": n, "x": list(x), "y": y})
            if len(s.attrs) >= s.init_count and s.selected is None:
                self._after_evaluation()
            return {"accepted": True, "n": n, "phase": s.phase}

    # -- stepping ----------------------------------------------------------

    def _after_evaluation(self):
        """Pose the next query or finish, right after an evaluation lands."""
        s = self._state
        done_iters = len(s.attrs) - s.init_count
        if done_iters >= s.config.num_evaluations:
            if not s.completed:
                self._append("session_completed", {})
            return
        m = len(s.responses) + 1
        if m not in s.queries:
            i, j = select_query_pair(s.attrs, [s.config.seeds.dm, 1, m])
            self._append("query_posed", {"m": m, "i": i, "j": j})

    def _spawn_worker(self):
        if self._worker is not None and self._worker.is_alive():
            return
        self._worker = threading.Thread(target=self._step, daemon=True)
        self._worker.start()

    def _step(self):
        """Run one model/selection/evaluation step off the request path.

        The lock is held only to snapshot state and to append events; the
        heavy compute happens in between. No competing mutation is
        possible while the session is optimizing/evaluating, so the
        snapshots stay valid.
        """
        try:
            with self._lock:
                config = self._state.config
                builtin = self._state.evaluator.get("kind") == "builtin"
                init_missing = builtin and len(self._state.attrs) < len(
                    self._state.init_points
                )
            if init_missing:
                problem = get_problem(config.problem)
                while True:
                    with self._lock:
                        n = len(self._state.attrs)
                        if n >= len(self._state.init_points):
                            self._after_evaluation()
                            break
                        x = np.asarray(self._state.init_points[n], dtype=float)
                    y = problem.evaluate(x)
                    self._append(
                        "design_evaluated",
                        {"n": n, "x": [float(v) for v in x], "y": [float(v) for v in y]},
                    )
            with self._lock:
                do_select = self._state.phase == "optimizing"
            if do_select:
                self._select_design()
            if builtin:
                with self._lock:
                    sel = (
                        None
                        if self._state.selected is None
                        else (self._state.selected_n, list(self._state.selected))
                    )
                if sel is not None:
                    problem = get_problem(config.problem)
                    y = problem.evaluate(np.asarray(sel[1], dtype=float))
                    self._append(
                        "design_evaluated",
                        {"n": sel[0], "x": sel[1], "y": [float(v) for v in y]},
                    )
                    with self._lock:
                        self._after_evaluation()
        except Exception as exc:
            try:
                self._append("step_failed", {"message": f"{type(exc).__name__}: {exc}"})
            except Exception:
                pass

    def _select_design(self):
        with self._lock:
            s = self._state
            config = s.config
            m = len(s.responses)
            records = _records(s)
            X = np.asarray(s.designs, dtype=float)
            Y = np.asarray(s.attrs, dtype=float)
            n_next = len(s.attrs)
        fam = config.build_family()
        prior = config.build_prior()
        thetas = refresh_theta(
            config, records, fam, prior, m,
            strict_indifference=self.strict_indifference,
        )
        if config.policy == "random":
            x_next, acq = select_next(config, None, thetas, fam, None, m)
        else:
            gp_state = refit_models(config, X, Y, m)
            x_next, acq = select_next(config, gp_state, thetas, fam, Y, m)
        self._append(
            "design_selected",
            {
                "n": n_next,
                "x": [float(v) for v in x_next],
                "acq_value": None if acq is None else float(acq),
            },
        )
