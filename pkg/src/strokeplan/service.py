"""Session-oriented HTTP JSON API for interactive decision support.

A session holds an exact belief over the eight condition combinations
plus the epoch counter. Clients append (action, observation) pairs as
they occur; the server advances the belief with the exact filter, so
human-entered observations never suffer particle noise. Recommendations
are read-only: expert policies report their decision branch, the search
policy returns per-action value bounds, and a request seed makes the
search reproducible.

Sessions persist in an embedded sqlite store keyed by session id with a
configurable idle TTL. Requests to the same session are serialized by a
per-session lock; different sessions proceed in parallel.

Environment variables (overridden by explicit factory arguments):

- ``STROKEPLAN_PARAMS``: path to a model parameter TOML file.
- ``STROKEPLAN_DB``: sqlite path for the session store (default in-memory).
- ``STROKEPLAN_SESSION_TTL``: idle expiry in seconds (default 86400).
"""
from __future__ import annotations

import dataclasses
import json
import os
import sqlite3
import threading
import time
import uuid
from datetime import datetime, timezone
from typing import Annotated, Dict, Literal, Optional, Union

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel, Field

from .beliefs import (ExactBelief, Marginals, exact_update_or_predict,
                      initial_exact, marginals)
from .model import (Action, Clinical, CtReading, DsaReport, ModelParams,
                    StrokeModel, load_params, load_raw_config)
from .policies import expert_config_for, expert_decision
from .solver import PlanningError, SolverConfig, plan

DEFAULT_TTL_SECONDS = 86400.0

# Recommendations must be repeatable given (belief, seed), so unless the
# request explicitly asks for a wall-clock budget the search runs a pinned
# number of trials and the time budget becomes a generous safety valve.
DEFAULT_RECOMMEND_TRIALS = 32
SAFETY_TIME_BUDGET_MS = 1e9


# -- request payloads ------------------------------------------------------

class ClinicalPayload(BaseModel):
    kind: Literal["clinical"]
    ct: Literal["CT_POSITIVE", "CT_NEGATIVE"]
    siriraj: int = Field(ge=-5, le=5)


class DsaPayload(BaseModel):
    kind: Literal["dsa"]
    pred_ane: bool
    pred_avm: bool
    pred_occ: bool


ObservationPayload = Annotated[Union[ClinicalPayload, DsaPayload],
                               Field(discriminator="kind")]

ActionName = Literal["WAIT", "HOSP", "DSA", "COIL", "EMBO", "REVC", "DISC"]


class CreateSessionRequest(BaseModel):
    config_overrides: dict = Field(default_factory=dict)


class StepRequest(BaseModel):
    action: ActionName
    observation: ObservationPayload


class RecommendRequest(BaseModel):
    policy: Literal["random", "expert-hosp", "expert-dsa", "despot"] = "despot"
    seed: int = 0
    solver_overrides: dict = Field(default_factory=dict)


def _validation_error(loc, msg: str) -> HTTPException:
    """422 in the same shape FastAPI uses for body validation failures."""
    return HTTPException(status_code=422, detail=[
        {"loc": list(loc), "msg": msg, "type": "value_error"}])


# -- session store ---------------------------------------------------------

class SessionStore:
    """Sqlite-backed session records with idle-TTL expiry.

    Records are small JSON blobs; one coarse lock serializes the sqlite
    connection, while per-session locks give each session the
    single-writer guarantee without blocking other sessions' updates.
    """

    def __init__(self, db_path: str, ttl_seconds: float):
        self.ttl_seconds = ttl_seconds
        self._conn = sqlite3.connect(db_path, check_same_thread=False)
        self._db_lock = threading.Lock()
        self._session_locks: Dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        with self._db_lock:
            self._conn.execute(
                "CREATE TABLE IF NOT EXISTS sessions ("
                " session_id TEXT PRIMARY KEY,"
                " created REAL NOT NULL,"
                " updated REAL NOT NULL,"
                " payload TEXT NOT NULL)")
            self._conn.commit()

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._session_locks.setdefault(session_id,
                                                  threading.Lock())

    def _purge(self, now: float) -> None:
        self._conn.execute("DELETE FROM sessions WHERE updated < ?",
                           (now - self.ttl_seconds,))

    def put(self, session_id: str, payload: dict, created: float,
            updated: float) -> None:
        with self._db_lock:
            self._purge(updated)
            self._conn.execute(
                "INSERT OR REPLACE INTO sessions VALUES (?, ?, ?, ?)",
                (session_id, created, updated, json.dumps(payload)))
            self._conn.commit()

    def get(self, session_id: str) -> Optional[tuple]:
        now = time.time()
        with self._db_lock:
            self._purge(now)
            self._conn.commit()
            row = self._conn.execute(
                "SELECT created, updated, payload FROM sessions"
                " WHERE session_id = ?", (session_id,)).fetchone()
        if row is None:
            return None
        return row[0], row[1], json.loads(row[2])

    def delete(self, session_id: str) -> bool:
        with self._db_lock:
            cur = self._conn.execute(
                "DELETE FROM sessions WHERE session_id = ?", (session_id,))
            self._conn.commit()
        return cur.rowcount > 0


# -- belief/serialization helpers ------------------------------------------

def _observation_from_payload(payload):
    if payload.kind == "clinical":
        return Clinical(ct=CtReading(payload.ct), siriraj=payload.siriraj)
    return DsaReport(pred_ane=payload.pred_ane, pred_avm=payload.pred_avm,
                     pred_occ=payload.pred_occ)


def _marginals_dict(m: Marginals) -> dict:
    return {"p_ane": m.p_ane, "p_avm": m.p_avm, "p_occ": m.p_occ,
            "p_stroke_free": m.p_stroke_free}


def _belief_dict(belief: ExactBelief) -> dict:
    return {"weights": [float(w) for w in belief.weights], "t": belief.t}


def _iso(ts: float) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).isoformat()


def replay_history(model: StrokeModel, history: list) -> ExactBelief:
    """Rebuild the belief a history of (action, observation) pairs implies.

    Runs the same updater the step endpoint uses, so a stored belief
    must equal the replayed one exactly.
    """
    belief = initial_exact(model)
    for entry in history:
        action = Action[entry["action"]]
        obs_raw = dict(entry["observation"])
        kind = obs_raw.pop("kind")
        obs = (Clinical(ct=CtReading(obs_raw["ct"]),
                        siriraj=int(obs_raw["siriraj"]))
               if kind == "clinical" else
               DsaReport(bool(obs_raw["pred_ane"]), bool(obs_raw["pred_avm"]),
                         bool(obs_raw["pred_occ"])))
        belief, _ = exact_update_or_predict(model, belief, action, obs)
    return belief


# -- application factory ----------------------------------------------------

def create_app(params: Optional[ModelParams] = None,
               params_path: Optional[str] = None,
               db_path: Optional[str] = None,
               ttl_seconds: Optional[float] = None) -> FastAPI:
    """Build the service. Arguments beat environment variables."""
    if params is None:
        params_path = params_path or os.environ.get("STROKEPLAN_PARAMS")
        params = load_params(params_path)
    db_path = db_path or os.environ.get("STROKEPLAN_DB") or ":memory:"
    if ttl_seconds is None:
        ttl_seconds = float(os.environ.get("STROKEPLAN_SESSION_TTL",
                                           DEFAULT_TTL_SECONDS))

    app = FastAPI(title="strokeplan session service", version="1.0")
    store = SessionStore(db_path, ttl_seconds)
    app.state.store = store
    app.state.base_params = params
    app.state.default_solver = SolverConfig.from_dict(
        load_raw_config().get("solver", {}))

    model_cache: Dict[str, StrokeModel] = {}
    cache_lock = threading.Lock()

    def model_for(overrides: dict) -> StrokeModel:
        key = json.dumps(overrides, sort_keys=True)
        with cache_lock:
            cached = model_cache.get(key)
            if cached is None:
                cached = StrokeModel(params.with_overrides(overrides))
                model_cache[key] = cached
            return cached

    def load_session(session_id: str) -> tuple:
        record = store.get(session_id)
        if record is None:
            raise HTTPException(status_code=404,
                                detail=f"unknown session {session_id!r}")
        return record

    def session_response(session_id: str, created: float, updated: float,
                         payload: dict) -> dict:
        belief = ExactBelief(np.array(payload["weights"]), payload["t"])
        return {
            "session_id": session_id,
            "belief": _belief_dict(belief),
            "marginals": _marginals_dict(marginals(belief)),
            "history": payload["history"],
            "config_overrides": payload["overrides"],
            "created": _iso(created),
            "updated": _iso(updated),
        }

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionRequest) -> dict:
        try:
            model = model_for(body.config_overrides)
        except (ValueError, TypeError) as exc:
            raise _validation_error(("body", "config_overrides"), str(exc))
        belief = initial_exact(model)
        session_id = uuid.uuid4().hex
        now = time.time()
        payload = {
            "overrides": body.config_overrides,
            "weights": [float(w) for w in belief.weights],
            "t": belief.t,
            "history": [],
        }
        store.put(session_id, payload, created=now, updated=now)
        return session_response(session_id, now, now, payload)

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        created, updated, payload = load_session(session_id)
        return session_response(session_id, created, updated, payload)

    @app.delete("/v1/sessions/{session_id}", status_code=204)
    def delete_session(session_id: str) -> Response:
        with store.lock_for(session_id):
            if not store.delete(session_id):
                raise HTTPException(status_code=404,
                                    detail=f"unknown session {session_id!r}")
        return Response(status_code=204)

    @app.post("/v1/sessions/{session_id}/step")
    def step_session(session_id: str, body: StepRequest) -> dict:
        action = Action[body.action]
        needs_dsa = action == Action.DSA
        if needs_dsa != (body.observation.kind == "dsa"):
            want = "dsa" if needs_dsa else "clinical"
            raise _validation_error(
                ("body", "observation", "kind"),
                f"action {action.name} requires a {want!r} observation")
        with store.lock_for(session_id):
            created, _, payload = load_session(session_id)
            model = model_for(payload["overrides"])
            belief = ExactBelief(np.array(payload["weights"]), payload["t"])
            if belief.t >= model.params.horizon:
                raise HTTPException(
                    status_code=409,
                    detail="admission horizon reached; no further steps")
            obs = _observation_from_payload(body.observation)
            belief, degenerate = exact_update_or_predict(model, belief,
                                                         action, obs)
            payload["weights"] = [float(w) for w in belief.weights]
            payload["t"] = belief.t
            payload["history"].append({
                "action": action.name,
                "observation": body.observation.model_dump(),
            })
            now = time.time()
            store.put(session_id, payload, created=created, updated=now)
        out = {
            "session_id": session_id,
            "belief": _belief_dict(belief),
            "marginals": _marginals_dict(marginals(belief)),
            "degenerate_update": degenerate,
        }
        if degenerate:
            out["warning"] = ("observation has zero likelihood under the "
                              "predicted belief; belief fell back to the "
                              "one-step prediction")
        return out

    @app.post("/v1/sessions/{session_id}/recommend")
    def recommend(session_id: str, body: RecommendRequest) -> dict:
        _, _, payload = load_session(session_id)
        model = model_for(payload["overrides"])
        belief = ExactBelief(np.array(payload["weights"]), payload["t"])
        if belief.t >= model.params.horizon:
            raise HTTPException(
                status_code=409,
                detail="admission horizon reached; nothing to recommend")
        out = {"policy": body.policy, "seed": body.seed, "branch": None,
               "dominant": None, "value_bounds": None, "diagnostics": None}
        if body.policy == "random":
            rng = np.random.default_rng(body.seed)
            out["action"] = Action(int(rng.integers(len(Action)))).name
        elif body.policy in ("expert-hosp", "expert-dsa"):
            diagnostic = (Action.HOSP if body.policy == "expert-hosp"
                          else Action.DSA)
            config = expert_config_for(model, diagnostic)
            decision = expert_decision(config, marginals(belief))
            out["action"] = decision.action.name
            out["branch"] = decision.branch
            out["dominant"] = decision.dominant
        else:
            try:
                config = app.state.default_solver.with_overrides(
                    body.solver_overrides)
            except (ValueError, TypeError) as exc:
                raise _validation_error(("body", "solver_overrides"),
                                        str(exc))
            if "time_budget_ms" not in body.solver_overrides:
                config = dataclasses.replace(
                    config, time_budget_ms=SAFETY_TIME_BUDGET_MS)
            if config.max_trials is None:
                config = dataclasses.replace(
                    config, max_trials=DEFAULT_RECOMMEND_TRIALS)
            rng = np.random.default_rng(body.seed)
            try:
                result = plan(belief, config, model, rng)
            except PlanningError as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            out["action"] = result.action.name
            out["value_bounds"] = {
                Action(a).name: {"lower": lo, "upper": hi}
                for a, (lo, hi) in sorted(result.value_estimates.items())}
            diagnostics = dict(result.diagnostics)
            diagnostics.pop("elapsed_ms", None)  # timing breaks repeatability
            out["diagnostics"] = diagnostics
        return out

    return app
