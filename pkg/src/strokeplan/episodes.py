"""Single-episode simulation with seeded, replayable randomness.

Each episode key ``(master_seed, k)`` expands into four independent
random streams (initial state, environment, policy, filter), so the
same key always yields the same initial state regardless of policy and
the full trace is reproducible byte for byte. Paired comparisons across
policies fall out of sharing the key.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .beliefs import (Marginals, exact_update_or_predict, initial_exact,
                      initial_particles, marginals, particle_update)
from .model import (Action, Clinical, CtReading, DsaReport, Observation,
                    PatientState, StrokeModel)
from .policies import make_policy

STREAM_INIT = 0
STREAM_ENV = 1
STREAM_POLICY = 2
STREAM_FILTER = 3

TERMINAL_DISCHARGE = "discharge"
TERMINAL_HORIZON = "horizon"
TERMINAL_FAILED = "failed"


def episode_rng(master_seed: int, k: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([master_seed, k, stream])


@dataclass(frozen=True)
class StepRecord:
    """What happened at one epoch: decision context plus outcome."""

    t: int
    action: Action
    observation: Observation
    reward: float
    state: PatientState
    marginals: Marginals


@dataclass
class EpisodeTrace:
    """Complete record of one simulated episode.

    ``discounted_return`` is ``sum(gamma**step.t * step.reward)`` plus
    ``gamma**final_state.t * terminal_penalty``; ``recompute_return``
    re-derives it from the steps as an integrity check.
    """

    policy: str
    master_seed: int
    k: int
    gamma: float
    initial_state: PatientState
    steps: List[StepRecord] = field(default_factory=list)
    final_state: Optional[PatientState] = None
    terminal_reason: str = ""
    terminal_penalty: float = 0.0
    discounted_return: float = 0.0
    failed: Optional[str] = None

    def recompute_return(self) -> float:
        total = 0.0
        for step in self.steps:
            total += self.gamma ** step.t * step.reward
        if self.final_state is not None and self.failed is None:
            total += self.gamma ** self.final_state.t * self.terminal_penalty
        return total


def run_episode(model: StrokeModel, policy_name: str, master_seed: int,
                k: int, solver_config=None) -> EpisodeTrace:
    """Simulate one episode of ``policy_name`` under episode key (seed, k).

    A policy or filter exception does not propagate: the trace comes
    back with ``failed`` set and the steps completed so far, so batch
    runs can count and exclude it.
    """
    init_rng = episode_rng(master_seed, k, STREAM_INIT)
    env_rng = episode_rng(master_seed, k, STREAM_ENV)
    policy_rng = episode_rng(master_seed, k, STREAM_POLICY)
    filter_rng = episode_rng(master_seed, k, STREAM_FILTER)

    policy = make_policy(policy_name, model, policy_rng, solver_config)
    state = model.sample_initial_state(init_rng)
    trace = EpisodeTrace(policy=policy.name, master_seed=master_seed, k=k,
                         gamma=model.params.gamma, initial_state=state)

    exact = initial_exact(model)
    particle = None
    if policy.belief_backend == "particle":
        particle = initial_particles(model, model.params.n_particles,
                                     filter_rng)

    while True:
        belief = particle if particle is not None else exact
        try:
            action = policy.act(belief, state.t)
        except Exception as exc:  # solver failure must not kill the batch
            trace.failed = f"{type(exc).__name__}: {exc}"
            trace.terminal_reason = TERMINAL_FAILED
            trace.final_state = state
            return trace
        reward = model.reward(state, action)
        next_state = model.transition(state, action, env_rng)
        obs = model.sample_observation(next_state, action, env_rng)
        trace.steps.append(StepRecord(t=state.t, action=action,
                                      observation=obs, reward=reward,
                                      state=state,
                                      marginals=marginals(belief)))
        trace.discounted_return += model.params.gamma ** state.t * reward
        if model.is_terminal(next_state, action):
            trace.final_state = next_state
            trace.terminal_reason = (TERMINAL_DISCHARGE
                                     if action == Action.DISC
                                     else TERMINAL_HORIZON)
            trace.terminal_penalty = model.terminal_penalty(next_state)
            trace.discounted_return += (model.params.gamma ** next_state.t
                                        * trace.terminal_penalty)
            return trace
        try:
            if particle is not None:
                particle = particle_update(model, particle, action, obs,
                                           filter_rng)
            else:
                exact, _ = exact_update_or_predict(model, exact, action, obs)
        except Exception as exc:
            trace.failed = f"{type(exc).__name__}: {exc}"
            trace.terminal_reason = TERMINAL_FAILED
            trace.final_state = next_state
            return trace
        state = next_state


# -- JSON round-trip ----------------------------------------------------

def state_to_dict(state: PatientState) -> dict:
    return {"is_ane": state.is_ane, "is_avm": state.is_avm,
            "is_occ": state.is_occ, "t": state.t}


def state_from_dict(raw: dict) -> PatientState:
    return PatientState(bool(raw["is_ane"]), bool(raw["is_avm"]),
                        bool(raw["is_occ"]), int(raw["t"]))


def observation_to_dict(obs: Observation) -> dict:
    if isinstance(obs, Clinical):
        return {"kind": "clinical", "ct": obs.ct.value, "siriraj": obs.siriraj}
    return {"kind": "dsa", "pred_ane": obs.pred_ane, "pred_avm": obs.pred_avm,
            "pred_occ": obs.pred_occ}


def observation_from_dict(raw: dict) -> Observation:
    if raw["kind"] == "clinical":
        return Clinical(ct=CtReading(raw["ct"]), siriraj=int(raw["siriraj"]))
    if raw["kind"] == "dsa":
        return DsaReport(bool(raw["pred_ane"]), bool(raw["pred_avm"]),
                         bool(raw["pred_occ"]))
    raise ValueError(f"unknown observation kind {raw.get('kind')!r}")


def trace_to_dict(trace: EpisodeTrace) -> dict:
    return {
        "policy": trace.policy,
        "master_seed": trace.master_seed,
        "k": trace.k,
        "gamma": trace.gamma,
        "initial_state": state_to_dict(trace.initial_state),
        "steps": [
            {"t": s.t, "action": s.action.name,
             "observation": observation_to_dict(s.observation),
             "reward": s.reward,
             "state": state_to_dict(s.state),
             "marginals": {"p_ane": s.marginals.p_ane,
                           "p_avm": s.marginals.p_avm,
                           "p_occ": s.marginals.p_occ,
                           "p_stroke_free": s.marginals.p_stroke_free}}
            for s in trace.steps
        ],
        "final_state": (state_to_dict(trace.final_state)
                        if trace.final_state is not None else None),
        "terminal_reason": trace.terminal_reason,
        "terminal_penalty": trace.terminal_penalty,
        "discounted_return": trace.discounted_return,
        "failed": trace.failed,
    }


def trace_from_dict(raw: dict) -> EpisodeTrace:
    trace = EpisodeTrace(
        policy=raw["policy"], master_seed=int(raw["master_seed"]),
        k=int(raw["k"]), gamma=float(raw["gamma"]),
        initial_state=state_from_dict(raw["initial_state"]))
    for s in raw["steps"]:
        m = s["marginals"]
        trace.steps.append(StepRecord(
            t=int(s["t"]), action=Action[s["action"]],
            observation=observation_from_dict(s["observation"]),
            reward=float(s["reward"]), state=state_from_dict(s["state"]),
            marginals=Marginals(m["p_ane"], m["p_avm"], m["p_occ"],
                                m["p_stroke_free"])))
    if raw["final_state"] is not None:
        trace.final_state = state_from_dict(raw["final_state"])
    trace.terminal_reason = raw["terminal_reason"]
    trace.terminal_penalty = float(raw["terminal_penalty"])
    trace.discounted_return = float(raw["discounted_return"])
    trace.failed = raw.get("failed")
    return trace
