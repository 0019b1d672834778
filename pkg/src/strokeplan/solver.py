"""Anytime online planner over determinized scenarios.

``plan`` builds a sparse lookahead tree from the current belief. Each
scenario pins a sampled start state together with a pre-committed matrix
of uniform draws, so every (action sequence, scenario) pair maps to
exactly one trajectory and repeated searches from the same seed are
bit-identical. Tree nodes group the scenarios that share an observation
history; per-node value intervals are tightened by trials that descend
along the most promising action (by upper bound) into the child with
the largest weighted bound gap, expand one leaf, and back up.

Bounds at a leaf:

- lower: mean return of a belief-tracked expert rollout over the node's
  scenarios. The rollout sees only the observations generated along the
  way, never the hidden state, so it is a realizable policy value.
- upper: best mean immediate reward plus a ``gamma * r_max / (1 - gamma)``
  tail.

Nodes at the planning depth contribute zero further value: the planner
optimizes the truncated window, and re-planning every epoch extends the
effective horizon.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .beliefs import (Belief, ExactBelief, exact_update_or_predict,
                      marginals as belief_marginals, systematic_resample,
                      weights_of)
from .model import (ACTIONS, Action, N_FLAG_STATES, PatientState, StrokeModel)
from .policies import ExpertConfig, expert_decision

_EPS_GAP = 1e-6

ROLLOUT_POLICIES = ("expert-hosp", "expert-dsa")


class PlanningError(RuntimeError):
    """Raised when planning is requested from an unusable belief."""


@dataclass(frozen=True)
class SolverConfig:
    """Planner knobs.

    ``time_budget_ms`` caps wall time (checked between trials, so it can
    be overshot by at most one node expansion); ``max_trials`` pins the
    number of trials for reproducible runs and is checked alongside the
    time budget, whichever trips first. ``regularization_lambda``
    charges a flat penalty per decision node the plan commits to, biasing
    the search toward the rollout policy when bounds are loose; zero
    disables it.
    """

    n_scenarios: int = 100
    max_depth: int = 10
    time_budget_ms: float = 1000.0
    regularization_lambda: float = 0.0
    rollout_policy: str = "expert-hosp"
    max_trials: Optional[int] = None

    def validate(self) -> None:
        if self.n_scenarios < 1:
            raise ValueError("n_scenarios must be positive")
        if self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.time_budget_ms <= 0:
            raise ValueError("time_budget_ms must be positive")
        if self.regularization_lambda < 0:
            raise ValueError("regularization_lambda must be non-negative")
        if self.rollout_policy not in ROLLOUT_POLICIES:
            raise ValueError(f"rollout_policy must be one of {ROLLOUT_POLICIES}")
        if self.max_trials is not None and self.max_trials < 0:
            raise ValueError("max_trials must be non-negative")

    @classmethod
    def from_dict(cls, raw: dict) -> "SolverConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown solver option(s): {sorted(unknown)}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def with_overrides(self, overrides: dict) -> "SolverConfig":
        """Copy with the given fields replaced; unknown keys are rejected."""
        merged = dict(self.__dict__)
        base = dict(merged)
        base.update(overrides)
        unknown = set(base) - set(merged)
        if unknown:
            raise ValueError(f"unknown solver option(s): {sorted(unknown)}")
        cfg = SolverConfig(**base)
        cfg.validate()
        return cfg


@dataclass(eq=False)
class Scenario:
    """A determinized start state plus pre-committed uniforms.

    ``noise[k]`` holds the six uniforms for step ``k``: three onset
    draws followed by three observation draws.
    """

    start_state: PatientState
    noise: np.ndarray


@dataclass
class PlanResult:
    """Chosen action with per-root-action bound intervals and search stats."""

    action: Action
    value_estimates: Dict[Action, Tuple[float, float]]
    diagnostics: dict = field(default_factory=dict)


def _sample_scenario_arrays(model: StrokeModel, belief: Belief,
                            n_scenarios: int, max_depth: int,
                            rng: np.random.Generator):
    weights = weights_of(belief)
    if not np.all(np.isfinite(weights)) or weights.sum() <= 0:
        raise PlanningError("belief is empty or not normalizable")
    weights = weights / weights.sum()
    # stratified start states: hypotheses with mass >= 1/n always appear
    flags = systematic_resample(weights, n_scenarios, rng)
    noise = rng.random((n_scenarios, max_depth, 6))
    return flags.astype(np.int8), noise, weights


def sample_scenarios(model: StrokeModel, belief: Belief, n_scenarios: int,
                     max_depth: int, rng: np.random.Generator
                     ) -> List[Scenario]:
    """Materialize the determinized scenario set ``plan`` would draw."""
    flags, noise, _ = _sample_scenario_arrays(model, belief, n_scenarios,
                                              max_depth, rng)
    t = belief.t
    return [Scenario(PatientState.from_flag_index(int(f), t), noise[i])
            for i, f in enumerate(flags)]


def rollout_value(model: StrokeModel, state: PatientState, scenario: Scenario,
                  policy, depth: int,
                  belief: Optional[ExactBelief] = None) -> float:
    """Reference single-trajectory rollout along a scenario's noise rows.

    ``policy.act(belief, t)`` picks each action; the tracked belief is
    advanced with the emitted observation so belief-based policies stay
    honest. Deterministic whenever the policy is.
    """
    gamma = model.params.gamma
    total, disc = 0.0, 1.0
    for k in range(depth):
        action = policy.act(belief, state.t)
        next_state, obs, reward, terminated, penalty = model.det_step(
            state, action, scenario.noise[k])
        total += disc * reward
        if terminated:
            total += disc * gamma * penalty
            break
        if belief is not None:
            belief, _ = exact_update_or_predict(model, belief, action, obs)
        state = next_state
        disc *= gamma
    return total


def _expert_actions_batch(beliefs: np.ndarray, cfg: ExpertConfig,
                          model: StrokeModel) -> np.ndarray:
    """Vectorized expert rule over rows of belief weights."""
    perm = [("ane", "avm", "occ").index(name) for name in cfg.tie_break_order]
    pm = beliefs @ model.flag_cols  # columns: ane, avm, occ
    pm_ordered = pm[:, perm]
    dom = np.argmax(pm_ordered, axis=1)  # first max wins the tie order
    rows = np.arange(len(beliefs))
    treat_lookup = np.array(
        [(Action.COIL, Action.EMBO, Action.REVC)[p] for p in perm],
        dtype=np.int64)
    actions = np.full(len(beliefs), int(cfg.default_diagnostic), dtype=np.int64)
    treat_mask = pm_ordered[rows, dom] > cfg.pdom_thres
    actions[treat_mask] = treat_lookup[dom[treat_mask]]
    actions[beliefs[:, 0] > cfg.pdisc_min] = int(Action.DISC)
    return actions


def _rollout_batch(model: StrokeModel, flags: np.ndarray, t0: int,
                   beliefs: np.ndarray, noise: np.ndarray, depth: int,
                   cfg: ExpertConfig) -> np.ndarray:
    """Belief-tracked expert rollouts for many rows at once.

    ``flags`` (m,) are true start states, ``beliefs`` (m, 8) the tracked
    posteriors, ``noise`` (m, depth, 6) the pre-committed uniforms. All
    rows share the start epoch ``t0``. Returns per-row discounted
    returns measured from the rollout start.
    """
    m = flags.shape[0]
    values = np.zeros(m)
    if depth <= 0 or m == 0:
        return values
    gamma = model.params.gamma
    horizon = model.params.horizon
    beliefs = beliefs.copy()
    flags = flags.copy()
    active = np.ones(m, dtype=bool)
    disc = 1.0
    for k in range(depth):
        if not active.any():
            break
        rows = np.flatnonzero(active)
        actions = _expert_actions_batch(beliefs[rows], cfg, model)
        t_next = t0 + k + 1
        for a_val in np.unique(actions):
            action = Action(int(a_val))
            sub = rows[actions == a_val]
            u = noise[sub, k, :]
            next_flags = model.transition_flags_batch(flags[sub], action,
                                                      u[:, :3])
            values[sub] += disc * model.reward_matrix[flags[sub], action]
            if action == Action.DISC or t_next >= horizon:
                values[sub] += disc * gamma * model.penalty_vector[next_flags]
                active[sub] = False
                continue
            codes = model.observation_codes_batch(next_flags, action,
                                                  u[:, 3:6])
            predicted = beliefs[sub] @ model.transition_matrices[action]
            if action == Action.DSA:
                like = model.dsa_like[codes]
            else:
                like = model.clinical_like[model.obs_setting(action), codes]
            posterior = predicted * like
            norm = posterior.sum(axis=1, keepdims=True)
            ok = norm[:, 0] > 0
            posterior = np.where(ok[:, None], posterior / np.where(ok[:, None],
                                 norm, 1.0), predicted)
            beliefs[sub] = posterior
            flags[sub] = next_flags
        disc *= gamma
    return values


class _Node:
    """Scenario bundle sharing one observation history."""

    __slots__ = ("idx", "flags", "depth", "t", "belief", "l0", "u0",
                 "lower", "upper", "reg_lower", "children", "mean_reward",
                 "expanded")

    def __init__(self, idx, flags, depth, t, belief):
        self.idx = idx
        self.flags = flags
        self.depth = depth
        self.t = t
        self.belief = belief
        self.l0 = 0.0
        self.u0 = 0.0
        self.lower = 0.0
        self.upper = 0.0
        self.reg_lower = 0.0
        self.children: Dict[int, Dict[int, "_Node"]] = {}
        self.mean_reward: Dict[int, float] = {}
        self.expanded = False

    @property
    def m(self) -> int:
        return self.idx.size


class _Search:
    def __init__(self, model: StrokeModel, config: SolverConfig,
                 flags: np.ndarray, noise: np.ndarray,
                 root_belief: np.ndarray, root_t: int):
        config.validate()
        gamma = model.params.gamma
        if gamma >= 1.0:
            raise PlanningError("planner bounds require gamma < 1")
        self.model = model
        self.config = config
        self.noise = noise
        self.gamma = gamma
        self.tail = gamma * model.max_step_reward / (1.0 - gamma)
        self.rollout_cfg = ExpertConfig(
            default_diagnostic=(Action.HOSP
                                if config.rollout_policy == "expert-hosp"
                                else Action.DSA),
            pdom_thres=model.params.pdom_thres,
            pdisc_min=model.params.pdisc_min)
        self.expansions = 0
        self.deepest = 0
        self.root = _Node(np.arange(len(flags)), flags, 0, root_t,
                          root_belief)
        self._init_bounds(self.root)

    def _init_bounds(self, node: _Node) -> None:
        remaining = self.config.max_depth - node.depth
        if remaining <= 0:
            node.l0 = node.u0 = 0.0
        else:
            beliefs = np.broadcast_to(node.belief,
                                      (node.m, N_FLAG_STATES)).copy()
            vals = _rollout_batch(self.model, node.flags, node.t, beliefs,
                                  self.noise[node.idx, node.depth:], remaining,
                                  self.rollout_cfg)
            node.l0 = float(vals.mean())
            node.u0 = float(self.model.reward_matrix[node.flags].mean(axis=0)
                            .max()) + self.tail
        node.lower, node.upper = node.l0, node.u0
        node.reg_lower = node.l0

    def _expand(self, node: _Node) -> None:
        model, gamma = self.model, self.gamma
        depth, t_next = node.depth, node.t + 1
        child_depth = depth + 1
        remaining = self.config.max_depth - child_depth
        for action in ACTIONS:
            u = self.noise[node.idx, depth]
            rewards = model.reward_matrix[node.flags, action].astype(float)
            next_flags = model.transition_flags_batch(node.flags, action,
                                                      u[:, :3])
            if action == Action.DISC or t_next >= model.params.horizon:
                rewards = rewards + gamma * model.penalty_vector[next_flags]
                node.mean_reward[int(action)] = float(rewards.mean())
                node.children[int(action)] = {}
                continue
            node.mean_reward[int(action)] = float(rewards.mean())
            codes = model.observation_codes_batch(next_flags, action,
                                                  u[:, 3:6])
            predicted = node.belief @ model.transition_matrices[action]
            if action == Action.DSA:
                like_table = model.dsa_like
            else:
                like_table = model.clinical_like[model.obs_setting(action)]
            kids: Dict[int, _Node] = {}
            for code in np.unique(codes):
                mask = codes == code
                posterior = predicted * like_table[code]
                total = posterior.sum()
                child_belief = posterior / total if total > 0 else predicted
                kids[int(code)] = _Node(node.idx[mask], next_flags[mask],
                                        child_depth, t_next, child_belief)
            node.children[int(action)] = kids
            if remaining <= 0:
                for kid in kids.values():
                    kid.l0 = kid.u0 = kid.lower = kid.upper = 0.0
                    kid.reg_lower = 0.0
                continue
            # One batched rollout covers every child of this action.
            order = np.concatenate([kid.idx for kid in kids.values()])
            rows_flags = np.concatenate([kid.flags for kid in kids.values()])
            rows_beliefs = np.concatenate(
                [np.broadcast_to(kid.belief, (kid.m, N_FLAG_STATES))
                 for kid in kids.values()])
            vals = _rollout_batch(model, rows_flags, t_next,
                                  rows_beliefs.copy(),
                                  self.noise[order, child_depth:], remaining,
                                  self.rollout_cfg)
            offset = 0
            for kid in kids.values():
                kid.l0 = float(vals[offset:offset + kid.m].mean())
                kid.u0 = float(model.reward_matrix[kid.flags].mean(axis=0)
                               .max()) + self.tail
                kid.lower, kid.upper = kid.l0, kid.u0
                kid.reg_lower = kid.l0
                offset += kid.m
        node.expanded = True
        self.expansions += 1
        self.deepest = max(self.deepest, child_depth)

    def _action_bounds(self, node: _Node, action_val: int):
        """(q_lower, q_upper, q_reg) for one expanded action."""
        mean_r = node.mean_reward[action_val]
        kids = node.children[action_val]
        if not kids:
            return mean_r, mean_r, mean_r
        q_l = q_u = q_r = 0.0
        inv_m = 1.0 / node.m
        for kid in kids.values():
            w = kid.m * inv_m
            q_l += w * kid.lower
            q_u += w * kid.upper
            q_r += w * kid.reg_lower
        g = self.gamma
        return mean_r + g * q_l, mean_r + g * q_u, mean_r + g * q_r

    def _backup(self, node: _Node) -> None:
        best_l = best_u = best_r = -np.inf
        for action_val in node.mean_reward:
            q_l, q_u, q_r = self._action_bounds(node, action_val)
            best_l = max(best_l, q_l)
            best_u = max(best_u, q_u)
            best_r = max(best_r, q_r)
        node.lower = max(node.l0, best_l)
        node.upper = min(node.u0, best_u)
        node.reg_lower = max(node.l0,
                             best_r - self.config.regularization_lambda)

    def run_trial(self) -> int:
        """One descend-expand-backup pass; returns expansions performed."""
        path = [self.root]
        node = self.root
        expanded = 0
        while True:
            if node.depth >= self.config.max_depth:
                break
            if not node.expanded:
                self._expand(node)
                expanded = 1
                break
            best_action, best_upper = None, -np.inf
            for action_val in node.mean_reward:
                _, q_u, _ = self._action_bounds(node, action_val)
                if q_u > best_upper:
                    best_action, best_upper = action_val, q_u
            kids = node.children[best_action]
            if not kids:
                break
            child, child_gap = None, 0.0
            inv_m = 1.0 / node.m
            for kid in kids.values():
                gap = kid.m * inv_m * (kid.upper - kid.lower)
                if gap > child_gap:
                    child, child_gap = kid, gap
            if child is None or child_gap <= _EPS_GAP:
                break
            node = child
            path.append(node)
        for nd in reversed(path):
            if nd.expanded:
                self._backup(nd)
        return expanded

    def root_action(self) -> Tuple[Action, Dict[Action, Tuple[float, float]]]:
        estimates: Dict[Action, Tuple[float, float]] = {}
        best_action, best_score = None, -np.inf
        for action_val in sorted(self.root.mean_reward):
            q_l, q_u, q_r = self._action_bounds(self.root, action_val)
            estimates[Action(action_val)] = (q_l, q_u)
            if q_r > best_score:
                best_action, best_score = Action(action_val), q_r
        return best_action, estimates


def plan(belief: Belief, config: SolverConfig, model: StrokeModel,
         rng: np.random.Generator) -> PlanResult:
    """Search the lookahead window and return the chosen root action.

    Raises :class:`PlanningError` on an empty belief or one already at
    the horizon. When the budget does not allow even one expansion the
    rollout policy's action at the root belief is returned with the
    ``fallback`` diagnostic set.
    """
    start = time.perf_counter()
    config.validate()
    if belief.t >= model.params.horizon:
        raise PlanningError("belief epoch is at or beyond the horizon")
    flags, noise, root_weights = _sample_scenario_arrays(
        model, belief, config.n_scenarios, config.max_depth, rng)
    search = _Search(model, config, flags, noise, root_weights, belief.t)

    budget_s = config.time_budget_ms / 1000.0
    trials = 0
    while True:
        if config.max_trials is not None and trials >= config.max_trials:
            break
        if time.perf_counter() - start >= budget_s:
            break
        gap = search.root.upper - search.root.lower
        if search.root.expanded and gap <= _EPS_GAP:
            break
        if search.run_trial() == 0:
            break
        trials += 1

    if search.expansions == 0:
        root_belief = ExactBelief(search.root.belief.copy(), belief.t)
        action = expert_decision(search.rollout_cfg,
                                 belief_marginals(root_belief)).action
        estimates: Dict[Action, Tuple[float, float]] = {}
        fallback = True
    else:
        action, estimates = search.root_action()
        fallback = False

    elapsed_ms = (time.perf_counter() - start) * 1000.0
    return PlanResult(
        action=action,
        value_estimates=estimates,
        diagnostics={
            "trials": trials,
            "expansions": search.expansions,
            "elapsed_ms": elapsed_ms,
            "root_lower": search.root.lower,
            "root_upper": search.root.upper,
            "max_depth_reached": search.deepest,
            "fallback": fallback,
        },
    )
