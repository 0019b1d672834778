"""Decision policies: uniform random, the two expert rules, and the planner.

Expert rules act on exact-filter marginals through a fixed precedence:

1. discharge when the stroke-free mass clears ``pdisc_min``,
2. otherwise treat the dominant condition when its marginal clears
   ``pdom_thres`` (ties broken aneurysm, then AVM, then occlusion),
3. otherwise fall back to the configured diagnostic action.

All comparisons are strict, so a marginal sitting exactly on a threshold
does not trigger the branch. Expert rules never emit WAIT.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .beliefs import Belief, Marginals, marginals
from .model import Action, StrokeModel, TREATMENT_FOR_FLAG

BRANCH_DISCHARGE = "discharge"
BRANCH_DOMINANT = "dominant-condition"
BRANCH_DEFAULT = "default-diagnostic"

POLICY_NAMES = ("random", "expert-hosp", "expert-dsa", "despot")


@dataclass(frozen=True)
class ExpertConfig:
    """Thresholds and fallback action for the expert decision rule."""

    default_diagnostic: Action
    pdom_thres: float
    pdisc_min: float
    tie_break_order: tuple = ("ane", "avm", "occ")

    def __post_init__(self) -> None:
        if self.default_diagnostic not in (Action.HOSP, Action.DSA):
            raise ValueError("default_diagnostic must be HOSP or DSA")
        if sorted(self.tie_break_order) != ["ane", "avm", "occ"]:
            raise ValueError("tie_break_order must permute ane/avm/occ")


@dataclass(frozen=True)
class ExpertDecision:
    """Chosen action plus which branch of the rule fired."""

    action: Action
    branch: str
    dominant: Optional[str] = None


def expert_decision(config: ExpertConfig, m: Marginals) -> ExpertDecision:
    if m.p_stroke_free > config.pdisc_min:
        return ExpertDecision(Action.DISC, BRANCH_DISCHARGE)
    per_flag = {"ane": m.p_ane, "avm": m.p_avm, "occ": m.p_occ}
    dominant = max(config.tie_break_order,
                   key=lambda name: per_flag[name])  # first max wins ties
    if per_flag[dominant] > config.pdom_thres:
        return ExpertDecision(TREATMENT_FOR_FLAG[dominant], BRANCH_DOMINANT,
                              dominant)
    return ExpertDecision(config.default_diagnostic, BRANCH_DEFAULT)


def expert_policy(config: ExpertConfig, m: Marginals) -> Action:
    return expert_decision(config, m).action


def random_policy(rng: np.random.Generator) -> Action:
    return Action(int(rng.integers(len(Action))))


class RandomPolicy:
    """Uniform over all seven actions, ignoring the belief."""

    name = "random"
    belief_backend = "exact"

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def act(self, belief: Belief, t: int) -> Action:
        return random_policy(self.rng)


class ExpertPolicy:
    """Threshold rule over exact-filter marginals."""

    belief_backend = "exact"

    def __init__(self, config: ExpertConfig):
        self.config = config
        self.name = ("expert-hosp" if config.default_diagnostic == Action.HOSP
                     else "expert-dsa")
        self.last_decision: Optional[ExpertDecision] = None

    def act(self, belief: Belief, t: int) -> Action:
        self.last_decision = expert_decision(self.config, marginals(belief))
        return self.last_decision.action


class DespotPolicy:
    """Online planner; re-plans from the particle belief every epoch."""

    name = "despot"
    belief_backend = "particle"

    def __init__(self, model: StrokeModel, solver_config,
                 rng: np.random.Generator):
        from .solver import plan  # local import avoids a module cycle
        self._plan = plan
        self.model = model
        self.solver_config = solver_config
        self.rng = rng
        self.last_result = None

    def act(self, belief: Belief, t: int) -> Action:
        self.last_result = self._plan(belief, self.solver_config, self.model,
                                      self.rng)
        return self.last_result.action


def expert_config_for(model: StrokeModel, default_diagnostic: Action
                      ) -> ExpertConfig:
    return ExpertConfig(default_diagnostic=default_diagnostic,
                        pdom_thres=model.params.pdom_thres,
                        pdisc_min=model.params.pdisc_min)


def make_policy(name: str, model: StrokeModel, rng: np.random.Generator,
                solver_config=None):
    """Instantiate a policy by registry name.

    ``rng`` seeds the policy's own randomness (action draws for random,
    scenario determinization for despot); expert rules are deterministic
    and ignore it.
    """
    if name == "random":
        return RandomPolicy(rng)
    if name == "expert-hosp":
        return ExpertPolicy(expert_config_for(model, Action.HOSP))
    if name == "expert-dsa":
        return ExpertPolicy(expert_config_for(model, Action.DSA))
    if name == "despot":
        if solver_config is None:
            from .solver import SolverConfig
            solver_config = SolverConfig()
        return DespotPolicy(model, solver_config, rng)
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")
