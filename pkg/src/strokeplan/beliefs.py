"""Belief representations and filtering over the eight flag combinations.

Two interchangeable belief backends:

- :class:`ExactBelief` carries the full posterior as an 8-vector and is
  updated in closed form (matrix prediction followed by a pointwise
  likelihood reweighting).
- :class:`ParticleBelief` carries ``n`` sampled flag combinations and is
  updated by propagate / reweight / systematic resample; the propagation
  is computed in closed form over the eight combinations so resampling
  is the only stochastic step.

Both advance a shared epoch counter alongside the distribution.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .model import (Action, N_FLAG_STATES, Observation, PatientState,
                    StrokeModel)


class DegenerateUpdateError(RuntimeError):
    """Observation has zero likelihood under every predicted hypothesis.

    Carries the one-step predicted prior so callers can fall back to it.
    """

    def __init__(self, predicted: "ExactBelief"):
        super().__init__("belief update is degenerate: observation has zero "
                         "likelihood under the predicted prior")
        self.predicted = predicted


class Marginals(NamedTuple):
    """Per-condition posterior marginals plus the stroke-free mass."""

    p_ane: float
    p_avm: float
    p_occ: float
    p_stroke_free: float


@dataclass(eq=False)
class ExactBelief:
    """Posterior over flag combinations as a normalized 8-vector."""

    weights: np.ndarray
    t: int

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (N_FLAG_STATES,):
            raise ValueError(f"belief weights must have shape "
                             f"({N_FLAG_STATES},), got {self.weights.shape}")

    def copy(self) -> "ExactBelief":
        return ExactBelief(self.weights.copy(), self.t)


@dataclass(eq=False)
class ParticleBelief:
    """Weighted particle set; ``flags`` holds one index per particle.

    Updates resample back to uniform weights, so ``weights`` is uniform
    except for externally constructed sets.
    """

    flags: np.ndarray
    weights: np.ndarray
    t: int

    def __post_init__(self) -> None:
        self.flags = np.asarray(self.flags, dtype=np.int8)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.flags.shape != self.weights.shape:
            raise ValueError("particle flags and weights must align")
        if self.flags.size == 0:
            raise ValueError("particle set must be non-empty")

    @property
    def n(self) -> int:
        return self.flags.size

    @property
    def particles(self) -> list:
        return [PatientState.from_flag_index(int(i), self.t)
                for i in self.flags]


Belief = Union[ExactBelief, ParticleBelief]


def initial_exact(model: StrokeModel) -> ExactBelief:
    return ExactBelief(model.init_weights.copy(), 0)


def initial_particles(model: StrokeModel, n: int,
                      rng: np.random.Generator) -> ParticleBelief:
    """Stratified draw from the admission mixture.

    Systematic sampling guarantees every hypothesis with mass above
    ``1/n`` is represented, so rare joint conditions are not silently
    dropped before the first observation arrives.
    """
    flags = systematic_resample(model.init_weights, n, rng)
    return ParticleBelief(flags, np.full(n, 1.0 / n), 0)


def weights_of(belief: Belief) -> np.ndarray:
    """Distribution over the eight flag combinations for either backend."""
    if isinstance(belief, ExactBelief):
        return belief.weights
    counts = np.bincount(belief.flags, weights=belief.weights,
                         minlength=N_FLAG_STATES)
    total = counts.sum()
    if total <= 0:
        raise ValueError("particle weights sum to zero")
    return counts / total


def marginals(belief: Belief) -> Marginals:
    w = weights_of(belief)
    return Marginals(
        p_ane=float(w[4:].sum()),
        p_avm=float(w[2] + w[3] + w[6] + w[7]),
        p_occ=float(w[1::2].sum()),
        p_stroke_free=float(w[0]),
    )


def tv_distance(b1: Belief, b2: Belief) -> float:
    """Total variation distance between the two belief distributions."""
    return float(0.5 * np.abs(weights_of(b1) - weights_of(b2)).sum())


def predict_exact(model: StrokeModel, belief: ExactBelief,
                  action: Action) -> ExactBelief:
    """Push the belief through the transition model only (no observation)."""
    predicted = belief.weights @ model.transition_matrices[action]
    return ExactBelief(predicted, belief.t + 1)


def exact_update(model: StrokeModel, belief: ExactBelief, action: Action,
                 obs: Observation) -> ExactBelief:
    """Closed-form Bayes update; raises DegenerateUpdateError on zero mass."""
    predicted = predict_exact(model, belief, action)
    posterior = predicted.weights * model.likelihood_vector(obs, action)
    total = posterior.sum()
    if total <= 0.0 or not np.isfinite(total):
        raise DegenerateUpdateError(predicted)
    return ExactBelief(posterior / total, predicted.t)


def exact_update_or_predict(model: StrokeModel, belief: ExactBelief,
                            action: Action, obs: Observation
                            ) -> tuple[ExactBelief, bool]:
    """Bayes update, falling back to the predicted prior when degenerate.

    Returns ``(belief, degenerate)``.
    """
    try:
        return exact_update(model, belief, action, obs), False
    except DegenerateUpdateError as exc:
        return exc.predicted, True


def systematic_resample(weights: np.ndarray, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    """Low-variance resampling: one uniform offset, n evenly spaced probes."""
    positions = (rng.random() + np.arange(n)) / n
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0  # guard against accumulated rounding at the tail
    return np.searchsorted(cdf, positions, side="right")


def particle_update(model: StrokeModel, belief: ParticleBelief,
                    action: Action, obs: Observation,
                    rng: np.random.Generator) -> ParticleBelief:
    """Propagate, reweight by likelihood, then systematically resample.

    With only eight flag combinations the propagation pushes the set's
    empirical distribution through the transition kernel in closed form,
    so sampling noise enters only at the final resample. Fresh-onset
    hypotheses carry around 1e-4 of the predicted mass but can dominate
    the posterior after a surprising observation; giving them their
    exact expected share rather than a per-particle Bernoulli draw is
    what keeps the filter within total-variation 4/n of the exact
    posterior at every step.

    When the observation has zero likelihood under every predicted
    hypothesis, the set is rebuilt from the prediction alone, which
    keeps the filter alive on impossible inputs.
    """
    n = belief.n
    predicted = weights_of(belief) @ model.transition_matrices[action]
    posterior = predicted * model.likelihood_vector(obs, action)
    total = posterior.sum()
    if total <= 0.0 or not np.isfinite(total):
        posterior = predicted / predicted.sum()
    else:
        posterior = posterior / total
    flags = systematic_resample(posterior, n, rng)
    return ParticleBelief(flags, np.full(n, 1.0 / n), belief.t + 1)
