"""Generative-model unit tests.

The reward and transition oracles here are written independently of the
implementation (plain Python over the published constants) so the
compiled tables are checked against a second derivation, not against
themselves.
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strokeplan.model import (ACTIONS, Action, Clinical, ConfigError,
                              CtReading, DsaReport, LikelihoodDomainError,
                              N_FLAG_STATES, PatientState, StrokeModel,
                              condition_class, load_params)

ALL_STATES = [PatientState.from_flag_index(i, 0) for i in range(N_FLAG_STATES)]


def oracle_reward(rt, state, action):
    """Independent reward composition from the 13 constants."""
    any_flag = state.is_ane or state.is_avm or state.is_occ
    if action == Action.WAIT:
        return rt.not_hospitalizing_penalty if any_flag else 0.0
    if action == Action.HOSP:
        return rt.hosp_cost + (rt.correct_hosp if any_flag
                               else rt.unnecessary_hosp)
    if action == Action.DSA:
        return rt.dsa_cost + (rt.needed_dsa if any_flag
                              else rt.unnecessary_dsa)
    if action == Action.COIL:
        return rt.treatment_cost + (rt.correct_treatment if state.is_ane
                                    else rt.wrong_treatment)
    if action == Action.EMBO:
        return rt.treatment_cost + (rt.correct_treatment if state.is_avm
                                    else rt.wrong_treatment)
    if action == Action.REVC:
        return rt.treatment_cost + (rt.correct_treatment if state.is_occ
                                    else rt.wrong_treatment)
    if action == Action.DISC:
        return rt.wrong_discharge if any_flag else rt.correct_discharge
    raise AssertionError(action)


def oracle_transition_prob(params, state, action, next_state):
    """Per-flag product; onset applies to initially-false flags only."""
    treated = {Action.COIL: "is_ane", Action.EMBO: "is_avm",
               Action.REVC: "is_occ"}.get(action)
    prob = 1.0
    for name, onset in (("is_ane", params.p_ane), ("is_avm", params.p_avm),
                        ("is_occ", params.p_occ)):
        before = getattr(state, name)
        after = getattr(next_state, name)
        if before:
            stays = 0.0 if name == treated else 1.0
            prob *= stays if after else 1.0 - stays
        else:
            prob *= onset if after else 1.0 - onset
    return prob


def test_reward_table_all_56_cases(model, params):
    for state in ALL_STATES:
        for action in ACTIONS:
            expected = oracle_reward(params.reward_table, state, action)
            assert model.reward(state, action) == expected, (state, action)


def test_reward_spot_values(model):
    sick = PatientState(True, False, False, 0)
    healthy = PatientState(False, False, False, 0)
    assert model.reward(sick, Action.COIL) == 4800.0
    assert model.reward(sick, Action.EMBO) == -5200.0
    assert model.reward(sick, Action.WAIT) == -1000.0
    assert model.reward(healthy, Action.WAIT) == 0.0
    assert model.reward(healthy, Action.DISC) == 5000.0
    assert model.reward(sick, Action.DISC) == -50000.0
    assert model.reward(sick, Action.DSA) == 100.0
    assert model.reward(healthy, Action.DSA) == -900.0
    assert model.reward(sick, Action.HOSP) == 50.0
    assert model.reward(healthy, Action.HOSP) == -500.0


def test_terminal_penalty(model):
    assert model.terminal_penalty(PatientState(False, False, False, 5)) == 0.0
    for idx in range(1, N_FLAG_STATES):
        state = PatientState.from_flag_index(idx, 5)
        assert model.terminal_penalty(state) == -100000.0


def test_transition_probabilities_match_oracle(model, params):
    for state in ALL_STATES:
        for action in ACTIONS:
            for j in range(N_FLAG_STATES):
                nxt = PatientState.from_flag_index(j, 1)
                got = model.transition_probability(state, action, nxt)
                want = oracle_transition_prob(params, state, action, nxt)
                assert got == pytest.approx(want, abs=1e-15)


def test_transition_rows_sum_to_one(model):
    sums = model.transition_matrices.sum(axis=2)
    assert np.allclose(sums, 1.0, atol=1e-12)


def test_transition_epoch_bookkeeping(model):
    state = PatientState(True, False, False, 3)
    wrong_epoch = PatientState(False, False, False, 3)
    assert model.transition_probability(state, Action.COIL, wrong_epoch) == 0.0
    right = PatientState(False, False, False, 4)
    assert model.transition_probability(state, Action.COIL, right) == \
        pytest.approx((1 - model.params.p_avm) * (1 - model.params.p_occ))


def test_treatment_clears_with_certainty(model):
    """A treated condition cannot survive or re-onset within the epoch."""
    for action, bit in ((Action.COIL, 4), (Action.EMBO, 2), (Action.REVC, 1)):
        for i in range(N_FLAG_STATES):
            if not i & bit:
                continue
            state = PatientState.from_flag_index(i, 0)
            mass_still_set = sum(
                model.transition_probability(
                    state, action, PatientState.from_flag_index(j, 1))
                for j in range(N_FLAG_STATES) if j & bit)
            assert mass_still_set == 0.0


def test_non_treatment_actions_share_dynamics(model):
    base = model.transition_matrices[Action.WAIT]
    for action in (Action.HOSP, Action.DSA, Action.DISC):
        assert np.array_equal(model.transition_matrices[action], base)


def test_transition_empirical_frequencies(model, rng):
    n = 100000
    for action in (Action.WAIT, Action.COIL, Action.EMBO):
        for start in (0, 7, 5):
            u = rng.random((n, 3))
            flags = model.transition_flags_batch(
                np.full(n, start, dtype=np.int8), action, u)
            freq = np.bincount(flags, minlength=N_FLAG_STATES) / n
            expected = model.transition_matrices[action, start]
            se = np.sqrt(expected * (1 - expected) / n)
            assert np.all(np.abs(freq - expected) <= 3 * se + 1e-4)


def test_observation_likelihoods_sum_to_one(model):
    # clinical: 22 codes per (setting, state); dsa: 8 reports per state
    assert np.allclose(model.clinical_like.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(model.dsa_like.sum(axis=0), 1.0, atol=1e-12)


def test_observation_sampler_matches_likelihoods(model, rng):
    n = 100000
    for action, n_codes in ((Action.WAIT, 22), (Action.HOSP, 22),
                            (Action.DSA, 8)):
        for start in (0, 4, 3):
            u = rng.random((n, 3))
            codes = model.observation_codes_batch(
                np.full(n, start, dtype=np.int8), action, u)
            freq = np.bincount(codes, minlength=n_codes) / n
            if action == Action.DSA:
                expected = model.dsa_like[:, start]
            else:
                expected = model.clinical_like[model.obs_setting(action),
                                               :, start]
            se = np.sqrt(expected * (1 - expected) / n)
            assert np.all(np.abs(freq - expected) <= 3 * se + 1e-4)


def test_dsa_report_exactness_example(model):
    """A fully correct report on a triple-condition patient."""
    state = PatientState(True, True, True, 1)
    report = DsaReport(True, True, True)
    acc = model.params.dsa_accuracy
    assert model.observation_likelihood(report, state, Action.DSA) == \
        pytest.approx(acc ** 3)
    one_wrong = DsaReport(True, True, False)
    assert model.observation_likelihood(one_wrong, state, Action.DSA) == \
        pytest.approx(acc ** 2 * (1 - acc))


def test_observation_variant_must_match_action(model):
    state = PatientState(False, False, False, 1)
    clinical = Clinical(CtReading.NEGATIVE, 0)
    report = DsaReport(False, False, False)
    with pytest.raises(LikelihoodDomainError):
        model.observation_likelihood(clinical, state, Action.DSA)
    with pytest.raises(LikelihoodDomainError):
        model.observation_likelihood(report, state, Action.WAIT)
    with pytest.raises(LikelihoodDomainError):
        model.observation_likelihood(report, state, Action.COIL)


def test_sampled_observation_variants(model, rng):
    state = PatientState(True, False, False, 1)
    assert isinstance(model.sample_observation(state, Action.DSA, rng),
                      DsaReport)
    for action in (Action.WAIT, Action.HOSP, Action.COIL, Action.DISC):
        obs = model.sample_observation(state, action, rng)
        assert isinstance(obs, Clinical)
        assert -5 <= obs.siriraj <= 5


def test_initial_mixture_exact_total(params):
    parts = [params.init_mixture.p_stroke_free] \
        + [params.init_mixture.p_single] * 3 \
        + [params.init_mixture.p_double] * 3 \
        + [params.init_mixture.p_triple]
    assert math.fsum(parts) == 1.0


def test_initial_state_frequencies(model, rng):
    n = 200000
    counts = np.zeros(N_FLAG_STATES)
    draws = rng.choice(N_FLAG_STATES, size=n, p=model.init_weights)
    counts = np.bincount(draws, minlength=N_FLAG_STATES) / n
    se = np.sqrt(model.init_weights * (1 - model.init_weights) / n)
    assert np.all(np.abs(counts - model.init_weights) <= 3 * se + 1e-4)
    sampled = model.sample_initial_state(rng)
    assert sampled.t == 0


def test_is_terminal(model):
    horizon = model.params.horizon
    mid = PatientState(False, False, False, 3)
    assert model.is_terminal(mid, Action.DISC)
    assert not model.is_terminal(mid, Action.WAIT)
    assert not model.is_terminal(mid, None)
    end = PatientState(False, False, False, horizon)
    assert model.is_terminal(end, Action.WAIT)
    assert model.is_terminal(end, None)


def test_condition_class_mapping():
    assert condition_class(True, False, False) == "hemorrhagic"
    assert condition_class(False, True, False) == "hemorrhagic"
    assert condition_class(True, False, True) == "hemorrhagic"  # mixed
    assert condition_class(False, False, True) == "ischemic"
    assert condition_class(False, False, False) == "none"


def test_hospital_tables_sharper_than_home(params):
    for profile in ("aneurysm", "other_stroke"):
        assert params.ct_sensitivity["HOSP"][profile] > \
            params.ct_sensitivity["WAIT"][profile]
    assert params.ct_specificity["HOSP"] > params.ct_specificity["WAIT"]


def test_params_validation_rejects_bad_values(params):
    with pytest.raises(ConfigError):
        params.with_overrides({"gamma": 1.5})
    with pytest.raises(ConfigError):
        params.with_overrides({"nonsense_key": 1.0})
    with pytest.raises(ConfigError):
        params.with_overrides({"init_mixture": {"p_stroke_free": 0.5,
                                                "p_single": 0.5,
                                                "p_double": 0.5,
                                                "p_triple": 0.5}})
    uniform = params.with_overrides({"init_mixture": {
        "p_stroke_free": 0.125, "p_single": 0.125,
        "p_double": 0.125, "p_triple": 0.125}})
    assert np.allclose(uniform.init_mixture.weights(), 0.125)


def test_clinical_validation():
    with pytest.raises(ValueError):
        Clinical(CtReading.POSITIVE, 7)
    with pytest.raises(ValueError):
        Clinical("CT_POSITIVE", 0)
    obs = Clinical(CtReading.POSITIVE, -5)
    assert obs.siriraj == -5


def test_state_flag_index_round_trip():
    for idx in range(N_FLAG_STATES):
        state = PatientState.from_flag_index(idx, 9)
        assert state.flag_index == idx
        assert state.t == 9
    with pytest.raises(ValueError):
        PatientState.from_flag_index(8, 0)


@settings(max_examples=60, deadline=None)
@given(start=st.integers(0, 7),
       action=st.sampled_from(list(ACTIONS)),
       u=st.lists(st.floats(0.0, 0.999999), min_size=3, max_size=3))
def test_det_step_consistent_with_tables(start, action, u):
    model = _shared_model()
    state = PatientState.from_flag_index(start, 0)
    u6 = list(u) + [0.5, 0.5, 0.5]
    next_state, obs, reward, terminated, penalty = model.det_step(
        state, action, u6)
    assert reward == model.reward(state, action)
    assert next_state.t == 1
    assert model.transition_probability(state, action, next_state) > 0.0
    assert model.observation_likelihood(obs, next_state, action) > 0.0
    assert terminated == model.is_terminal(next_state, action)
    assert penalty == model.terminal_penalty(next_state)


_MODEL_CACHE = {}


def _shared_model():
    if "model" not in _MODEL_CACHE:
        _MODEL_CACHE["model"] = StrokeModel(load_params())
    return _MODEL_CACHE["model"]
