"""Filter tests: the exact update is checked against a brute-force
enumeration oracle, and the particle filter against the exact filter."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strokeplan.beliefs import (DegenerateUpdateError, ExactBelief,
                                ParticleBelief, exact_update,
                                exact_update_or_predict, initial_exact,
                                initial_particles, marginals, particle_update,
                                predict_exact, systematic_resample,
                                tv_distance, weights_of)
from strokeplan.model import (Action, Clinical, CtReading, DsaReport,
                              N_FLAG_STATES, PatientState, StrokeModel,
                              load_params)


def oracle_update(model, weights, action, obs):
    """Brute-force Bayes rule over the 8x8 enumeration."""
    posterior = np.zeros(N_FLAG_STATES)
    for j in range(N_FLAG_STATES):
        nxt = PatientState.from_flag_index(j, 1)
        like = model.observation_likelihood(obs, nxt, action)
        pred = 0.0
        for i in range(N_FLAG_STATES):
            cur = PatientState.from_flag_index(i, 0)
            pred += weights[i] * model.transition_probability(cur, action, nxt)
        posterior[j] = like * pred
    total = posterior.sum()
    return posterior / total


def _random_weights(rng):
    w = rng.random(N_FLAG_STATES) + 1e-3
    return w / w.sum()


OBS_POOL = [
    (Action.WAIT, Clinical(CtReading.POSITIVE, 3)),
    (Action.WAIT, Clinical(CtReading.NEGATIVE, 0)),
    (Action.HOSP, Clinical(CtReading.POSITIVE, -4)),
    (Action.HOSP, Clinical(CtReading.NEGATIVE, 5)),
    (Action.COIL, Clinical(CtReading.NEGATIVE, -1)),
    (Action.EMBO, Clinical(CtReading.POSITIVE, 2)),
    (Action.REVC, Clinical(CtReading.NEGATIVE, 1)),
    (Action.DSA, DsaReport(True, False, False)),
    (Action.DSA, DsaReport(False, True, True)),
    (Action.DSA, DsaReport(False, False, False)),
]


def test_exact_update_matches_enumeration_oracle(model, rng):
    for trial in range(40):
        weights = _random_weights(rng)
        action, obs = OBS_POOL[int(rng.integers(len(OBS_POOL)))]
        belief = ExactBelief(weights.copy(), 0)
        updated = exact_update(model, belief, action, obs)
        expected = oracle_update(model, weights, action, obs)
        assert np.allclose(updated.weights, expected, atol=1e-12)
        assert updated.t == 1


def test_exact_update_normalized_over_chains(model, rng):
    belief = initial_exact(model)
    for step in range(50):
        action, obs = OBS_POOL[int(rng.integers(len(OBS_POOL)))]
        belief = exact_update(model, belief, action, obs)
        assert np.all(belief.weights >= 0)
        assert belief.weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert belief.t == 50


def test_predict_exact_is_matrix_pushforward(model, rng):
    weights = _random_weights(rng)
    belief = ExactBelief(weights, 4)
    predicted = predict_exact(model, belief, Action.COIL)
    expected = np.zeros(N_FLAG_STATES)
    for j in range(N_FLAG_STATES):
        for i in range(N_FLAG_STATES):
            expected[j] += weights[i] * model.transition_matrices[
                Action.COIL, i, j]
    assert np.allclose(predicted.weights, expected, atol=1e-14)
    assert predicted.t == 5


def test_constant_likelihood_reduces_to_prediction(params, rng):
    """With 0.5 DSA accuracy every report is equally likely everywhere,
    so conditioning must change nothing beyond the prediction step."""
    flat = StrokeModel(params.with_overrides({"dsa_accuracy": 0.5}))
    weights = _random_weights(rng)
    belief = ExactBelief(weights.copy(), 0)
    updated = exact_update(flat, belief, Action.DSA, DsaReport(True, True, True))
    predicted = predict_exact(flat, belief, Action.DSA)
    assert np.allclose(updated.weights, predicted.weights, atol=1e-12)


def test_degenerate_update_raises_with_predicted(params):
    perfect = StrokeModel(params.with_overrides({"dsa_accuracy": 1.0}))
    healthy = np.zeros(N_FLAG_STATES)
    healthy[0] = 1.0
    belief = ExactBelief(healthy, 0)
    # a triple-condition report is impossible from a healthy-only prior
    # (onset of all three in one epoch has positive probability, so use
    # a zero-onset model to make the mass exactly zero)
    zero_onset = StrokeModel(params.with_overrides(
        {"dsa_accuracy": 1.0, "p_ane": 0.0, "p_avm": 0.0, "p_occ": 0.0}))
    with pytest.raises(DegenerateUpdateError) as err:
        exact_update(zero_onset, belief, Action.DSA, DsaReport(True, True, True))
    predicted = err.value.predicted
    assert predicted.weights[0] == pytest.approx(1.0)
    assert predicted.t == 1
    fallback, degenerate = exact_update_or_predict(
        zero_onset, belief, Action.DSA, DsaReport(True, True, True))
    assert degenerate
    assert np.allclose(fallback.weights, predicted.weights)
    # sanity: same update on the near-perfect model is fine
    ok = exact_update(perfect, belief, Action.WAIT,
                      Clinical(CtReading.NEGATIVE, 0))
    assert ok.weights.sum() == pytest.approx(1.0)


def test_marginals_oracle(model, rng):
    for _ in range(20):
        weights = _random_weights(rng)
        m = marginals(ExactBelief(weights, 0))
        assert m.p_ane == pytest.approx(
            sum(weights[i] for i in range(8) if i & 4), abs=1e-12)
        assert m.p_avm == pytest.approx(
            sum(weights[i] for i in range(8) if i & 2), abs=1e-12)
        assert m.p_occ == pytest.approx(
            sum(weights[i] for i in range(8) if i & 1), abs=1e-12)
        assert m.p_stroke_free == pytest.approx(weights[0], abs=1e-12)


def test_particle_marginals_are_weighted_counts():
    flags = np.array([0, 0, 4, 6], dtype=np.int8)
    weights = np.array([0.25, 0.25, 0.25, 0.25])
    belief = ParticleBelief(flags, weights, 0)
    m = marginals(belief)
    assert m.p_stroke_free == pytest.approx(0.5)
    assert m.p_ane == pytest.approx(0.5)
    assert m.p_avm == pytest.approx(0.25)
    assert m.p_occ == pytest.approx(0.0)
    assert [p.flag_index for p in belief.particles] == [0, 0, 4, 6]


def test_initial_particles_match_mixture(model, rng):
    belief = initial_particles(model, 50000, rng)
    freq = weights_of(belief)
    se = np.sqrt(model.init_weights * (1 - model.init_weights) / 50000)
    assert np.all(np.abs(freq - model.init_weights) <= 3 * se + 2e-3)
    assert belief.t == 0
    assert belief.weights.sum() == pytest.approx(1.0)


def test_systematic_resample_proportions(rng):
    weights = np.array([0.5, 0.3, 0.2])
    idx = systematic_resample(weights, 1000, rng)
    counts = np.bincount(idx, minlength=3)
    # systematic resampling keeps counts within one of n*w
    for i, w in enumerate(weights):
        assert abs(counts[i] - 1000 * w) <= 1.0


def test_particle_update_tracks_exact(model, rng):
    """One update from the prior with n=20000 lands close to exact."""
    exact = initial_exact(model)
    particles = initial_particles(model, 20000, rng)
    obs = Clinical(CtReading.POSITIVE, 3)
    exact_next = exact_update(model, exact, Action.HOSP, obs)
    particles_next = particle_update(model, particles, Action.HOSP, obs, rng)
    assert tv_distance(exact_next, particles_next) < 0.03
    assert particles_next.n == 20000
    assert particles_next.t == 1


def test_particle_consistency_tv_decreases_with_n(model):
    """Mean TV to the exact filter shrinks as the particle count grows."""
    action_obs = [(Action.HOSP, Clinical(CtReading.POSITIVE, 2)),
                  (Action.WAIT, Clinical(CtReading.NEGATIVE, 1)),
                  (Action.DSA, DsaReport(False, False, False))]
    mean_tv = []
    for n in (10, 100, 1000):
        total = 0.0
        count = 0
        for trace_seed in range(60):
            rng = np.random.default_rng([trace_seed, n])
            exact = initial_exact(model)
            particles = initial_particles(model, n, rng)
            for action, obs in action_obs:
                exact = exact_update(model, exact, action, obs)
                particles = particle_update(model, particles, action, obs, rng)
                total += tv_distance(exact, particles)
                count += 1
        mean_tv.append(total / count)
    assert mean_tv[0] > mean_tv[1] > mean_tv[2]


def test_particle_deprivation_recovery(params, rng):
    """An impossible report rebuilds the set from the predicted prior."""
    model = StrokeModel(params.with_overrides(
        {"dsa_accuracy": 1.0, "p_ane": 0.0, "p_avm": 0.0, "p_occ": 0.0}))
    flags = np.zeros(200, dtype=np.int8)  # all healthy, and staying healthy
    belief = ParticleBelief(flags, np.full(200, 1 / 200), 0)
    rebuilt = particle_update(model, belief, Action.DSA,
                              DsaReport(True, True, True), rng)
    assert rebuilt.n == 200
    assert rebuilt.t == 1
    # predicted prior from all-healthy with zero onset: still all healthy
    w = weights_of(rebuilt)
    assert w[0] == pytest.approx(1.0)


def test_particle_filter_matches_exact_when_deterministic(params, rng):
    """Zero onset and a perfect scanner leave nothing to sample."""
    model = StrokeModel(params.with_overrides(
        {"dsa_accuracy": 1.0, "p_ane": 0.0, "p_avm": 0.0, "p_occ": 0.0}))
    exact = ExactBelief(np.eye(8)[5], 0)  # ane+occ with certainty
    particles = ParticleBelief(np.array([5], dtype=np.int8),
                               np.array([1.0]), 0)
    for action, obs in [(Action.DSA, DsaReport(True, False, True)),
                        (Action.COIL, Clinical(CtReading.NEGATIVE, -2))]:
        exact = exact_update(model, exact, action, obs)
        particles = particle_update(model, particles, action, obs, rng)
        assert tv_distance(exact, particles) == 0.0
    assert weights_of(particles)[1] == pytest.approx(1.0)


def test_weights_of_rejects_zero_mass():
    belief = ParticleBelief(np.array([0, 1], dtype=np.int8),
                            np.array([0.0, 0.0]), 0)
    with pytest.raises(ValueError):
        weights_of(belief)


def test_exact_belief_shape_validation():
    with pytest.raises(ValueError):
        ExactBelief(np.ones(5), 0)
    with pytest.raises(ValueError):
        ParticleBelief(np.array([], dtype=np.int8), np.array([]), 0)


@settings(max_examples=40, deadline=None)
@given(raw=st.lists(st.floats(1e-6, 1.0), min_size=8, max_size=8),
       pick=st.integers(0, len(OBS_POOL) - 1))
def test_update_preserves_simplex(raw, pick):
    model = _cached_model()
    weights = np.array(raw)
    weights = weights / weights.sum()
    action, obs = OBS_POOL[pick]
    updated = exact_update(model, ExactBelief(weights, 0), action, obs)
    assert np.all(updated.weights >= 0)
    assert updated.weights.sum() == pytest.approx(1.0, abs=1e-9)


_CACHE = {}


def _cached_model():
    if "m" not in _CACHE:
        _CACHE["m"] = StrokeModel(load_params())
    return _CACHE["m"]
