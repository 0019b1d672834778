"""Domain types, parameters, and the generative model for stroke care planning.

The patient's hidden condition is a triple of boolean flags (aneurysm,
arteriovenous malformation, arterial occlusion) plus a visible epoch
counter. Flag combinations are indexed 0..7 with the aneurysm bit most
significant::

    index = 4 * is_ane + 2 * is_avm + 1 * is_occ

All dynamics are stationary in the flags; the epoch counter only advances
time and triggers the horizon cutoff.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from typing import Mapping, Optional, Sequence, Union

import numpy as np

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

N_FLAG_STATES = 8
SIRIRAJ_MIN = -5
SIRIRAJ_MAX = 5
N_SIRIRAJ = SIRIRAJ_MAX - SIRIRAJ_MIN + 1
N_CLINICAL_CODES = 2 * N_SIRIRAJ  # CT reading x Siriraj score

FLAG_NAMES = ("ane", "avm", "occ")
FLAG_BITS = {"ane": 4, "avm": 2, "occ": 1}


class ConfigError(ValueError):
    """Raised when model parameters fail validation."""


class LikelihoodDomainError(ValueError):
    """Raised when an observation variant does not match the action taken."""


class Action(enum.IntEnum):
    """The seven decision alternatives available at every epoch."""

    WAIT = 0
    HOSP = 1
    DSA = 2
    COIL = 3
    EMBO = 4
    REVC = 5
    DISC = 6


ACTIONS = tuple(Action)
N_ACTIONS = len(ACTIONS)

# Each treatment clears exactly one condition bit.
TREATMENT_BIT = {Action.COIL: FLAG_BITS["ane"],
                 Action.EMBO: FLAG_BITS["avm"],
                 Action.REVC: FLAG_BITS["occ"]}
TREATMENT_FOR_FLAG = {"ane": Action.COIL, "avm": Action.EMBO, "occ": Action.REVC}


class CtReading(enum.Enum):
    """Binary CT scan outcome attached to clinical observations."""

    POSITIVE = "CT_POSITIVE"
    NEGATIVE = "CT_NEGATIVE"


@dataclass(frozen=True)
class PatientState:
    """Ground-truth patient state: three condition flags plus the epoch."""

    is_ane: bool
    is_avm: bool
    is_occ: bool
    t: int

    @property
    def flag_index(self) -> int:
        return 4 * self.is_ane + 2 * self.is_avm + self.is_occ

    @property
    def any_condition(self) -> bool:
        return self.is_ane or self.is_avm or self.is_occ

    @classmethod
    def from_flag_index(cls, index: int, t: int) -> "PatientState":
        if not 0 <= index < N_FLAG_STATES:
            raise ValueError(f"flag index out of range: {index}")
        return cls(bool(index & 4), bool(index & 2), bool(index & 1), t)


@dataclass(frozen=True)
class Clinical:
    """Observation emitted by every action except DSA."""

    ct: CtReading
    siriraj: int

    def __post_init__(self) -> None:
        if not isinstance(self.ct, CtReading):
            raise ValueError(f"ct must be a CtReading, got {self.ct!r}")
        if not SIRIRAJ_MIN <= self.siriraj <= SIRIRAJ_MAX:
            raise ValueError(f"siriraj score out of range: {self.siriraj}")


@dataclass(frozen=True)
class DsaReport:
    """Near-perfect per-condition report emitted by the DSA action."""

    pred_ane: bool
    pred_avm: bool
    pred_occ: bool

    @property
    def flag_index(self) -> int:
        return 4 * self.pred_ane + 2 * self.pred_avm + self.pred_occ


Observation = Union[Clinical, DsaReport]


def condition_class(is_ane: bool, is_avm: bool, is_occ: bool) -> str:
    """Clinical presentation class used by the Siriraj tables.

    Aneurysm or AVM presents as hemorrhagic (mixed cases included),
    occlusion alone as ischemic, otherwise none.
    """
    if is_ane or is_avm:
        return "hemorrhagic"
    if is_occ:
        return "ischemic"
    return "none"


@dataclass(frozen=True)
class RewardTable:
    """Additive reward constants, all expressed as signed contributions."""

    untreated_terminal_penalty: float
    treatment_cost: float
    dsa_cost: float
    hosp_cost: float
    correct_treatment: float
    wrong_treatment: float
    needed_dsa: float
    unnecessary_dsa: float
    correct_hosp: float
    unnecessary_hosp: float
    not_hospitalizing_penalty: float
    correct_discharge: float
    wrong_discharge: float


@dataclass(frozen=True)
class InitialMixture:
    """Distribution over the eight flag combinations at admission.

    ``p_single`` / ``p_double`` apply to each of the three single / double
    combinations individually, so the total mass is
    ``p_stroke_free + 3*p_single + 3*p_double + p_triple``.
    """

    p_stroke_free: float
    p_single: float
    p_double: float
    p_triple: float

    def weights(self) -> np.ndarray:
        w = np.empty(N_FLAG_STATES)
        for idx in range(N_FLAG_STATES):
            k = bin(idx).count("1")
            w[idx] = (self.p_stroke_free, self.p_single,
                      self.p_double, self.p_triple)[k]
        return w

    def validate(self) -> None:
        parts = [self.p_stroke_free] + [self.p_single] * 3 \
            + [self.p_double] * 3 + [self.p_triple]
        if any(p < 0 for p in parts):
            raise ConfigError("initial mixture has negative mass")
        total = math.fsum(parts)
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"initial mixture sums to {total!r}, expected 1.0")


_OBS_SETTINGS = ("WAIT", "HOSP")
_CONDITION_CLASSES = ("hemorrhagic", "ischemic", "none")


@dataclass(frozen=True)
class ModelParams:
    """Complete parameter set; every dynamic quantity derives from here."""

    p_ane: float
    p_avm: float
    p_occ: float
    pdom_thres: float
    pdisc_min: float
    gamma: float
    n_particles: int
    horizon: int
    dsa_accuracy: float
    reward_table: RewardTable
    init_mixture: InitialMixture
    ct_sensitivity: Mapping[str, Mapping[str, float]]
    ct_specificity: Mapping[str, float]
    siriraj_tables: Mapping[str, Mapping[str, tuple]]

    def validate(self) -> None:
        for name in ("p_ane", "p_avm", "p_occ", "pdom_thres", "pdisc_min",
                     "gamma", "dsa_accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v!r}")
        if self.n_particles < 1:
            raise ConfigError("n_particles must be positive")
        if self.horizon < 1:
            raise ConfigError("horizon must be positive")
        self.init_mixture.validate()

        for setting in _OBS_SETTINGS:
            if setting not in self.ct_sensitivity:
                raise ConfigError(f"ct_sensitivity missing setting {setting!r}")
            for profile in ("aneurysm", "other_stroke"):
                p = self.ct_sensitivity[setting].get(profile)
                if p is None or not 0.0 <= p <= 1.0:
                    raise ConfigError(
                        f"ct_sensitivity[{setting}][{profile}] invalid: {p!r}")
            spec = self.ct_specificity.get(setting)
            if spec is None or not 0.0 <= spec <= 1.0:
                raise ConfigError(f"ct_specificity[{setting}] invalid: {spec!r}")

        # Hospital observation must dominate at-home observation in quality.
        for profile in ("aneurysm", "other_stroke"):
            if not (self.ct_sensitivity["HOSP"][profile]
                    > self.ct_sensitivity["WAIT"][profile]):
                raise ConfigError(
                    f"hospital CT sensitivity must exceed at-home for {profile!r}")
        if not self.ct_specificity["HOSP"] > self.ct_specificity["WAIT"]:
            raise ConfigError("hospital CT specificity must exceed at-home")

        for cls in _CONDITION_CLASSES:
            if cls not in self.siriraj_tables:
                raise ConfigError(f"siriraj_tables missing class {cls!r}")
            for setting in _OBS_SETTINGS:
                row = self.siriraj_tables[cls].get(setting)
                if row is None or len(row) != N_SIRIRAJ:
                    raise ConfigError(
                        f"siriraj_tables[{cls}][{setting}] must have "
                        f"{N_SIRIRAJ} entries")
                if any(p < 0 for p in row):
                    raise ConfigError(
                        f"siriraj_tables[{cls}][{setting}] has negative mass")
                total = math.fsum(row)
                if abs(total - 1.0) > 1e-9:
                    raise ConfigError(
                        f"siriraj_tables[{cls}][{setting}] sums to {total!r}")

    def with_overrides(self, overrides: Mapping) -> "ModelParams":
        """Return a copy with ``overrides`` merged in, re-validated.

        Nested mappings (reward_table, init_mixture, observation tables)
        are replaced wholesale when present.
        """
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown parameter(s): {sorted(unknown)}")
        kwargs = {}
        for key, value in overrides.items():
            if key == "reward_table" and isinstance(value, Mapping):
                kwargs[key] = replace(self.reward_table, **dict(value))
            elif key == "init_mixture" and isinstance(value, Mapping):
                kwargs[key] = replace(self.init_mixture, **dict(value))
            else:
                kwargs[key] = value
        out = replace(self, **kwargs)
        out.validate()
        return out

    def to_dict(self) -> dict:
        return {
            "p_ane": self.p_ane, "p_avm": self.p_avm, "p_occ": self.p_occ,
            "pdom_thres": self.pdom_thres, "pdisc_min": self.pdisc_min,
            "gamma": self.gamma, "n_particles": self.n_particles,
            "horizon": self.horizon, "dsa_accuracy": self.dsa_accuracy,
            "reward_table": {f.name: getattr(self.reward_table, f.name)
                             for f in fields(self.reward_table)},
            "init_mixture": {f.name: getattr(self.init_mixture, f.name)
                             for f in fields(self.init_mixture)},
            "ct_sensitivity": {s: dict(self.ct_sensitivity[s])
                               for s in _OBS_SETTINGS},
            "ct_specificity": dict(self.ct_specificity),
            "siriraj_tables": {c: {s: list(self.siriraj_tables[c][s])
                                   for s in _OBS_SETTINGS}
                               for c in _CONDITION_CLASSES},
        }


def _freeze_tables(raw: Mapping) -> dict:
    return {cls: {setting: tuple(row) for setting, row in per_cls.items()}
            for cls, per_cls in raw.items()}


def params_from_dict(raw: Mapping) -> ModelParams:
    """Build and validate ModelParams from a parsed config mapping."""
    data = dict(raw)
    data.pop("solver", None)  # solver section lives in the same file
    try:
        params = ModelParams(
            p_ane=data["p_ane"], p_avm=data["p_avm"], p_occ=data["p_occ"],
            pdom_thres=data["pdom_thres"], pdisc_min=data["pdisc_min"],
            gamma=data["gamma"], n_particles=int(data["n_particles"]),
            horizon=int(data["horizon"]), dsa_accuracy=data["dsa_accuracy"],
            reward_table=RewardTable(**data["reward_table"]),
            init_mixture=InitialMixture(**data["init_mixture"]),
            ct_sensitivity={s: dict(v) for s, v in data["ct_sensitivity"].items()},
            ct_specificity=dict(data["ct_specificity"]),
            siriraj_tables=_freeze_tables(data["siriraj_tables"]),
        )
    except KeyError as exc:
        raise ConfigError(f"missing parameter: {exc.args[0]}") from exc
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    params.validate()
    return params


def load_raw_config(path: Optional[str] = None) -> dict:
    """Parse the TOML config at ``path``, or the packaged defaults."""
    if path is None:
        ref = resources.files("strokeplan").joinpath("params/default.toml")
        return tomllib.loads(ref.read_text(encoding="utf-8"))
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_params(path: Optional[str] = None) -> ModelParams:
    """Load ModelParams from a TOML file (packaged defaults when omitted)."""
    return params_from_dict(load_raw_config(path))


def _clinical_code(ct_positive: bool, siriraj: int) -> int:
    return int(ct_positive) * N_SIRIRAJ + (siriraj - SIRIRAJ_MIN)


def decode_clinical(code: int) -> Clinical:
    ct = CtReading.POSITIVE if code >= N_SIRIRAJ else CtReading.NEGATIVE
    return Clinical(ct=ct, siriraj=code % N_SIRIRAJ + SIRIRAJ_MIN)


def encode_observation(obs: Observation) -> int:
    if isinstance(obs, Clinical):
        return _clinical_code(obs.ct is CtReading.POSITIVE, obs.siriraj)
    return obs.flag_index


class StrokeModel:
    """Compiled generative model over the eight flag combinations.

    Dense lookup tables are precomputed at construction so the filters,
    planner, and simulators can run on integer flag indices:

    - ``transition_matrices[a][i, j]``: P(flags j | flags i, action a)
    - ``clinical_like[setting][code, j]``: clinical observation likelihood
    - ``dsa_like[code, j]``: DSA report likelihood
    - ``reward_matrix[i, a]`` and ``penalty_vector[i]``
    """

    def __init__(self, params: ModelParams):
        params.validate()
        self.params = params
        self._compile()

    # -- compilation ---------------------------------------------------

    def _compile(self) -> None:
        p = self.params
        idx = np.arange(N_FLAG_STATES)
        self.has_ane = (idx & 4).astype(bool)
        self.has_avm = (idx & 2).astype(bool)
        self.has_occ = (idx & 1).astype(bool)
        self.has_any = idx > 0
        self.flag_cols = np.stack(
            [self.has_ane, self.has_avm, self.has_occ]).astype(float).T

        self.onset_probs = np.array([p.p_ane, p.p_avm, p.p_occ])

        self.transition_matrices = np.zeros((N_ACTIONS, N_FLAG_STATES,
                                             N_FLAG_STATES))
        for a in ACTIONS:
            for i in range(N_FLAG_STATES):
                for j in range(N_FLAG_STATES):
                    self.transition_matrices[a, i, j] = \
                        self._flag_transition_prob(i, a, j)

        # CT positive-read probability per (setting, flags).
        self.ct_pos = np.zeros((2, N_FLAG_STATES))
        for s_idx, setting in enumerate(_OBS_SETTINGS):
            sens = p.ct_sensitivity[setting]
            fp = 1.0 - p.ct_specificity[setting]
            for i in range(N_FLAG_STATES):
                if self.has_ane[i]:
                    self.ct_pos[s_idx, i] = sens["aneurysm"]
                elif self.has_any[i]:
                    self.ct_pos[s_idx, i] = sens["other_stroke"]
                else:
                    self.ct_pos[s_idx, i] = fp

        # Siriraj score pmf per (setting, flags).
        self.sir_pmf = np.zeros((2, N_FLAG_STATES, N_SIRIRAJ))
        for s_idx, setting in enumerate(_OBS_SETTINGS):
            for i in range(N_FLAG_STATES):
                cls = condition_class(self.has_ane[i], self.has_avm[i],
                                      self.has_occ[i])
                self.sir_pmf[s_idx, i] = p.siriraj_tables[cls][setting]
        self.sir_cdf = np.cumsum(self.sir_pmf, axis=-1)

        # clinical_like[setting][code, flags], code = ct * 11 + (score + 5)
        self.clinical_like = np.zeros((2, N_CLINICAL_CODES, N_FLAG_STATES))
        for s_idx in range(2):
            pos = self.ct_pos[s_idx]
            for code in range(N_CLINICAL_CODES):
                ct_positive = code >= N_SIRIRAJ
                ct_prob = pos if ct_positive else 1.0 - pos
                self.clinical_like[s_idx, code] = \
                    ct_prob * self.sir_pmf[s_idx, :, code % N_SIRIRAJ]

        # dsa_like[report_code, flags]: independent per-condition accuracy
        acc = p.dsa_accuracy
        self.dsa_like = np.ones((N_FLAG_STATES, N_FLAG_STATES))
        for code in range(N_FLAG_STATES):
            for i in range(N_FLAG_STATES):
                for bit in (4, 2, 1):
                    match = bool(code & bit) == bool(i & bit)
                    self.dsa_like[code, i] *= acc if match else 1.0 - acc

        r = p.reward_table
        self.reward_matrix = np.zeros((N_FLAG_STATES, N_ACTIONS))
        any_ = self.has_any
        self.reward_matrix[:, Action.WAIT] = np.where(
            any_, r.not_hospitalizing_penalty, 0.0)
        self.reward_matrix[:, Action.HOSP] = r.hosp_cost + np.where(
            any_, r.correct_hosp, r.unnecessary_hosp)
        self.reward_matrix[:, Action.DSA] = r.dsa_cost + np.where(
            any_, r.needed_dsa, r.unnecessary_dsa)
        for action, flag in ((Action.COIL, self.has_ane),
                             (Action.EMBO, self.has_avm),
                             (Action.REVC, self.has_occ)):
            self.reward_matrix[:, action] = r.treatment_cost + np.where(
                flag, r.correct_treatment, r.wrong_treatment)
        self.reward_matrix[:, Action.DISC] = np.where(
            any_, r.wrong_discharge, r.correct_discharge)

        self.penalty_vector = np.where(any_, r.untreated_terminal_penalty, 0.0)
        self.init_weights = p.init_mixture.weights()
        self.max_step_reward = float(self.reward_matrix.max())

    def _flag_transition_prob(self, i: int, action: Action, j: int) -> float:
        """Product over the three independent per-flag transitions."""
        prob = 1.0
        treated_bit = TREATMENT_BIT.get(action, 0)
        for name, bit in FLAG_BITS.items():
            before, after = bool(i & bit), bool(j & bit)
            if before:
                # A present condition persists unless this epoch treats it.
                stays = 0.0 if bit == treated_bit else 1.0
                prob *= stays if after else 1.0 - stays
            else:
                onset = self.onset_probs[FLAG_NAMES.index(name)]
                prob *= onset if after else 1.0 - onset
        return prob

    # -- settings ------------------------------------------------------

    @staticmethod
    def obs_setting(action: Action) -> int:
        """Observation-noise setting for clinical actions.

        HOSP uses in-hospital tables; every other non-DSA action emits
        the at-home (WAIT-quality) reading.
        """
        return 1 if action == Action.HOSP else 0

    # -- generative ops ------------------------------------------------

    def sample_initial_state(self, rng: np.random.Generator,
                             mixture: Optional[InitialMixture] = None
                             ) -> PatientState:
        weights = self.init_weights if mixture is None else mixture.weights()
        if mixture is not None:
            mixture.validate()
        idx = int(rng.choice(N_FLAG_STATES, p=weights))
        return PatientState.from_flag_index(idx, 0)

    def transition_flags_batch(self, flags: np.ndarray, action: Action,
                               u: np.ndarray) -> np.ndarray:
        """Advance flag indices one epoch using uniforms ``u`` of shape (m, 3).

        Onset draws apply to flags that are false at the start of the
        epoch; a treated flag clears with certainty and cannot re-onset
        within the same epoch.
        """
        treated_bit = TREATMENT_BIT.get(action, 0)
        out = np.zeros_like(flags)
        for col, (name, bit) in enumerate(FLAG_BITS.items()):
            before = (flags & bit) > 0
            onset = u[:, col] < self.onset_probs[col]
            if bit == treated_bit:
                after = ~before & onset
            else:
                after = before | onset
            out += after * bit
        return out

    def transition(self, state: PatientState, action: Action,
                   rng: np.random.Generator) -> PatientState:
        u = rng.random(3)
        flags = self.transition_flags_batch(
            np.array([state.flag_index]), action, u[None, :])
        return PatientState.from_flag_index(int(flags[0]), state.t + 1)

    def transition_probability(self, state: PatientState, action: Action,
                               next_state: PatientState) -> float:
        if next_state.t != state.t + 1:
            return 0.0
        return float(self.transition_matrices[action, state.flag_index,
                                              next_state.flag_index])

    def observation_codes_batch(self, next_flags: np.ndarray, action: Action,
                                u: np.ndarray) -> np.ndarray:
        """Sample observation codes using uniforms ``u`` of shape (m, 3).

        DSA codes index the 8 possible reports; clinical codes index the
        22 (CT reading, Siriraj score) pairs. The scheme is shared with
        the likelihood tables, so sampled frequencies match them exactly.
        """
        if action == Action.DSA:
            acc = self.params.dsa_accuracy
            codes = np.zeros(len(next_flags), dtype=np.int64)
            for col, bit in enumerate((4, 2, 1)):
                truth = (next_flags & bit) > 0
                correct = u[:, col] < acc
                codes += np.where(correct, truth, ~truth) * bit
            return codes
        setting = self.obs_setting(action)
        positive = u[:, 0] < self.ct_pos[setting, next_flags]
        cdf = self.sir_cdf[setting, next_flags]
        sir_idx = (u[:, 1, None] >= cdf).sum(axis=1)
        np.clip(sir_idx, 0, N_SIRIRAJ - 1, out=sir_idx)
        return positive * N_SIRIRAJ + sir_idx

    def decode_observation(self, code: int, action: Action) -> Observation:
        if action == Action.DSA:
            return DsaReport(bool(code & 4), bool(code & 2), bool(code & 1))
        return decode_clinical(code)

    def sample_observation(self, next_state: PatientState, action: Action,
                           rng: np.random.Generator) -> Observation:
        u = rng.random(3)
        code = self.observation_codes_batch(
            np.array([next_state.flag_index]), action, u[None, :])
        return self.decode_observation(int(code[0]), action)

    def likelihood_vector(self, obs: Observation, action: Action) -> np.ndarray:
        """P(obs | flags, action) over all eight flag combinations."""
        if action == Action.DSA:
            if not isinstance(obs, DsaReport):
                raise LikelihoodDomainError(
                    f"DSA emits DsaReport observations, got {type(obs).__name__}")
            return self.dsa_like[obs.flag_index]
        if not isinstance(obs, Clinical):
            raise LikelihoodDomainError(
                f"{Action(action).name} emits Clinical observations, "
                f"got {type(obs).__name__}")
        return self.clinical_like[self.obs_setting(action),
                                  encode_observation(obs)]

    def observation_likelihood(self, obs: Observation,
                               next_state: PatientState,
                               action: Action) -> float:
        return float(self.likelihood_vector(obs, action)[next_state.flag_index])

    def reward(self, state: PatientState, action: Action) -> float:
        return float(self.reward_matrix[state.flag_index, action])

    def terminal_penalty(self, state: PatientState) -> float:
        """One-time penalty charged at termination if any condition remains."""
        return float(self.penalty_vector[state.flag_index])

    def is_terminal(self, state: PatientState,
                    last_action: Optional[Action]) -> bool:
        return last_action == Action.DISC or state.t >= self.params.horizon

    def det_step(self, state: PatientState, action: Action,
                 u: Sequence[float]) -> tuple:
        """Deterministic single step from six pre-committed uniforms.

        ``u[0:3]`` drive the three onset draws, ``u[3:6]`` the observation.
        Returns ``(next_state, observation, reward, terminated, penalty)``
        where ``penalty`` is the terminal penalty of the next state
        (meaningful only when ``terminated``).
        """
        u = np.asarray(u, dtype=float)
        flags = self.transition_flags_batch(
            np.array([state.flag_index]), action, u[None, :3])
        next_state = PatientState.from_flag_index(int(flags[0]), state.t + 1)
        code = self.observation_codes_batch(flags, action, u[None, 3:6])
        obs = self.decode_observation(int(code[0]), action)
        terminated = self.is_terminal(next_state, action)
        return (next_state, obs, self.reward(state, action), terminated,
                self.terminal_penalty(next_state))
