"""Outcome models and the joint law of the Wald statistics.

Maps (model parameters, sample sizes, truth scenario) to the mean vector
and correlation matrix of the joint test-statistic distribution, and
builds the named truth scenarios used for powering: the global null, the
global alternative, and each arm's least favourable configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from armdesign.errors import DegenerateVarianceError, DomainError, InputError
from armdesign.mvn import CorrMatrix

_PI_GUARD = 1e-6


class OutcomeKind(str, Enum):
    NORMAL = "normal"
    BERNOULLI = "bernoulli"


@dataclass(frozen=True)
class OutcomeModel:
    """Outcome distribution for control arm 0 and experimental arms 1..K.

    Normal outcomes carry known standard deviations sigma_0..sigma_K;
    Bernoulli outcomes carry the control response rate pi0 (experimental
    rates are part of the truth scenario, not the model).
    """

    kind: OutcomeKind
    k: int
    sigmas: tuple[float, ...] | None = None
    pi0: float | None = None

    def __post_init__(self) -> None:
        if not (1 <= self.k <= 5):
            raise DomainError(f"number of experimental arms must be in 1..5, got {self.k}")
        if self.kind is OutcomeKind.NORMAL:
            if self.sigmas is None or len(self.sigmas) != self.k + 1:
                raise InputError(
                    f"normal model needs {self.k + 1} standard deviations (control first)"
                )
            if any(not np.isfinite(s) or s <= 0 for s in self.sigmas):
                raise DomainError("all standard deviations must be finite and positive")
        else:
            if self.pi0 is None:
                raise InputError("bernoulli model needs the control response rate pi0")
            if not (_PI_GUARD < self.pi0 < 1.0 - _PI_GUARD):
                raise DegenerateVarianceError(
                    f"pi0 must lie in ({_PI_GUARD}, {1 - _PI_GUARD}), got {self.pi0}"
                )


def normal_model(sigmas) -> OutcomeModel:
    sig = tuple(float(s) for s in sigmas)
    return OutcomeModel(kind=OutcomeKind.NORMAL, k=len(sig) - 1, sigmas=sig)


def bernoulli_model(k: int, pi0: float) -> OutcomeModel:
    return OutcomeModel(kind=OutcomeKind.BERNOULLI, k=k, pi0=float(pi0))


class ScenarioLabel(str, Enum):
    HG = "H_G"
    HA = "H_A"
    LFC = "LFC"
    CUSTOM = "custom"


@dataclass(frozen=True)
class EffectScenario:
    """One truth configuration.

    Normal models store treatment effects tau_1..tau_K; Bernoulli models
    store the full response-rate vector pi_0..pi_K.
    """

    label: ScenarioLabel
    effects: tuple[float, ...] | None = None
    pis: tuple[float, ...] | None = None
    lfc_arm: int | None = None

    def name(self) -> str:
        if self.label is ScenarioLabel.LFC:
            return f"LFC_{self.lfc_arm}"
        return self.label.value

    def effect_vector(self, model: OutcomeModel) -> np.ndarray:
        """Treatment effects tau_k relative to control, length K."""
        if model.kind is OutcomeKind.NORMAL:
            if self.effects is None or len(self.effects) != model.k:
                raise InputError("normal scenario needs K treatment effects")
            return np.asarray(self.effects, dtype=float)
        if self.pis is None or len(self.pis) != model.k + 1:
            raise InputError("bernoulli scenario needs K+1 response rates (control first)")
        p = np.asarray(self.pis, dtype=float)
        return p[1:] - p[0]


def normal_scenario(effects, label: ScenarioLabel = ScenarioLabel.CUSTOM, lfc_arm: int | None = None) -> EffectScenario:
    return EffectScenario(label=label, effects=tuple(float(t) for t in effects), lfc_arm=lfc_arm)


def bernoulli_scenario(pis, label: ScenarioLabel = ScenarioLabel.CUSTOM, lfc_arm: int | None = None) -> EffectScenario:
    p = tuple(float(x) for x in pis)
    bad = [i for i, x in enumerate(p) if not (0.0 < x < 1.0)]
    if bad:
        raise DomainError(f"response rates at positions {bad} are outside (0, 1)")
    return EffectScenario(label=label, pis=p, lfc_arm=lfc_arm)


@dataclass(frozen=True)
class SampleSizes:
    """Per-arm sample sizes, control first; fractional unless rounded."""

    n0: float
    n: tuple[float, ...]

    def __post_init__(self) -> None:
        if not np.isfinite(self.n0) or self.n0 <= 0:
            raise DomainError(f"control sample size must be positive, got {self.n0}")
        if any(not np.isfinite(v) or v <= 0 for v in self.n):
            raise DomainError("all arm sample sizes must be positive")

    @property
    def total(self) -> float:
        return self.n0 + sum(self.n)

    @property
    def is_integer(self) -> bool:
        vals = (self.n0, *self.n)
        return all(float(v).is_integer() for v in vals)

    def rounded_up(self) -> "SampleSizes":
        return SampleSizes(n0=float(np.ceil(self.n0 - 1e-9)), n=tuple(float(np.ceil(v - 1e-9)) for v in self.n))

    @classmethod
    def from_ratios(cls, n0: float, ratios) -> "SampleSizes":
        return cls(n0=float(n0), n=tuple(float(r) * float(n0) for r in ratios))


@dataclass(frozen=True)
class ZLaw:
    """Joint law of the Wald statistics: Z ~ MVN(mean, corr)."""

    mean: np.ndarray
    corr: CorrMatrix
    info: np.ndarray


def _arm_variances(model: OutcomeModel, scenario: EffectScenario) -> np.ndarray:
    """Per-observation outcome variances v_0..v_K under the scenario."""
    if model.kind is OutcomeKind.NORMAL:
        return np.asarray(model.sigmas, dtype=float) ** 2
    if scenario.pis is None or len(scenario.pis) != model.k + 1:
        raise InputError("bernoulli information needs the scenario's K+1 response rates")
    p = np.asarray(scenario.pis, dtype=float)
    if np.any(p <= _PI_GUARD) or np.any(p >= 1.0 - _PI_GUARD):
        raise DegenerateVarianceError(
            "response rates too close to 0 or 1 for a non-degenerate variance"
        )
    return p * (1.0 - p)


def information(model: OutcomeModel, sizes: SampleSizes, scenario: EffectScenario) -> np.ndarray:
    """Fisher information I_k = 1 / (v_0/n_0 + v_k/n_k) per experimental arm."""
    if len(sizes.n) != model.k:
        raise InputError(f"expected {model.k} experimental sample sizes, got {len(sizes.n)}")
    v = _arm_variances(model, scenario)
    nk = np.asarray(sizes.n, dtype=float)
    return 1.0 / (v[0] / sizes.n0 + v[1:] / nk)


def z_law(model: OutcomeModel, sizes: SampleSizes, scenario: EffectScenario) -> ZLaw:
    """Mean vector and correlation of the Wald statistics under the scenario.

    The shared control arm induces positive correlation
    sqrt(I_k1 I_k2) * v_0/n_0 between every pair of statistics.
    """
    info = information(model, sizes, scenario)
    tau = scenario.effect_vector(model)
    v0 = _arm_variances(model, scenario)[0]
    root_i = np.sqrt(info)
    mean = tau * root_i
    shared = v0 / sizes.n0
    corr = np.outer(root_i, root_i) * shared
    np.fill_diagonal(corr, 1.0)
    return ZLaw(mean=mean, corr=CorrMatrix.from_array(corr), info=info)


def null_correlation(model: OutcomeModel, ratios) -> CorrMatrix:
    """Correlation of the Z vector under the global null, from ratios alone.

    Scale-invariant in n_0, so thresholds depending on it can be computed
    before sample sizes are known.
    """
    sizes = SampleSizes.from_ratios(100.0, ratios)
    return z_law(model, sizes, global_null(model)).corr


def global_null(model: OutcomeModel) -> EffectScenario:
    if model.kind is OutcomeKind.NORMAL:
        return normal_scenario([0.0] * model.k, ScenarioLabel.HG)
    return bernoulli_scenario([model.pi0] * (model.k + 1), ScenarioLabel.HG)


def named_scenarios(model: OutcomeModel, delta1: float, delta0: float) -> list[EffectScenario]:
    """H_G, H_A, and LFC_1..LFC_K for the given interesting/uninteresting effects.

    Under LFC_k arm k sits at delta1 and every other arm at delta0.
    Bernoulli scenarios are expressed as response rates pi0 + effect.
    """
    validate_effects(model, delta1, delta0)
    k = model.k
    out = [global_null(model)]
    if model.kind is OutcomeKind.NORMAL:
        out.append(normal_scenario([delta1] * k, ScenarioLabel.HA))
        for arm in range(1, k + 1):
            eff = [delta0] * k
            eff[arm - 1] = delta1
            out.append(normal_scenario(eff, ScenarioLabel.LFC, lfc_arm=arm))
    else:
        pi0 = float(model.pi0)
        out.append(bernoulli_scenario([pi0] + [pi0 + delta1] * k, ScenarioLabel.HA))
        for arm in range(1, k + 1):
            pis = [pi0] + [pi0 + delta0] * k
            pis[arm] = pi0 + delta1
            out.append(bernoulli_scenario(pis, ScenarioLabel.LFC, lfc_arm=arm))
    return out


def validate_effects(model: OutcomeModel, delta1: float, delta0: float) -> None:
    """Check the effect-size constraints, reporting every failed bound."""
    problems = []
    if not np.isfinite(delta1) or delta1 <= 0:
        problems.append(f"delta1 must be positive, got {delta1}")
    if not np.isfinite(delta0) or delta0 >= delta1:
        problems.append(f"delta0 must be strictly below delta1, got delta0={delta0}, delta1={delta1}")
    if model.kind is OutcomeKind.BERNOULLI:
        pi0 = float(model.pi0)
        if np.isfinite(delta1) and not (0.0 < delta1 < 1.0 - pi0):
            problems.append(f"delta1 must lie in (0, 1 - pi0) = (0, {1 - pi0:.6g}), got {delta1}")
        if np.isfinite(delta0) and not (-pi0 < delta0):
            problems.append(f"delta0 must exceed -pi0 = {-pi0:.6g}, got {delta0}")
    if problems:
        raise DomainError("; ".join(problems))


def truth_vector(model: OutcomeModel, scenario: EffectScenario) -> np.ndarray:
    """Boolean vector, True where the null for arm k is false (tau_k > 0)."""
    return scenario.effect_vector(model) > 0.0
