"""Sample-size search, allocation-ratio optimization, and design resolution.

The required control-arm size is found by one-dimensional root solving
on n0 with the arm ratios held fixed.  Allocation ratios may themselves
be optimized first under an A-, D-, or E-optimality criterion applied
to the covariance of the treatment-effect estimators with the total
sample size held constant.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtr, ndtri

from armdesign.corrections import Mcc, ThresholdSet, thresholds
from armdesign.errors import DomainError, InputError, NumericError, SearchLimitError
from armdesign.models import (
    EffectScenario,
    OutcomeKind,
    OutcomeModel,
    SampleSizes,
    named_scenarios,
    null_correlation,
    truth_vector,
    validate_effects,
    z_law,
)
from armdesign.mvn import QmcSettings, mvn_rectangle
from armdesign.opchar import CurveData, OpChars, curves, opchars_from_pmf, outcome_pmf

N0_CAP = 1e7
_REL_WIDTH = 1e-6
_LOG_R_BOUND = 5.0
_RESTARTS = 20


class PowerGoal(str, Enum):
    CONJUNCTIVE_HA = "conjunctive_ha"
    DISJUNCTIVE_HA = "disjunctive_ha"
    MIN_MARGINAL_LFC = "min_marginal_lfc"


class AllocationKind(str, Enum):
    FIXED = "fixed"
    A_OPTIMAL = "a_optimal"
    D_OPTIMAL = "d_optimal"
    E_OPTIMAL = "e_optimal"


@dataclass(frozen=True)
class Allocation:
    kind: AllocationKind
    ratios: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.kind is AllocationKind.FIXED:
            if self.ratios is None:
                raise InputError("fixed allocation requires ratios")
            r = tuple(float(x) for x in self.ratios)
            if any(not np.isfinite(x) or x <= 0 for x in r):
                raise DomainError("allocation ratios must all be positive and finite")
            object.__setattr__(self, "ratios", r)
        elif self.ratios is not None:
            raise InputError(f"{self.kind.value} allocation does not take explicit ratios")

    @classmethod
    def fixed(cls, ratios) -> "Allocation":
        return cls(AllocationKind.FIXED, tuple(float(x) for x in ratios))


@dataclass(frozen=True)
class DesignScenario:
    """Complete user input set for one design problem."""

    model: OutcomeModel
    alpha: float
    beta: float
    delta1: float
    delta0: float
    mcc: Mcc
    power_goal: PowerGoal
    allocation: Allocation
    assumed_pis: tuple[float, ...] | None = None
    integer_n: bool = False
    plot_enabled: bool = True
    plot_quality: int = 100

    def __post_init__(self) -> None:
        for nm, val in (("alpha", self.alpha), ("beta", self.beta)):
            if not (np.isfinite(val) and 0.0 < val < 1.0):
                raise DomainError(f"{nm} must lie strictly in (0, 1), got {val}")
        validate_effects(self.model, self.delta1, self.delta0)
        k = self.model.k
        if self.allocation.kind is AllocationKind.FIXED and len(self.allocation.ratios) != k:
            raise InputError(
                f"allocation needs {k} ratios, got {len(self.allocation.ratios)}"
            )
        if self.assumed_pis is not None:
            pis = tuple(float(x) for x in self.assumed_pis)
            if len(pis) != k:
                raise InputError(f"assumed_pis needs {k} entries (one per experimental arm)")
            if any(not (0.0 < x < 1.0) for x in pis):
                raise DomainError("assumed_pis entries must lie strictly in (0, 1)")
            object.__setattr__(self, "assumed_pis", pis)
        if self.needs_optimal_allocation and self.model.kind is OutcomeKind.BERNOULLI and self.assumed_pis is None:
            raise InputError("Bernoulli optimal allocation requires assumed_pis")
        if not (10 <= int(self.plot_quality) <= 500):
            raise DomainError(f"plot quality must be in [10, 500], got {self.plot_quality}")

    @property
    def needs_optimal_allocation(self) -> bool:
        return self.allocation.kind is not AllocationKind.FIXED


@dataclass(frozen=True)
class Design:
    """A resolved design: sizes, ratios, thresholds, achieved power."""

    scenario: DesignScenario
    sizes: SampleSizes
    ratios: tuple[float, ...]
    thresholds: ThresholdSet
    achieved_power: float
    total_n: float


@dataclass(frozen=True)
class DesignResult:
    design: Design
    opchars: dict[str, OpChars]
    curve_data: CurveData | None
    warnings: tuple[str, ...]


def _design_thresholds(
    scenario: DesignScenario, ratios, settings: QmcSettings | None
) -> ThresholdSet:
    corr0 = None
    if scenario.mcc.needs_correlation:
        corr0 = null_correlation(scenario.model, np.asarray(ratios, dtype=float))
    return thresholds(scenario.mcc, scenario.alpha, scenario.model.k, corr=corr0, settings=settings)


def _goal_scenarios(scenario: DesignScenario) -> list[EffectScenario]:
    return named_scenarios(scenario.model, scenario.delta1, scenario.delta0)


def power_from_sizes(
    sizes: SampleSizes,
    scenario: DesignScenario,
    thr: ThresholdSet,
    settings: QmcSettings | None = None,
) -> float:
    """Goal power of the testing procedure at explicit arm sizes."""
    named = _goal_scenarios(scenario)
    ha = named[1]
    lfcs = named[2:]
    mcc = scenario.mcc
    crit = ndtri(1.0 - np.asarray(thr.gammas))
    if scenario.power_goal is PowerGoal.MIN_MARGINAL_LFC:
        vals = []
        for j, lfc in enumerate(lfcs):
            law = z_law(scenario.model, sizes, lfc)
            if mcc.is_stepwise:
                pmf = outcome_pmf(law, mcc, scenario.alpha, settings=settings, thr=thr)
                oc = opchars_from_pmf(pmf, truth_vector(scenario.model, lfc))
                vals.append(oc.p_marginal[j])
            else:
                vals.append(float(ndtr(law.mean[j] - crit[j])))
        return float(min(vals))
    law = z_law(scenario.model, sizes, ha)
    if mcc.is_stepwise:
        pmf = outcome_pmf(law, mcc, scenario.alpha, settings=settings, thr=thr)
        oc = opchars_from_pmf(pmf, truth_vector(scenario.model, ha))
        return oc.p_con if scenario.power_goal is PowerGoal.CONJUNCTIVE_HA else oc.p_dis
    qmc = settings or QmcSettings()
    if scenario.power_goal is PowerGoal.CONJUNCTIVE_HA:
        est = mvn_rectangle(crit, np.full(len(crit), np.inf), law.mean, law.corr, qmc)
        return est.value
    est = mvn_rectangle(np.full(len(crit), -np.inf), crit, law.mean, law.corr, qmc)
    return 1.0 - est.value


def power_at(
    n0: float,
    scenario: DesignScenario,
    ratios,
    thr: ThresholdSet | None = None,
    settings: QmcSettings | None = None,
) -> float:
    """Goal power with control size n0 and fixed allocation ratios."""
    if not (np.isfinite(n0) and n0 > 0):
        raise DomainError(f"n0 must be positive, got {n0}")
    r = np.asarray(ratios, dtype=float)
    if thr is None:
        thr = _design_thresholds(scenario, r, settings)
    return power_from_sizes(SampleSizes.from_ratios(n0, r), scenario, thr, settings)


def required_sample_size(
    scenario: DesignScenario,
    ratios=None,
    settings: QmcSettings | None = None,
) -> Design:
    """Smallest control-arm size meeting the power target.

    Brackets by doubling from n0=1, then bisects to relative width 1e-6.
    In integer mode each arm size is rounded up afterwards and the
    achieved power is recomputed at the executed (integer) sizes, with
    thresholds refreshed for the slightly perturbed ratios.
    """
    if ratios is None:
        if scenario.needs_optimal_allocation:
            raise InputError("ratios must be resolved before the sample-size search")
        ratios = scenario.allocation.ratios
    r = np.asarray(ratios, dtype=float)
    thr = _design_thresholds(scenario, r, settings)
    target = 1.0 - scenario.beta

    def f(n0: float) -> float:
        return power_from_sizes(SampleSizes.from_ratios(n0, r), scenario, thr, settings)

    lo, hi = 1.0, 1.0
    f_hi = f(hi)
    if f_hi >= target:
        # target already met at n0=1; shrink the lower bracket instead
        while lo > 1e-6:
            lo /= 2.0
            if f(lo) < target:
                break
        else:
            lo = 0.0
    else:
        while f_hi < target:
            lo, hi = hi, hi * 2.0
            if hi > N0_CAP:
                raise SearchLimitError(
                    f"power target {target} unreachable with n0 <= {N0_CAP:.0e}"
                )
            f_hi = f(hi)
    while lo > 0.0 and (hi - lo) / hi > _REL_WIDTH:
        mid = 0.5 * (lo + hi)
        if f(mid) >= target:
            hi = mid
        else:
            lo = mid
    n0_star = hi
    sizes = SampleSizes.from_ratios(n0_star, r)
    achieved = f(n0_star)
    final_thr = thr
    if scenario.integer_n:
        sizes = sizes.rounded_up()
        final_ratios = tuple(float(x) / sizes.n0 for x in sizes.n)
        final_thr = _design_thresholds(scenario, final_ratios, settings)
        achieved = power_from_sizes(sizes, scenario, final_thr, settings)
    ratios_out = tuple(float(x) / sizes.n0 for x in sizes.n)
    return Design(
        scenario=scenario,
        sizes=sizes,
        ratios=ratios_out,
        thresholds=final_thr,
        achieved_power=achieved,
        total_n=float(sizes.total),
    )


class OptimalityCriterion(str, Enum):
    A = "A"
    D = "D"
    E = "E"


def _unit_variances(model: OutcomeModel, assumed_pis) -> np.ndarray:
    if model.kind is OutcomeKind.NORMAL:
        return np.asarray(model.sigmas, dtype=float) ** 2
    if assumed_pis is None:
        raise InputError("Bernoulli optimal allocation requires assumed_pis")
    pis = np.concatenate(([model.pi0], np.asarray(assumed_pis, dtype=float)))
    if len(pis) != model.k + 1:
        raise InputError(f"assumed_pis needs {model.k} entries")
    if np.any(pis <= 0.0) or np.any(pis >= 1.0):
        raise DomainError("assumed_pis entries must lie strictly in (0, 1)")
    return pis * (1.0 - pis)


def _criterion_value(criterion: OptimalityCriterion, r: np.ndarray, v: np.ndarray) -> float:
    # Cov(tau_hat) with total sample size 1: (1 + sum r) * (v0*J + diag(v_k/r_k))
    scale = 1.0 + r.sum()
    m = np.full((len(r), len(r)), v[0]) + np.diag(v[1:] / r)
    m = scale * m
    if criterion is OptimalityCriterion.A:
        return float(np.trace(m))
    if criterion is OptimalityCriterion.D:
        sign, logdet = np.linalg.slogdet(m)
        return float(logdet) if sign > 0 else float("inf")
    return float(np.linalg.eigvalsh(m)[-1])


def optimal_ratios(
    criterion: OptimalityCriterion,
    model: OutcomeModel,
    assumed_pis=None,
) -> tuple[float, ...]:
    """Allocation ratios optimizing the chosen covariance criterion.

    A-optimality with equal variances uses the closed-form square-root
    rule r = 1/sqrt(K); K=1 uses the exact two-arm solution.  All other
    cases run a bounded derivative-free simplex over log-ratios with
    multiple deterministic restarts.
    """
    v = _unit_variances(model, assumed_pis)
    k = model.k
    if k == 1:
        return (float(np.sqrt(v[1] / v[0])),)
    if criterion is OptimalityCriterion.A and np.allclose(v, v[0], rtol=1e-12, atol=0.0):
        return tuple([1.0 / np.sqrt(k)] * k)

    def obj(x: np.ndarray) -> float:
        return _criterion_value(criterion, np.exp(x), v)

    rng = np.random.default_rng(np.random.SeedSequence(entropy=(0xA110C, k)))
    starts = [np.zeros(k)]
    starts += [rng.uniform(-2.0, 2.0, size=k) for _ in range(_RESTARTS - 1)]
    best = None
    bounds = [(-_LOG_R_BOUND, _LOG_R_BOUND)] * k
    for x0 in starts:
        res = minimize(
            obj,
            x0,
            method="Nelder-Mead",
            bounds=bounds,
            options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.isfinite(best.fun):
        raise NumericError(f"allocation optimizer failed for criterion {criterion.value}")
    return tuple(float(x) for x in np.exp(best.x))


_CRITERION_FOR_KIND = {
    AllocationKind.A_OPTIMAL: OptimalityCriterion.A,
    AllocationKind.D_OPTIMAL: OptimalityCriterion.D,
    AllocationKind.E_OPTIMAL: OptimalityCriterion.E,
}

LONG_RUNTIME_K = 5


def runtime_warnings(scenario: DesignScenario) -> tuple[str, ...]:
    out = []
    if scenario.model.k >= LONG_RUNTIME_K:
        out.append(f"k={scenario.model.k} designs can take a long time to evaluate")
    if scenario.mcc is Mcc.STEPDOWN_DUNNETT:
        out.append("step-down Dunnett requires repeated quantile solves and can be slow")
    return tuple(out)


def resolve_design(
    scenario: DesignScenario,
    settings: QmcSettings | None = None,
) -> DesignResult:
    """Full pipeline: ratios, sample size, tables, and optional curves."""
    if scenario.needs_optimal_allocation:
        crit = _CRITERION_FOR_KIND[scenario.allocation.kind]
        ratios = optimal_ratios(crit, scenario.model, scenario.assumed_pis)
    else:
        ratios = scenario.allocation.ratios
    design = required_sample_size(scenario, ratios=ratios, settings=settings)

    named = _goal_scenarios(scenario)
    tables: dict[str, OpChars] = {}
    for sc in named:
        law = z_law(scenario.model, design.sizes, sc)
        pmf = outcome_pmf(law, scenario.mcc, scenario.alpha, settings=settings, thr=design.thresholds)
        tables[sc.name()] = opchars_from_pmf(pmf, truth_vector(scenario.model, sc))

    curve_data = None
    if scenario.plot_enabled:
        curve_data = curves(
            scenario.model,
            design.sizes,
            scenario.mcc,
            scenario.alpha,
            scenario.delta1,
            scenario.delta0,
            scenario.plot_quality,
            power_target=1.0 - scenario.beta,
            settings=settings,
            thr=design.thresholds,
        )
    return DesignResult(
        design=design,
        opchars=tables,
        curve_data=curve_data,
        warnings=runtime_warnings(scenario),
    )
