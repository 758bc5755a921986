"""Operating characteristics of a multi-arm design under a truth scenario.

The central object is the probability mass over the 2^K rejection
outcomes.  Single-step procedures admit exact evaluation as 2^K MVN box
integrals; step-wise procedures are evaluated pointwise on a
deterministic QMC stream of correlated statistics.  Every reported
quantity is an expectation against that mass.  A patient-level trial
simulator provides the independent validation route.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import ndtr, ndtri

from armdesign.corrections import Mcc, ThresholdSet, procedure_closure, thresholds
from armdesign.errors import DomainError, InputError, NumericError
from armdesign.models import (
    EffectScenario,
    OutcomeKind,
    OutcomeModel,
    SampleSizes,
    ZLaw,
    null_correlation,
    truth_vector,
    z_law,
)
from armdesign.mvn import QmcSettings, qmc_normal_stream, mvn_rectangle

MIN_REPLICATES = 1000
_PMF_SUM_GUARD = 1e-4


class PmfMethod(str, Enum):
    ANALYTIC_BOX = "analytic_box"
    QMC = "qmc"
    SIMULATION = "simulation"


@dataclass(frozen=True)
class RejectionPmf:
    """Probability mass over rejection outcomes, indexed by bitmask.

    Outcome m has bit k set iff hypothesis k+1 is rejected.  ``raw_sum``
    is the integration total before normalization (1.0 exactly for
    frequency-based methods).
    """

    probs: np.ndarray
    method: PmfMethod
    error_estimate: float
    raw_sum: float = 1.0

    @property
    def k(self) -> int:
        return int(np.log2(len(self.probs)))

    def as_dict(self) -> dict[tuple[int, ...], float]:
        k = self.k
        out = {}
        for m, pr in enumerate(self.probs):
            bits = tuple((m >> j) & 1 for j in range(k))
            out[bits] = float(pr)
        return out


@dataclass(frozen=True)
class OpChars:
    """The eleven operating characteristics for one truth scenario."""

    p_con: float
    p_dis: float
    p_marginal: tuple[float, ...]
    pher: float
    fwer_i: tuple[float, ...]
    fwer_ii: tuple[float, ...]
    fdr: float
    fndr: float
    pfdr: float
    sensitivity: float
    specificity: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict:
        return {
            "p_con": self.p_con,
            "p_dis": self.p_dis,
            "p_marginal": list(self.p_marginal),
            "pher": self.pher,
            "fwer_i": list(self.fwer_i),
            "fwer_ii": list(self.fwer_ii),
            "fdr": self.fdr,
            "fndr": self.fndr,
            "pfdr": None if np.isnan(self.pfdr) else self.pfdr,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "flags": list(self.flags),
        }


def _outcome_bits(k: int) -> np.ndarray:
    """(2^K, K) matrix of rejection indicators per outcome bitmask."""
    idx = np.arange(1 << k)
    return ((idx[:, None] >> np.arange(k)[None, :]) & 1).astype(bool)


def outcome_pmf(
    law: ZLaw,
    mcc: Mcc,
    alpha: float,
    settings: QmcSettings | None = None,
    thr: ThresholdSet | None = None,
) -> RejectionPmf:
    """Distribution over the 2^K rejection outcomes for a Z law.

    Single-step and unadjusted procedures are integrated exactly as MVN
    boxes; rank-based procedures are evaluated on the QMC stream.  When
    ``thr`` is omitted it is derived from the law's own correlation,
    which equals the null correlation for normal models; Bernoulli
    callers should pass thresholds computed under the global null.
    """
    settings = settings or QmcSettings()
    k = law.corr.dim
    if thr is None:
        thr = thresholds(mcc, alpha, k, corr=law.corr if mcc.needs_correlation else None, settings=settings)
    if thr.k != k:
        raise InputError(f"threshold set has k={thr.k}, law has k={k}")
    if mcc.is_stepwise:
        return _pmf_qmc(law, mcc, thr, settings)
    return _pmf_analytic(law, thr, settings)


def _pmf_analytic(law: ZLaw, thr: ThresholdSet, settings: QmcSettings) -> RejectionPmf:
    k = law.corr.dim
    crit = ndtri(1.0 - np.asarray(thr.gammas))
    bits = _outcome_bits(k)
    probs = np.empty(1 << k)
    err = 0.0
    for m in range(1 << k):
        rej = bits[m]
        lower = np.where(rej, crit, -np.inf)
        upper = np.where(rej, np.inf, crit)
        est = mvn_rectangle(lower, upper, law.mean, law.corr, settings)
        probs[m] = est.value
        err = max(err, est.error_estimate)
    raw = float(probs.sum())
    if abs(raw - 1.0) > _PMF_SUM_GUARD:
        raise NumericError(f"analytic rejection pmf sums to {raw}, outside guard {_PMF_SUM_GUARD}")
    return RejectionPmf(probs=probs / raw, method=PmfMethod.ANALYTIC_BOX, error_estimate=err, raw_sum=raw)


def _pmf_qmc(law: ZLaw, mcc: Mcc, thr: ThresholdSet, settings: QmcSettings) -> RejectionPmf:
    k = law.corr.dim
    z = qmc_normal_stream(k, settings, law.corr, law.mean)
    rule = procedure_closure(mcc, thr)
    weights = 1 << np.arange(k)
    n_out = 1 << k
    reps = z.shape[0]
    freqs = np.empty((reps, n_out))
    for r in range(reps):
        p = ndtr(-z[r])
        rej = rule(p)
        masks = rej @ weights
        freqs[r] = np.bincount(masks, minlength=n_out) / z.shape[1]
    probs = freqs.mean(axis=0)
    if reps > 1:
        err = 3.0 * float((freqs.std(axis=0, ddof=1) / np.sqrt(reps)).max())
    else:
        err = float("nan")
    return RejectionPmf(probs=probs, method=PmfMethod.QMC, error_estimate=err, raw_sum=float(probs.sum()))


def opchars_from_pmf(pmf: RejectionPmf, truth) -> OpChars:
    """All eleven quantities as expectations over the rejection outcomes.

    ``truth`` marks arms whose null is false.  Ratio quantities use the
    0-when-empty convention for FDR/FNDR; pFDR conditions on any
    rejection and is NaN (flagged) when rejection has probability zero.
    Vacuous sensitivity/specificity denominators yield 1 with a flag.
    """
    k = pmf.k
    t = np.asarray(truth, dtype=bool)
    if t.shape != (k,):
        raise InputError(f"truth vector must have length {k}, got shape {t.shape}")
    p = pmf.probs
    bits = _outcome_bits(k)
    v = bits[:, ~t].sum(axis=1)
    tp = bits[:, t].sum(axis=1)
    r = v + tp
    n_false = int(t.sum())
    n_true = k - n_false
    miss = n_false - tp

    flags: list[str] = []
    p_con = float(p[r == k].sum())
    p_dis = float(p[r >= 1].sum())
    p_marginal = tuple(float(p[bits[:, j]].sum()) for j in range(k))
    pher = float((p * v).sum() / k)
    fwer_i = tuple(float(p[v >= a].sum()) for a in range(1, k + 1))
    fwer_ii = tuple(float(p[miss >= a].sum()) for a in range(1, k + 1))
    fdr = float((p * v / np.maximum(r, 1)).sum())
    fndr = float((p * miss / np.maximum(k - r, 1)).sum())
    pr_any = float(p[r > 0].sum())
    if pr_any > 0.0:
        pfdr = float((p * v / np.maximum(r, 1))[r > 0].sum() / pr_any)
    else:
        pfdr = float("nan")
        flags.append("pfdr_undefined")
    if n_false > 0:
        sensitivity = float((p * tp).sum() / n_false)
    else:
        sensitivity = 1.0
        flags.append("sensitivity_vacuous")
    if n_true > 0:
        specificity = float((p * (n_true - v)).sum() / n_true)
    else:
        specificity = 1.0
        flags.append("specificity_vacuous")
    return OpChars(
        p_con=p_con,
        p_dis=p_dis,
        p_marginal=p_marginal,
        pher=pher,
        fwer_i=fwer_i,
        fwer_ii=fwer_ii,
        fdr=fdr,
        fndr=fndr,
        pfdr=pfdr,
        sensitivity=sensitivity,
        specificity=specificity,
        flags=tuple(flags),
    )


def analytic_opchars(
    model: OutcomeModel,
    sizes: SampleSizes,
    scenario: EffectScenario,
    mcc: Mcc,
    alpha: float,
    settings: QmcSettings | None = None,
    thr: ThresholdSet | None = None,
) -> OpChars:
    """Convenience wrapper: law, pmf, and expectations in one call."""
    law = z_law(model, sizes, scenario)
    if thr is None:
        ratios = np.asarray(sizes.n) / sizes.n0
        corr0 = null_correlation(model, ratios) if mcc.needs_correlation else None
        thr = thresholds(mcc, alpha, model.k, corr=corr0, settings=settings)
    pmf = outcome_pmf(law, mcc, alpha, settings=settings, thr=thr)
    return opchars_from_pmf(pmf, truth_vector(model, scenario))


@dataclass(frozen=True)
class SimulationResult:
    """Empirical operating characteristics with Monte-Carlo standard errors."""

    opchars: OpChars
    std_errors: OpChars
    replicates: int
    seed: int
    sizes: SampleSizes


_SIM_BLOCK = 1 << 14


def simulate_trials(
    model: OutcomeModel,
    sizes: SampleSizes,
    scenario: EffectScenario,
    mcc: Mcc,
    alpha: float,
    replicates: int,
    seed: int,
    thr: ThresholdSet | None = None,
    settings: QmcSettings | None = None,
) -> SimulationResult:
    """Patient-level trial simulation of the full testing procedure.

    Sample sizes are rounded up to integers for data generation.  For
    Bernoulli outcomes the analysis-stage information plugs in the
    observed rates, with the per-observation variance floored at 0.5/n
    so a replicate with 0 or n responses keeps a finite statistic.
    Replicates are generated in fixed-size blocks with per-block seeds,
    so results do not depend on how work is scheduled.
    """
    if replicates < MIN_REPLICATES:
        raise DomainError(f"replicates must be at least {MIN_REPLICATES}, got {replicates}")
    n_int = sizes if sizes.is_integer else sizes.rounded_up()
    k = model.k
    if thr is None:
        ratios = np.asarray(n_int.n) / n_int.n0
        corr0 = null_correlation(model, ratios) if mcc.needs_correlation else None
        thr = thresholds(mcc, alpha, k, corr=corr0, settings=settings)
    rule = procedure_closure(mcc, thr)
    truth = truth_vector(model, scenario)

    n_blocks = (replicates + _SIM_BLOCK - 1) // _SIM_BLOCK
    children = np.random.SeedSequence(entropy=(int(seed), 0x7A1)).spawn(n_blocks)
    rej = np.empty((replicates, k), dtype=bool)
    done = 0
    for b in range(n_blocks):
        m = min(_SIM_BLOCK, replicates - done)
        rng = np.random.default_rng(children[b])
        z = _simulate_z_block(model, n_int, scenario, rng, m)
        rej[done : done + m] = rule(ndtr(-z))
        done += m

    return _summarize_rejections(rej, truth, replicates, seed, n_int)


def _simulate_z_block(
    model: OutcomeModel, sizes: SampleSizes, scenario: EffectScenario, rng: np.random.Generator, m: int
) -> np.ndarray:
    k = model.k
    n0 = int(sizes.n0)
    nk = np.asarray(sizes.n, dtype=float).astype(int)
    if model.kind is OutcomeKind.NORMAL:
        tau = scenario.effect_vector(model)
        sig = np.asarray(model.sigmas, dtype=float)
        xbar0 = rng.normal(0.0, sig[0] / np.sqrt(n0), size=m)
        xbark = rng.normal(tau[None, :], sig[1:][None, :] / np.sqrt(nk)[None, :], size=(m, k))
        info = 1.0 / (sig[0] ** 2 / n0 + sig[1:] ** 2 / nk)
        return (xbark - xbar0[:, None]) * np.sqrt(info)[None, :]
    pis = np.asarray(scenario.pis, dtype=float)
    p0_hat = rng.binomial(n0, pis[0], size=m) / n0
    pk_hat = rng.binomial(nk[None, :], pis[1:][None, :], size=(m, k)) / nk[None, :]
    v0 = np.maximum(p0_hat * (1.0 - p0_hat), 0.5 / n0)
    vk = np.maximum(pk_hat * (1.0 - pk_hat), 0.5 / nk[None, :])
    info = 1.0 / (v0[:, None] / n0 + vk / nk[None, :])
    return (pk_hat - p0_hat[:, None]) * np.sqrt(info)


def _summarize_rejections(
    rej: np.ndarray, truth: np.ndarray, replicates: int, seed: int, sizes: SampleSizes
) -> SimulationResult:
    n, k = rej.shape
    t = np.asarray(truth, dtype=bool)
    v = rej[:, ~t].sum(axis=1)
    tp = rej[:, t].sum(axis=1)
    r = v + tp
    n_false = int(t.sum())
    n_true = k - n_false
    miss = n_false - tp

    def mean_se(x: np.ndarray) -> tuple[float, float]:
        return float(x.mean()), float(x.std(ddof=1) / np.sqrt(n))

    flags: list[str] = []
    p_con, se_con = mean_se((r == k).astype(float))
    p_dis, se_dis = mean_se((r >= 1).astype(float))
    marg = [mean_se(rej[:, j].astype(float)) for j in range(k)]
    pher, se_pher = mean_se(v / k)
    fw1 = [mean_se((v >= a).astype(float)) for a in range(1, k + 1)]
    fw2 = [mean_se((miss >= a).astype(float)) for a in range(1, k + 1)]
    fdr, se_fdr = mean_se(v / np.maximum(r, 1))
    fndr, se_fndr = mean_se(miss / np.maximum(k - r, 1))
    pos = r > 0
    if pos.any():
        sub = (v / np.maximum(r, 1))[pos]
        pfdr = float(sub.mean())
        se_pfdr = float(sub.std(ddof=1) / np.sqrt(len(sub))) if len(sub) > 1 else float("nan")
    else:
        pfdr, se_pfdr = float("nan"), float("nan")
        flags.append("pfdr_undefined")
    if n_false > 0:
        sens, se_sens = mean_se(tp / n_false)
    else:
        sens, se_sens = 1.0, 0.0
        flags.append("sensitivity_vacuous")
    if n_true > 0:
        spec, se_spec = mean_se((n_true - v) / n_true)
    else:
        spec, se_spec = 1.0, 0.0
        flags.append("specificity_vacuous")

    values = OpChars(
        p_con=p_con,
        p_dis=p_dis,
        p_marginal=tuple(mv for mv, _ in marg),
        pher=pher,
        fwer_i=tuple(mv for mv, _ in fw1),
        fwer_ii=tuple(mv for mv, _ in fw2),
        fdr=fdr,
        fndr=fndr,
        pfdr=pfdr,
        sensitivity=sens,
        specificity=spec,
        flags=tuple(flags),
    )
    errors = OpChars(
        p_con=se_con,
        p_dis=se_dis,
        p_marginal=tuple(se for _, se in marg),
        pher=se_pher,
        fwer_i=tuple(se for _, se in fw1),
        fwer_ii=tuple(se for _, se in fw2),
        fdr=se_fdr,
        fndr=se_fndr,
        pfdr=se_pfdr,
        sensitivity=se_sens,
        specificity=se_spec,
        flags=(),
    )
    return SimulationResult(opchars=values, std_errors=errors, replicates=replicates, seed=seed, sizes=sizes)


@dataclass(frozen=True)
class CurveData:
    """Grid data behind the two operating-characteristic plot panels.

    Series (a) tracks every quantity as all arms share effect theta;
    series (b) tracks each arm's marginal power with that arm at theta
    and the others shifted down by delta1 - delta0.
    """

    theta_grid: np.ndarray
    series_a: dict[str, np.ndarray]
    series_b: dict[str, np.ndarray]
    reference: dict[str, float] = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["theta,quantity,arm,value,series"]
        for name, vals in self.series_a.items():
            base, arm = _split_arm(name)
            for th, val in zip(self.theta_grid, vals):
                lines.append(f"{_csv_num(th)},{base},{arm},{_csv_num(val)},a")
        for name, vals in self.series_b.items():
            base, arm = _split_arm(name)
            for th, val in zip(self.theta_grid, vals):
                lines.append(f"{_csv_num(th)},{base},{arm},{_csv_num(val)},b")
        return "\n".join(lines) + "\n"


def _split_arm(name: str) -> tuple[str, str]:
    if name.startswith("marginal_power_"):
        return "marginal_power", name.rsplit("_", 1)[1]
    return name, ""


def _csv_num(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def _curve_scenario(model: OutcomeModel, effects: np.ndarray) -> EffectScenario:
    from armdesign.models import bernoulli_scenario, normal_scenario

    if model.kind is OutcomeKind.NORMAL:
        return normal_scenario(effects)
    return bernoulli_scenario([model.pi0] + [model.pi0 + e for e in effects])


def curve_grid(model: OutcomeModel, delta1: float, delta0: float, quality: int) -> np.ndarray:
    """Effect grid shared by both series, clipped to valid proportions."""
    if not (10 <= quality <= 500):
        raise DomainError(f"plot quality must be in [10, 500], got {quality}")
    lo = min(0.0, delta0)
    hi = delta1
    pad = 0.25 * (hi - lo)
    g_lo, g_hi = lo - pad, hi + pad
    if model.kind is OutcomeKind.BERNOULLI:
        eps = 1e-4
        shift = delta1 - delta0
        g_lo = max(g_lo, -model.pi0 + eps, shift - model.pi0 + eps)
        g_hi = min(g_hi, 1.0 - model.pi0 - eps)
    if g_lo >= g_hi:
        raise InputError("effect grid is empty after clipping to valid proportions")
    return np.linspace(g_lo, g_hi, quality)


def curves(
    model: OutcomeModel,
    sizes: SampleSizes,
    mcc: Mcc,
    alpha: float,
    delta1: float,
    delta0: float,
    quality: int,
    power_target: float,
    settings: QmcSettings | None = None,
    thr: ThresholdSet | None = None,
) -> CurveData:
    """Operating characteristics along the plot grids.

    Thresholds are fixed design properties and are computed once (under
    the global null) rather than per grid point.
    """
    settings = settings or QmcSettings()
    grid = curve_grid(model, delta1, delta0, quality)
    k = model.k
    if thr is None:
        ratios = np.asarray(sizes.n) / sizes.n0
        corr0 = null_correlation(model, ratios) if mcc.needs_correlation else None
        thr = thresholds(mcc, alpha, k, corr=corr0, settings=settings)

    names = (
        ["p_con", "p_dis", "pher", "fdr", "fndr", "pfdr", "sensitivity", "specificity"]
        + [f"fwer_i_{a}" for a in range(1, k + 1)]
        + [f"fwer_ii_{a}" for a in range(1, k + 1)]
        + [f"marginal_power_{j}" for j in range(1, k + 1)]
    )
    series_a = {nm: np.empty(len(grid)) for nm in names}
    series_b = {f"marginal_power_{j}": np.empty(len(grid)) for j in range(1, k + 1)}

    for i, theta in enumerate(grid):
        sc = _curve_scenario(model, np.full(k, theta))
        oc = analytic_opchars(model, sizes, sc, mcc, alpha, settings=settings, thr=thr)
        series_a["p_con"][i] = oc.p_con
        series_a["p_dis"][i] = oc.p_dis
        series_a["pher"][i] = oc.pher
        series_a["fdr"][i] = oc.fdr
        series_a["fndr"][i] = oc.fndr
        series_a["pfdr"][i] = oc.pfdr
        series_a["sensitivity"][i] = oc.sensitivity
        series_a["specificity"][i] = oc.specificity
        for a in range(1, k + 1):
            series_a[f"fwer_i_{a}"][i] = oc.fwer_i[a - 1]
            series_a[f"fwer_ii_{a}"][i] = oc.fwer_ii[a - 1]
        for j in range(1, k + 1):
            series_a[f"marginal_power_{j}"][i] = oc.p_marginal[j - 1]

    shift = delta1 - delta0
    crit = ndtri(1.0 - np.asarray(thr.gammas))
    for j in range(1, k + 1):
        for i, theta in enumerate(grid):
            eff = np.full(k, theta - shift)
            eff[j - 1] = theta
            sc = _curve_scenario(model, eff)
            if mcc.is_stepwise:
                oc = analytic_opchars(model, sizes, sc, mcc, alpha, settings=settings, thr=thr)
                series_b[f"marginal_power_{j}"][i] = oc.p_marginal[j - 1]
            else:
                # marginal of the joint law; no box integral needed
                law = z_law(model, sizes, sc)
                series_b[f"marginal_power_{j}"][i] = float(ndtr(law.mean[j - 1] - crit[j - 1]))

    reference = {
        "alpha": float(alpha),
        "power_target": float(power_target),
        "delta1": float(delta1),
        "delta0": float(delta0),
    }
    return CurveData(theta_grid=grid, series_a=series_a, series_b=series_b, reference=reference)
