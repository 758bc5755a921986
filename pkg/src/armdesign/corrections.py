"""Multiple-comparison corrections: thresholds and rejection procedures.

Ten procedures in five families.  Single-step and unadjusted testing
compare every p-value to one threshold; step-down procedures walk the
sorted p-values from the smallest and stop at the first failure; step-up
procedures (including the FDR pair) scan from the largest and reject
everything at or below the last success.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from armdesign.errors import DomainError, InputError, UnsupportedConfigError
from armdesign.mvn import CorrMatrix, QmcSettings, equicoordinate_quantile, std_normal_cdf


class Family(str, Enum):
    PHER = "pher"
    SINGLE_STEP = "single_step"
    STEP_DOWN = "step_down"
    STEP_UP = "step_up"
    FDR_STEP_UP = "fdr_step_up"


class Mcc(str, Enum):
    NONE = "none"
    BONFERRONI = "bonferroni"
    SIDAK = "sidak"
    DUNNETT = "dunnett"
    HOLM_BONFERRONI = "holm_bonferroni"
    HOLM_SIDAK = "holm_sidak"
    STEPDOWN_DUNNETT = "stepdown_dunnett"
    HOCHBERG = "hochberg"
    BENJAMINI_HOCHBERG = "benjamini_hochberg"
    BENJAMINI_YEKUTIELI = "benjamini_yekutieli"

    @property
    def family(self) -> Family:
        return _FAMILY[self]

    @property
    def needs_correlation(self) -> bool:
        return self in (Mcc.DUNNETT, Mcc.STEPDOWN_DUNNETT)

    @property
    def is_stepwise(self) -> bool:
        return self.family in (Family.STEP_DOWN, Family.STEP_UP, Family.FDR_STEP_UP)

    @property
    def controls_fwer(self) -> bool:
        return self.family in (Family.SINGLE_STEP, Family.STEP_DOWN, Family.STEP_UP)


_FAMILY = {
    Mcc.NONE: Family.PHER,
    Mcc.BONFERRONI: Family.SINGLE_STEP,
    Mcc.SIDAK: Family.SINGLE_STEP,
    Mcc.DUNNETT: Family.SINGLE_STEP,
    Mcc.HOLM_BONFERRONI: Family.STEP_DOWN,
    Mcc.HOLM_SIDAK: Family.STEP_DOWN,
    Mcc.STEPDOWN_DUNNETT: Family.STEP_DOWN,
    Mcc.HOCHBERG: Family.STEP_UP,
    Mcc.BENJAMINI_HOCHBERG: Family.FDR_STEP_UP,
    Mcc.BENJAMINI_YEKUTIELI: Family.FDR_STEP_UP,
}


@dataclass(frozen=True)
class ThresholdSet:
    """Significance levels gamma_1..gamma_K, indexed by p-value rank.

    For single-step procedures all entries are equal; rank-based
    procedures compare the k-th smallest p-value to gammas[k-1].
    """

    gammas: tuple[float, ...]
    alpha: float

    def __post_init__(self) -> None:
        if not all(0.0 < g < 1.0 for g in self.gammas):
            raise DomainError(f"all thresholds must lie in (0,1), got {self.gammas}")

    @property
    def k(self) -> int:
        return len(self.gammas)


def thresholds(
    mcc: Mcc,
    alpha: float,
    k: int,
    corr: CorrMatrix | None = None,
    settings: QmcSettings | None = None,
) -> ThresholdSet:
    """Threshold vector for the given procedure at nominal level alpha.

    The Dunnett-family thresholds need the null correlation of the Z
    vector; the step-down variant additionally requires it exchangeable
    and solves one equicoordinate quantile per rank on the shrinking
    sub-dimension K+1-k.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must be in (0,1), got {alpha!r}")
    if not (1 <= k <= 5):
        raise DomainError(f"k must be in 1..5, got {k}")
    if mcc.needs_correlation:
        if corr is None:
            raise InputError(f"{mcc.value} requires the null correlation matrix")
        if corr.dim != k:
            raise InputError(f"correlation dimension {corr.dim} does not match k={k}")
    elif corr is not None and corr.dim != k:
        raise InputError(f"correlation dimension {corr.dim} does not match k={k}")

    ranks = np.arange(1, k + 1)
    if mcc is Mcc.NONE:
        g = np.full(k, alpha)
    elif mcc is Mcc.BONFERRONI:
        g = np.full(k, alpha / k)
    elif mcc is Mcc.SIDAK:
        g = np.full(k, 1.0 - (1.0 - alpha) ** (1.0 / k))
    elif mcc is Mcc.DUNNETT:
        c = equicoordinate_quantile(alpha, corr, settings)
        g = np.full(k, 1.0 - std_normal_cdf(c))
    elif mcc is Mcc.HOLM_BONFERRONI:
        g = alpha / (k + 1 - ranks)
    elif mcc is Mcc.HOLM_SIDAK:
        g = 1.0 - (1.0 - alpha) ** (1.0 / (k + 1 - ranks))
    elif mcc is Mcc.STEPDOWN_DUNNETT:
        if not corr.is_exchangeable():
            raise UnsupportedConfigError(
                "stepdown_dunnett requires an exchangeable correlation matrix "
                "(equal allocation-induced correlations across arms)"
            )
        rho = float(corr.values[0, 1]) if k > 1 else 0.0
        g = np.empty(k)
        for r in ranks:
            sub_dim = k + 1 - r
            sub = CorrMatrix.exchangeable(sub_dim, rho) if sub_dim > 1 else CorrMatrix.identity(1)
            c = equicoordinate_quantile(alpha, sub, settings)
            g[r - 1] = 1.0 - std_normal_cdf(c)
    elif mcc is Mcc.HOCHBERG:
        g = alpha / (k + 1 - ranks)
    elif mcc is Mcc.BENJAMINI_HOCHBERG:
        g = ranks * alpha / k
    elif mcc is Mcc.BENJAMINI_YEKUTIELI:
        harmonic = np.sum(1.0 / np.arange(1, k + 1))
        g = ranks * alpha / (k * harmonic)
    else:  # pragma: no cover
        raise InputError(f"unknown correction {mcc!r}")
    return ThresholdSet(gammas=tuple(float(x) for x in g), alpha=float(alpha))


def apply(mcc: Mcc, p, thr: ThresholdSet) -> np.ndarray:
    """Rejection decisions (length-K boolean vector) for one p-value vector."""
    pv = np.asarray(p, dtype=float)
    if pv.ndim != 1 or pv.shape[0] != thr.k:
        raise InputError(f"expected {thr.k} p-values, got shape {pv.shape}")
    if np.any(pv < 0.0) or np.any(pv > 1.0) or np.any(np.isnan(pv)):
        raise DomainError("p-values must lie in [0, 1]")
    return _apply_matrix(mcc, pv[None, :], thr)[0]


def _apply_matrix(mcc: Mcc, p: np.ndarray, thr: ThresholdSet) -> np.ndarray:
    """Vectorized rejection rule over an (N, K) matrix of p-value vectors."""
    g = np.asarray(thr.gammas)
    family = mcc.family
    if family in (Family.PHER, Family.SINGLE_STEP):
        return p <= g
    # ties broken by original arm index: stable sort
    order = np.argsort(p, axis=1, kind="stable")
    sorted_p = np.take_along_axis(p, order, axis=1)
    ok = sorted_p <= g
    if family is Family.STEP_DOWN:
        # reject the leading run of passing ranks
        reject_sorted = np.cumprod(ok, axis=1, dtype=bool)
    else:
        # step-up: reject every rank up to the last passing one
        k = p.shape[1]
        any_ok = ok.any(axis=1)
        last_ok = k - 1 - np.argmax(ok[:, ::-1], axis=1)
        reject_sorted = np.arange(k)[None, :] <= last_ok[:, None]
        reject_sorted &= any_ok[:, None]
    out = np.empty_like(reject_sorted)
    np.put_along_axis(out, order, reject_sorted, axis=1)
    return out


def procedure_closure(mcc: Mcc, thr: ThresholdSet) -> Callable[[np.ndarray], np.ndarray]:
    """Stateless rejection rule with the thresholds baked in.

    The returned callable accepts a single p-value vector or an (N, K)
    matrix and returns rejections of the same leading shape.
    """

    def rule(p: np.ndarray) -> np.ndarray:
        pv = np.asarray(p, dtype=float)
        if pv.ndim == 1:
            return apply(mcc, pv, thr)
        return _apply_matrix(mcc, pv, thr)

    return rule
